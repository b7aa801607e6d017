#!/usr/bin/env python3
"""Write the Cora citation graph in the wavegas-lab dataset directory format.

The raw LINQS files (cora.content / cora.cites) are taken from the `pgl`
wheel on PyPI, which bundles them. Pass --wheel to use an already downloaded
wheel, otherwise `pip download` fetches it.

Split: 20 training nodes per class, 500 validation, 1000 test, drawn with a
fixed seed (Planetoid-style sizes; the original Planetoid node order is not
recoverable from the raw files).
"""

import argparse
import json
import pathlib
import subprocess
import sys
import tempfile
import zipfile

import numpy as np

CONTENT = "pgl/data/cora/cora.content"
CITES = "pgl/data/cora/cora.cites"


def fetch_wheel(dest: pathlib.Path) -> pathlib.Path:
    subprocess.run(
        [sys.executable, "-m", "pip", "download", "--no-deps", "-q",
         "-d", str(dest), "pgl==2.2.6"],
        check=True)
    wheels = sorted(dest.glob("pgl-*.whl"))
    if not wheels:
        sys.exit("pgl wheel not found after download")
    return wheels[0]


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="data/cora")
    ap.add_argument("--wheel", default=None)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        wheel = pathlib.Path(args.wheel) if args.wheel else fetch_wheel(pathlib.Path(tmp))
        with zipfile.ZipFile(wheel) as z:
            content = z.read(CONTENT).decode().splitlines()
            cites = z.read(CITES).decode().splitlines()

    ids, feats, names = [], [], []
    for line in content:
        parts = line.split()
        ids.append(parts[0])
        feats.append([float(v) for v in parts[1:-1]])
        names.append(parts[-1])
    classes = sorted(set(names))
    labels = np.array([classes.index(n) for n in names], dtype=np.int64)
    x = np.asarray(feats, dtype="<f4")
    index = {pid: i for i, pid in enumerate(ids)}

    edges = set()
    for line in cites:
        a, b = line.split()
        u, v = index[a], index[b]
        if u != v:
            edges.add((min(u, v), max(u, v)))
    edges = sorted(edges)

    rng = np.random.default_rng(args.seed)
    perm = rng.permutation(len(ids))
    train = []
    for c in range(len(classes)):
        train.extend(int(i) for i in perm if labels[i] == c)
        train = train[: 20 * (c + 1)]
    taken = set(train)
    rest = [int(i) for i in perm if int(i) not in taken]
    val, test = rest[:500], rest[500:1500]

    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "meta.json").write_text(json.dumps({
        "num_nodes": len(ids), "num_edges": len(edges),
        "num_features": int(x.shape[1]), "num_classes": len(classes)}))
    (out / "edges.txt").write_text("".join(f"{u} {v}\n" for u, v in edges))
    x.tofile(out / "features.bin")
    (out / "labels.txt").write_text("".join(f"{int(l)}\n" for l in labels))
    (out / "splits.json").write_text(json.dumps(
        {"train": sorted(train), "val": sorted(val), "test": sorted(test)}))
    print(f"cora: {len(ids)} nodes, {len(edges)} edges, {x.shape[1]} features, "
          f"{len(classes)} classes -> {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
