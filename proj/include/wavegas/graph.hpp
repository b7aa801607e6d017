#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "wavegas/error.hpp"
#include "wavegas/linalg.hpp"

namespace wavegas {

struct Splits {
  std::vector<index_t> train;
  std::vector<index_t> val;
  std::vector<index_t> test;

  friend bool operator==(const Splits&, const Splits&) = default;
};

// Undirected graph without self-loops. adjacency holds every edge in both
// directions with weight 1; num_edges counts each undirected edge once.
struct Graph {
  std::size_t num_nodes = 0;
  std::size_t num_edges = 0;
  std::size_t num_classes = 0;
  CsrMatrix adjacency;
  DenseMatrix features;
  std::vector<std::int32_t> labels;
  Splits splits;

  std::size_t num_features() const { return features.cols(); }
  std::size_t degree(index_t v) const { return adjacency.row_end(v) - adjacency.row_begin(v); }

  std::span<const index_t> neighbors(index_t v) const {
    return {adjacency.col_idx.data() + adjacency.row_begin(v), degree(v)};
  }

  friend bool operator==(const Graph&, const Graph&) = default;
};

using Edge = std::pair<index_t, index_t>;

// Symmetrizes and deduplicates edges. Self-loops are reported on stderr and dropped.
inline Graph make_graph(std::size_t num_nodes, const std::vector<Edge>& edges, DenseMatrix features,
                        std::vector<std::int32_t> labels, std::size_t num_classes, Splits splits) {
  detail::require(features.rows() == num_nodes, "make_graph: features have ", features.rows(),
                  " rows for ", num_nodes, " nodes");
  detail::require(labels.size() == num_nodes, "make_graph: ", labels.size(), " labels for ",
                  num_nodes, " nodes");
  for (std::int32_t l : labels)
    detail::require(l >= 0 && static_cast<std::size_t>(l) < num_classes, "make_graph: label ", l,
                    " outside [0, ", num_classes, ")");

  std::set<Edge> undirected;
  std::size_t self_loops = 0;
  for (auto [u, v] : edges) {
    detail::require(u < num_nodes && v < num_nodes, "make_graph: edge (", u, ",", v,
                    ") references a node >= ", num_nodes);
    if (u == v) {
      ++self_loops;
      continue;
    }
    undirected.emplace(std::min(u, v), std::max(u, v));
  }
  if (self_loops) std::cerr << "warning: dropped " << self_loops << " self-loop(s)\n";

  std::vector<Triplet> t;
  t.reserve(undirected.size() * 2);
  for (auto [u, v] : undirected) {
    t.push_back({u, v, 1.0f});
    t.push_back({v, u, 1.0f});
  }

  std::vector<char> seen(num_nodes, 0);
  for (const auto* part : {&splits.train, &splits.val, &splits.test})
    for (index_t v : *part) {
      detail::require(v < num_nodes, "make_graph: split index ", v, " out of range");
      detail::require(!seen[v], "make_graph: node ", v, " appears in more than one split");
      seen[v] = 1;
    }

  Graph g;
  g.num_nodes = num_nodes;
  g.num_edges = undirected.size();
  g.num_classes = num_classes;
  g.adjacency = csr_from_triplets(num_nodes, num_nodes, std::move(t));
  g.features = std::move(features);
  g.labels = std::move(labels);
  g.splits = std::move(splits);
  return g;
}

// Each undirected edge once, u < v, in adjacency order.
inline std::vector<Edge> edge_list(const Graph& g) {
  std::vector<Edge> out;
  out.reserve(g.num_edges);
  for (index_t u = 0; u < g.num_nodes; ++u)
    for (index_t v : g.neighbors(u))
      if (u < v) out.emplace_back(u, v);
  return out;
}

// Â = D̃^{-1/2}(A+I)D̃^{-1/2} with D̃ = deg + 1.
struct NormAdjacency {
  CsrMatrix matrix;
};

inline NormAdjacency gcn_normalize(const Graph& g) {
  const auto& a = g.adjacency;
  CsrMatrix m;
  m.rows = m.cols = g.num_nodes;
  m.row_ptr.assign(g.num_nodes + 1, 0);
  m.col_idx.reserve(a.nnz() + g.num_nodes);
  m.values.reserve(a.nnz() + g.num_nodes);
  for (index_t v = 0; v < g.num_nodes; ++v) {
    const double dv = static_cast<double>(g.degree(v)) + 1.0;
    bool self_done = false;
    auto emit = [&](index_t w) {
      const double dw = static_cast<double>(g.degree(w)) + 1.0;
      m.col_idx.push_back(w);
      m.values.push_back(static_cast<float>(1.0 / std::sqrt(dv * dw)));
    };
    for (index_t w : g.neighbors(v)) {
      if (!self_done && w > v) {
        emit(v);
        self_done = true;
      }
      emit(w);
    }
    if (!self_done) emit(v);
    m.row_ptr[v + 1] = m.col_idx.size();
  }
  return {std::move(m)};
}

// Scales each feature row to sum 1; all-zero rows stay zero.
inline DenseMatrix row_normalize(const DenseMatrix& x) {
  DenseMatrix out = x;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    double s = 0.0;
    for (float v : r) s += v;
    if (s == 0.0) continue;
    for (float& v : r) v = static_cast<float>(v / s);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dataset directory format
//
//   meta.json     {"num_nodes":N,"num_edges":E,"num_features":F,"num_classes":C}
//   edges.txt     "u v" per line, each undirected edge once
//   features.bin  N*F little-endian float32, row-major
//   labels.txt    one integer per line
//   splits.json   {"train":[...],"val":[...],"test":[...]}
// ---------------------------------------------------------------------------

namespace detail {

inline std::uint32_t byteswap32(std::uint32_t v) {
  return (v >> 24) | ((v >> 8) & 0xff00u) | ((v << 8) & 0xff0000u) | (v << 24);
}

template <typename... Args>
[[noreturn]] void load_fail(Args&&... args) {
  throw LoadError(concat(std::forward<Args>(args)...));
}

inline std::ifstream open_in(const std::filesystem::path& p, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(p, mode);
  if (!in) load_fail("cannot open ", p.string());
  return in;
}

inline nlohmann::json read_json(const std::filesystem::path& p) {
  auto in = open_in(p);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    load_fail(p.string(), ": ", e.what());
  }
}

}  // namespace detail

inline void write_features_bin(const DenseMatrix& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot write " + path.string());
  for (float v : m.values()) {
    std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
    if constexpr (std::endian::native == std::endian::big) bits = detail::byteswap32(bits);
    out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
  }
}

inline DenseMatrix read_features_bin(const std::filesystem::path& path, std::size_t rows,
                                     std::size_t cols) {
  auto in = detail::open_in(path, std::ios::binary);
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  if (size != rows * cols * sizeof(float))
    detail::load_fail(path.string(), ": ", size, " bytes, expected ", rows, "x", cols, "x4 = ",
                      rows * cols * sizeof(float));
  in.seekg(0);
  std::vector<std::uint32_t> raw(rows * cols);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(size));
  std::vector<float> data(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    std::uint32_t bits = raw[i];
    if constexpr (std::endian::native == std::endian::big) bits = detail::byteswap32(bits);
    data[i] = std::bit_cast<float>(bits);
  }
  return DenseMatrix(rows, cols, std::move(data));
}

inline Graph load_dataset(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) detail::load_fail("dataset directory not found: ", dir.string());

  const auto meta = detail::read_json(dir / "meta.json");
  std::size_t n = 0, e = 0, f = 0, c = 0;
  try {
    n = meta.at("num_nodes").get<std::size_t>();
    e = meta.at("num_edges").get<std::size_t>();
    f = meta.at("num_features").get<std::size_t>();
    c = meta.at("num_classes").get<std::size_t>();
  } catch (const nlohmann::json::exception& ex) {
    detail::load_fail("meta.json: ", ex.what());
  }

  std::vector<Edge> edges;
  {
    auto in = detail::open_in(dir / "edges.txt");
    long long u = 0, v = 0;
    while (in >> u >> v) {
      if (u < 0 || v < 0 || static_cast<std::size_t>(u) >= n || static_cast<std::size_t>(v) >= n)
        detail::load_fail("edges.txt: edge (", u, ",", v, ") outside [0, ", n, ")");
      edges.emplace_back(static_cast<index_t>(u), static_cast<index_t>(v));
    }
    if (!in.eof()) detail::load_fail("edges.txt: malformed line after ", edges.size(), " edges");
  }

  std::vector<std::int32_t> labels;
  {
    auto in = detail::open_in(dir / "labels.txt");
    long long l = 0;
    while (in >> l) {
      if (l < 0 || static_cast<std::size_t>(l) >= c)
        detail::load_fail("labels.txt: label ", l, " on line ", labels.size() + 1, " outside [0, ",
                          c, ")");
      labels.push_back(static_cast<std::int32_t>(l));
    }
    if (!in.eof()) detail::load_fail("labels.txt: malformed line ", labels.size() + 1);
  }
  if (labels.size() != n) detail::load_fail("labels.txt: ", labels.size(), " labels, meta says ", n);

  auto features = read_features_bin(dir / "features.bin", n, f);

  Splits splits;
  const auto sj = detail::read_json(dir / "splits.json");
  try {
    splits.train = sj.at("train").get<std::vector<index_t>>();
    splits.val = sj.at("val").get<std::vector<index_t>>();
    splits.test = sj.at("test").get<std::vector<index_t>>();
  } catch (const nlohmann::json::exception& ex) {
    detail::load_fail("splits.json: ", ex.what());
  }

  Graph g;
  try {
    g = make_graph(n, edges, std::move(features), std::move(labels), c, std::move(splits));
  } catch (const ConfigError& ex) {
    detail::load_fail(dir.string(), ": ", ex.what());
  }
  if (g.num_edges != e)
    detail::load_fail("edges.txt: ", g.num_edges, " undirected edges after dedup, meta says ", e);
  return g;
}

inline void save_dataset(const Graph& g, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::json meta = {{"num_nodes", g.num_nodes},
                         {"num_edges", g.num_edges},
                         {"num_features", g.num_features()},
                         {"num_classes", g.num_classes}};
  std::ofstream(dir / "meta.json") << meta.dump();
  {
    std::ofstream out(dir / "edges.txt");
    for (auto [u, v] : edge_list(g)) out << u << ' ' << v << '\n';
  }
  write_features_bin(g.features, dir / "features.bin");
  {
    std::ofstream out(dir / "labels.txt");
    for (auto l : g.labels) out << l << '\n';
  }
  nlohmann::json sj = {{"train", g.splits.train}, {"val", g.splits.val}, {"test", g.splits.test}};
  std::ofstream(dir / "splits.json") << sj.dump();
}

// ---------------------------------------------------------------------------
// Synthetic stochastic block model
// ---------------------------------------------------------------------------

struct SbmSpec {
  std::size_t blocks = 2;
  std::size_t nodes_per_block = 25;
  double p_in = 0.5;
  double p_out = 0.05;
  std::size_t num_features = 16;
  std::size_t num_classes = 2;
  // Distance scale between class means, relative to unit feature noise.
  double feature_signal = 1.0;
};

// Labels are block % num_classes; features are a per-class Gaussian mean plus
// unit noise. Nodes are split 60/20/20 after a seeded shuffle.
inline Graph synth_sbm(const SbmSpec& s, std::uint64_t seed) {
  detail::require(0.0 <= s.p_out && s.p_out <= s.p_in && s.p_in <= 1.0,
                  "synth_sbm: need 0 <= p_out <= p_in <= 1, got p_in=", s.p_in, " p_out=", s.p_out);
  detail::require(s.num_classes >= 1, "synth_sbm: num_classes must be >= 1");
  const std::size_t n = s.blocks * s.nodes_per_block;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<Edge> edges;
  for (index_t u = 0; u < n; ++u)
    for (index_t v = u + 1; v < n; ++v) {
      const bool same = u / s.nodes_per_block == v / s.nodes_per_block;
      if (unif(rng) < (same ? s.p_in : s.p_out)) edges.emplace_back(u, v);
    }

  DenseMatrix means(s.num_classes, s.num_features);
  for (float& v : means.values()) v = static_cast<float>(s.feature_signal * gauss(rng));

  std::vector<std::int32_t> labels(n);
  DenseMatrix x(n, s.num_features);
  for (index_t v = 0; v < n; ++v) {
    labels[v] = static_cast<std::int32_t>((v / s.nodes_per_block) % s.num_classes);
    for (std::size_t j = 0; j < s.num_features; ++j)
      x(v, j) = static_cast<float>(means(labels[v], j) + gauss(rng));
  }

  std::vector<index_t> perm(n);
  for (index_t v = 0; v < n; ++v) perm[v] = v;
  std::shuffle(perm.begin(), perm.end(), rng);
  const std::size_t n_train = n * 6 / 10;
  const std::size_t n_val = n * 2 / 10;
  Splits splits;
  splits.train.assign(perm.begin(), perm.begin() + n_train);
  splits.val.assign(perm.begin() + n_train, perm.begin() + n_train + n_val);
  splits.test.assign(perm.begin() + n_train + n_val, perm.end());
  for (auto* part : {&splits.train, &splits.val, &splits.test}) std::sort(part->begin(), part->end());

  return make_graph(n, edges, std::move(x), std::move(labels), s.num_classes, std::move(splits));
}

}  // namespace wavegas
