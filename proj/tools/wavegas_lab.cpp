// wavegas-lab: run, sweep and summarize GCN training experiments.
//
//   wavegas-lab train  --data DIR | --synth sbm:BxN[:p_in:p_out] [options]
//   wavegas-lab sweep  --data DIR --iters-range 1:11 --runs 20 [options]
//   wavegas-lab report FILE.csv [FILE.csv ...]
//   wavegas-lab stats wilcoxon --a A.csv --b B.csv
//
// Exit codes: 0 ok, 1 dataset/file load failure, 2 bad flags or configuration.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "wavegas/bench.hpp"
#include "wavegas/graph.hpp"
#include "wavegas/trainers.hpp"

namespace fs = std::filesystem;
using namespace wavegas;

namespace {

struct DataOptions {
  std::string data;
  std::string synth;
  std::uint64_t graph_seed = 0;
  std::string feature_norm = "row";
};

struct RunOptions {
  DataOptions data;
  TrainConfig cfg;
  std::string method = "gas";
  std::string eval_mode = "full";
  std::string decay_mode = "l2";
  std::size_t runs = 1;
  std::string out;
  std::string staleness_csv;
};

// sbm:BxN[:p_in:p_out]
SbmSpec parse_synth(const std::string& spec) {
  const auto parts = bench::detail::split(spec, ':');
  if (parts.size() < 2 || parts[0] != "sbm")
    detail::fail("--synth expects sbm:BxN[:p_in:p_out], got '", spec, "'");
  SbmSpec s;
  const auto x = parts[1].find('x');
  if (x == std::string::npos) detail::fail("--synth: block shape must be BxN, got '", parts[1], "'");
  try {
    s.blocks = std::stoul(parts[1].substr(0, x));
    s.nodes_per_block = std::stoul(parts[1].substr(x + 1));
    if (parts.size() >= 4) {
      s.p_in = std::stod(parts[2]);
      s.p_out = std::stod(parts[3]);
    } else if (parts.size() != 2) {
      detail::fail("--synth: give both p_in and p_out");
    }
  } catch (const std::logic_error& e) {
    if (dynamic_cast<const ConfigError*>(&e)) throw;
    detail::fail("--synth: cannot parse '", spec, "'");
  }
  detail::require(s.blocks >= 1 && s.nodes_per_block >= 1, "--synth: empty graph");
  s.num_classes = s.blocks;
  return s;
}

// Relative paths that do not exist are looked up under $WAVEGAS_DATA_DIR.
fs::path resolve_data_dir(const std::string& arg) {
  fs::path p(arg);
  if (fs::exists(p) || p.is_absolute()) return p;
  if (const char* root = std::getenv("WAVEGAS_DATA_DIR")) {
    const fs::path q = fs::path(root) / p;
    if (fs::exists(q)) return q;
  }
  return p;
}

Graph load_graph(const DataOptions& o, std::string& name) {
  if (o.data.empty() == o.synth.empty()) detail::fail("give exactly one of --data or --synth");
  Graph g;
  if (!o.synth.empty()) {
    g = synth_sbm(parse_synth(o.synth), o.graph_seed);
    name = o.synth;
  } else {
    const fs::path dir = resolve_data_dir(o.data);
    g = load_dataset(dir);
    name = fs::path(dir).lexically_normal().filename().string();
    if (name.empty()) name = fs::path(dir).lexically_normal().parent_path().filename().string();
  }
  if (o.feature_norm == "row") g.features = row_normalize(g.features);
  return g;
}

void add_data_options(CLI::App* app, DataOptions& o) {
  app->add_option("--data", o.data, "dataset directory (relative paths also tried under $WAVEGAS_DATA_DIR)");
  app->add_option("--synth", o.synth, "synthetic graph, sbm:BxN[:p_in:p_out]");
  app->add_option("--graph-seed", o.graph_seed, "seed of the synthetic graph");
  app->add_option("--features", o.feature_norm, "feature preprocessing")
      ->check(CLI::IsMember({"row", "raw"}))
      ->capture_default_str();
}

void add_train_options(CLI::App* app, RunOptions& o) {
  add_data_options(app, o.data);
  auto& c = o.cfg;
  app->add_option("--method", o.method)->check(CLI::IsMember({"full", "gas", "wavegas", "gradas"}))->capture_default_str();
  app->add_option("--epochs", c.epochs)->capture_default_str();
  app->add_option("--partitions", c.partitions)->capture_default_str();
  app->add_option("--batch-parts", c.batch_parts)->capture_default_str();
  app->add_option("--lr", c.lr)->capture_default_str();
  app->add_option("--seed", c.seed, "base seed; run k uses seed + k")->capture_default_str();
  app->add_option("--hidden", c.hidden)->capture_default_str();
  app->add_option("--dropout", c.dropout)->capture_default_str();
  app->add_option("--input-dropout", c.input_dropout)->capture_default_str();
  app->add_option("--weight-decay", c.weight_decay)->capture_default_str();
  app->add_option("--decay-mode", o.decay_mode)->check(CLI::IsMember({"l2", "decoupled"}))->capture_default_str();
  app->add_option("--eval-mode", o.eval_mode)->check(CLI::IsMember({"full", "batched"}))->capture_default_str();
  app->add_flag("--residual", c.residual, "add each node's hidden activation to its logits (needs hidden == classes)");
  app->add_option("--jacobian-budget", c.jacobian_budget, "max num_nodes x num_params for gradas")->capture_default_str();
  app->add_option("--runs", o.runs)->check(CLI::PositiveNumber)->capture_default_str();
  app->add_option("--out", o.out, "append CSV rows here (default: stdout)");
  app->add_option("--staleness-csv", o.staleness_csv, "write per-epoch staleness samples here");
}

void finish_config(RunOptions& o, const std::string& dataset) {
  o.cfg.method = parse_method(o.method);
  o.cfg.eval_mode = o.eval_mode == "batched" ? EvalMode::batched : EvalMode::full;
  o.cfg.decay_mode = o.decay_mode == "decoupled" ? DecayMode::decoupled : DecayMode::l2;
  o.cfg.track_staleness = !o.staleness_csv.empty();
  o.cfg.dataset = dataset;
  o.cfg.validate();
}

class Sink {
 public:
  explicit Sink(const std::string& path) : path_(path) {
    if (path_.empty()) std::cout << bench::csv_header() << '\n';
  }
  void write(const RunRecord& r) {
    if (path_.empty()) std::cout << bench::format_row(bench::to_row(r)) << std::endl;
    else bench::append_csv(path_, {bench::to_row(r)});
  }

 private:
  std::string path_;
};

std::vector<RunRecord> run_series(RunOptions& o, const Graph& g, Sink& sink, std::ofstream* stale) {
  std::vector<RunRecord> out;
  const std::uint64_t base_seed = o.cfg.seed;
  for (std::size_t k = 0; k < o.runs; ++k) {
    TrainConfig cfg = o.cfg;
    cfg.seed = base_seed + k;
    auto rec = train(cfg, g);
    std::cerr << rec.method << " I=" << rec.iters << " seed=" << rec.seed << " val="
              << bench::detail::fixed(rec.best_val_acc, 4) << " test=" << bench::detail::fixed(rec.test_acc, 4)
              << " time=" << bench::detail::fixed(rec.wall_time_s, 2) << "s\n";
    sink.write(rec);
    if (stale) bench::write_staleness_csv(*stale, rec, stale->tellp() == 0);
    out.push_back(std::move(rec));
  }
  return out;
}

int cmd_train(RunOptions& o) {
  std::string name;
  const Graph g = load_graph(o.data, name);
  finish_config(o, name);
  Sink sink(o.out);
  std::unique_ptr<std::ofstream> stale;
  if (!o.staleness_csv.empty()) {
    stale = std::make_unique<std::ofstream>(o.staleness_csv);
    if (!*stale) throw LoadError("cannot write " + o.staleness_csv);
  }
  run_series(o, g, sink, stale.get());
  return 0;
}

int cmd_sweep(RunOptions& o, const std::string& range, const std::string& summary_csv) {
  const auto ends = bench::detail::split(range, ':');
  std::size_t lo = 0, hi = 0;
  try {
    if (ends.size() != 2) throw std::invalid_argument("range");
    lo = std::stoul(ends[0]);
    hi = std::stoul(ends[1]);
  } catch (const std::logic_error&) {
    detail::fail("--iters-range expects LO:HI, got '", range, "'");
  }
  detail::require(lo >= 1 && lo <= hi, "--iters-range needs 1 <= LO <= HI");
  o.method = "wavegas";
  std::string name;
  const Graph g = load_graph(o.data, name);
  finish_config(o, name);
  Sink sink(o.out);
  std::unique_ptr<std::ofstream> stale;
  if (!o.staleness_csv.empty()) stale = std::make_unique<std::ofstream>(o.staleness_csv);

  std::vector<bench::CsvRow> rows;
  for (std::size_t i = lo; i <= hi; ++i) {
    o.cfg.wave_iters = i;
    for (const auto& r : run_series(o, g, sink, stale.get())) rows.push_back(bench::to_row(r));
  }
  const auto summary = bench::summarize_sweep(rows);
  std::cerr << bench::format_sweep(summary);
  if (!summary_csv.empty()) {
    std::ofstream out(summary_csv);
    if (!out) throw LoadError("cannot write " + summary_csv);
    out << bench::format_sweep_csv(summary);
  }
  return 0;
}

int cmd_report(const std::vector<std::string>& files) {
  std::vector<std::pair<std::string, std::vector<bench::CsvRow>>> loaded;
  for (const auto& f : files) loaded.emplace_back(f, bench::read_csv(f));
  try {
    std::cout << bench::format_report(bench::build_report(loaded));
  } catch (const ConfigError& e) {
    throw LoadError(e.what());  // a content problem, not a usage one
  }
  return 0;
}

int cmd_wilcoxon(const std::string& a, const std::string& b) {
  WilcoxonResult r;
  try {
    r = bench::compare_csvs(bench::read_csv(a), bench::read_csv(b), a, b);
  } catch (const ConfigError& e) {
    throw LoadError(e.what());
  }
  std::cout << "n=" << r.n << " W=" << bench::detail::general(r.w_plus) << " p=" << bench::detail::general(r.p_value)
            << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GCN training with historical embeddings and waveform iterations"};
  app.require_subcommand(1);

  RunOptions train_opts;
  auto* train_cmd = app.add_subcommand("train", "train one configuration for --runs seeds");
  add_train_options(train_cmd, train_opts);
  train_cmd->add_option("--iters", train_opts.cfg.wave_iters, "waveform iterations I")->capture_default_str();

  RunOptions sweep_opts;
  std::string range = "1:11";
  std::string summary_csv;
  auto* sweep_cmd = app.add_subcommand("sweep", "run wavegas for each I in a range");
  add_train_options(sweep_cmd, sweep_opts);
  sweep_cmd->add_option("--iters-range", range, "LO:HI, inclusive")->capture_default_str();
  sweep_cmd->add_option("--summary-csv", summary_csv, "per-I summary for plotting");

  std::vector<std::string> report_files;
  auto* report_cmd = app.add_subcommand("report", "accuracy, delta, timing and Wilcoxon tables");
  report_cmd->add_option("files", report_files, "run CSVs")->required()->check(CLI::ExistingFile);

  auto* stats_cmd = app.add_subcommand("stats", "statistical tests");
  stats_cmd->require_subcommand(1);
  std::string csv_a, csv_b;
  auto* wilcoxon_cmd = stats_cmd->add_subcommand("wilcoxon", "one-sided signed-rank test, A greater than B");
  wilcoxon_cmd->add_option("--a", csv_a)->required();
  wilcoxon_cmd->add_option("--b", csv_b)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*train_cmd) return cmd_train(train_opts);
    if (*sweep_cmd) return cmd_sweep(sweep_opts, range, summary_csv);
    if (*report_cmd) return cmd_report(report_files);
    if (*wilcoxon_cmd) return cmd_wilcoxon(csv_a, csv_b);
  } catch (const LoadError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
