#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "wavegas/error.hpp"
#include "wavegas/graph.hpp"
#include "wavegas/history.hpp"
#include "wavegas/model.hpp"
#include "wavegas/partition.hpp"
#include "wavegas/staleness.hpp"

namespace wavegas {

enum class Method { full, gas, wavegas, gradas };

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::full: return "full";
    case Method::gas: return "gas";
    case Method::wavegas: return "wavegas";
    case Method::gradas: return "gradas";
  }
  return "?";
}

inline Method parse_method(std::string_view s) {
  if (s == "full") return Method::full;
  if (s == "gas") return Method::gas;
  if (s == "wavegas") return Method::wavegas;
  if (s == "gradas") return Method::gradas;
  detail::fail("unknown method '", s, "' (expected full, gas, wavegas or gradas)");
}

// How validation/test accuracy is computed each epoch.
enum class EvalMode {
  full,     // one full-graph forward
  batched,  // wave_iters history-backed sweeps over the batches
};

struct TrainConfig {
  Method method = Method::gas;
  std::size_t epochs = 200;
  std::size_t wave_iters = 1;
  std::size_t partitions = 1;
  std::size_t batch_parts = 1;
  double lr = 0.01;
  std::uint64_t seed = 0;
  std::size_t hidden = 16;
  float dropout = 0.5f;
  float input_dropout = 0.5f;
  double weight_decay = 5e-4;
  DecayMode decay_mode = DecayMode::l2;
  bool residual = false;
  EvalMode eval_mode = EvalMode::full;
  std::size_t jacobian_budget = 50'000'000;
  bool track_staleness = false;
  std::string dataset;

  void validate() const {
    detail::require(wave_iters >= 1, "wave_iters must be >= 1");
    detail::require(partitions >= batch_parts && batch_parts >= 1,
                    "need partitions >= batch_parts >= 1, got P=", partitions,
                    " batch_parts=", batch_parts);
    detail::require(dropout >= 0.0f && dropout < 1.0f, "dropout must be in [0, 1)");
    detail::require(input_dropout >= 0.0f && input_dropout < 1.0f, "input_dropout must be in [0, 1)");
    detail::require(lr >= 0.0, "lr must be >= 0");
    detail::require(hidden >= 1, "hidden must be >= 1");
  }
};

struct StalenessSample {
  std::size_t epoch = 0;
  std::size_t sweep = 0;  // 0 = epoch start, s = after s refresh sweeps, last = after the main loop
  std::size_t layer = 0;
  double max = 0.0;
  double mean = 0.0;
};

struct RunRecord {
  std::string method;
  std::string dataset;
  std::uint64_t seed = 0;
  std::size_t iters = 1;
  std::size_t partitions = 1;
  std::size_t batch_parts = 1;
  double best_val_acc = 0.0;
  double test_acc = 0.0;
  std::size_t best_epoch = 0;
  double wall_time_s = 0.0;
  std::vector<double> final_staleness;  // max per stored layer

  std::vector<double> loss_trace;  // one entry per optimizer step
  std::vector<double> val_trace;
  std::vector<double> test_trace;
  std::size_t history_bytes = 0;   // peak HistoryStore footprint
  std::size_t edge_cut = 0;
  std::vector<StalenessSample> staleness_trace;
  ModelParams final_params;
};

namespace detail {

using clock = std::chrono::steady_clock;

class Stopwatch {
 public:
  void start() { t0_ = clock::now(); }
  void stop() { total_ += std::chrono::duration<double>(clock::now() - t0_).count(); }
  double seconds() const { return total_; }

 private:
  clock::time_point t0_{};
  double total_ = 0.0;
};

struct RunSetup {
  NormAdjacency norm;
  std::vector<char> train_mask;

  explicit RunSetup(const Graph& g) : norm(gcn_normalize(g)), train_mask(g.num_nodes, 0) {
    for (index_t v : g.splits.train) train_mask[v] = 1;
  }
  LossTarget target(const Graph& g) const { return {g.labels, train_mask}; }
};

inline RunRecord make_record(const TrainConfig& cfg, std::size_t iters) {
  RunRecord r;
  r.method = std::string(to_string(cfg.method));
  r.dataset = cfg.dataset;
  r.seed = cfg.seed;
  r.iters = iters;
  r.partitions = cfg.partitions;
  r.batch_parts = cfg.batch_parts;
  return r;
}

inline void record_epoch(RunRecord& r, std::size_t epoch, double val, double test) {
  r.val_trace.push_back(val);
  r.test_trace.push_back(test);
  if (r.val_trace.size() == 1 || val > r.best_val_acc) {
    r.best_val_acc = val;
    r.test_acc = test;
    r.best_epoch = epoch;
  }
}

inline AdamConfig adam_config(const TrainConfig& cfg) {
  AdamConfig a;
  a.lr = cfg.lr;
  a.weight_decay = cfg.weight_decay;
  a.decay_mode = cfg.decay_mode;
  return a;
}

inline void sample_staleness(RunRecord& r, const ModelParams& p, const Graph& g,
                             const NormAdjacency& norm, const HistoryStore& store, std::size_t epoch,
                             std::size_t sweep) {
  const auto rep = measure_staleness(p, g, norm, store);
  for (std::size_t l = 0; l < rep.layers.size(); ++l)
    r.staleness_trace.push_back({epoch, sweep, l, rep.layers[l].max, rep.layers[l].mean});
}

// Inference through history-backed batches: `sweeps` passes, logits from the last.
inline DenseMatrix batched_logits(const ModelParams& p, const Graph& g,
                                  const std::vector<BatchView>& batches, HistoryStore& store,
                                  std::size_t sweeps) {
  DenseMatrix logits(g.num_nodes, p.classes());
  for (std::size_t s = 0; s < sweeps; ++s)
    for (const auto& bv : batches) {
      const auto r = forward_batch(p, bv, store, false);
      if (s + 1 == sweeps)
        for (std::size_t i = 0; i < bv.num_in(); ++i)
          std::copy_n(r.logits.row(i).begin(), p.classes(), logits.row(bv.in_nodes[i]).begin());
    }
  return logits;
}

// GAS main loop with `refresh` untracked sweeps per epoch before it; the
// gradas flag additionally rebuilds the jacobian cache each epoch.
inline RunRecord train_partitioned(const TrainConfig& cfg, const Graph& g, std::size_t refresh,
                                   bool gradas) {
  cfg.validate();
  RunSetup setup(g);
  const auto target = setup.target(g);
  RunRecord rec = make_record(cfg, refresh + 1);

  ModelParams params = init_params(g.num_features(), cfg.hidden, g.num_classes, cfg.seed, cfg.residual);
  if (gradas) {
    const std::size_t demand = g.num_nodes * params.num_params();
    if (demand > cfg.jacobian_budget)
      fail("gradas: jacobian cache needs ", demand, " (num_nodes x num_params) but the budget is ",
           cfg.jacobian_budget);
  }
  AdamState adam = AdamState::for_params(params);
  const AdamConfig acfg = adam_config(cfg);
  HistoryStore store = init_history(params, g);
  rec.history_bytes = store.resident_bytes();

  const PartitionPlan plan = greedy_partition(g, cfg.partitions, cfg.seed, cfg.batch_parts);
  rec.edge_cut = edge_cut(g, plan);

  Stopwatch watch;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    watch.start();
    const auto batches = build_batches(g, setup.norm, plan, cfg.seed + epoch);
    watch.stop();
    if (cfg.track_staleness) sample_staleness(rec, params, g, setup.norm, store, epoch, 0);

    for (std::size_t s = 0; s < refresh; ++s) {
      watch.start();
      for (const auto& bv : batches) forward_batch(params, bv, store, false);
      watch.stop();
      if (cfg.track_staleness) sample_staleness(rec, params, g, setup.norm, store, epoch, s + 1);
    }

    watch.start();
    std::optional<JacobianCache> jac;
    if (gradas) jac = build_jacobians(params, setup.norm, g.features, cfg.jacobian_budget);
    for (const auto& bv : batches) {
      const DropoutKey drop{cfg.dropout, cfg.input_dropout, cfg.seed, epoch, bv.batch_id};
      const auto fwd = forward_batch(params, bv, store, true, drop);
      const auto back = backward_batch(params, *fwd.tape, target,
                                       gradas ? GradMode::gradas : GradMode::truncated,
                                       jac ? &*jac : nullptr);
      if (back.count == 0) continue;
      rec.loss_trace.push_back(back.loss);
      adam_step(params, back.grads, adam, acfg);
    }
    watch.stop();
    rec.history_bytes = std::max(rec.history_bytes, store.resident_bytes());
    if (cfg.track_staleness) sample_staleness(rec, params, g, setup.norm, store, epoch, refresh + 1);

    const DenseMatrix logits = cfg.eval_mode == EvalMode::full
                                   ? forward_full(params, setup.norm, g.features, false).logits
                                   : batched_logits(params, g, batches, store, refresh + 1);
    record_epoch(rec, epoch, accuracy(logits, g.labels, g.splits.val),
                 accuracy(logits, g.labels, g.splits.test));
  }
  if (!params.w1.all_finite() || !params.w2.all_finite())
    fail("training diverged: non-finite parameters");
  rec.wall_time_s = watch.seconds();
  rec.final_staleness = measure_staleness(params, g, setup.norm, store).max_per_layer();
  rec.final_params = std::move(params);
  return rec;
}

}  // namespace detail

inline RunRecord train_full(const TrainConfig& cfg, const Graph& g) {
  detail::require(cfg.method == Method::full, "train_full: config method is ", to_string(cfg.method));
  cfg.validate();
  detail::RunSetup setup(g);
  const auto target = setup.target(g);
  RunRecord rec = detail::make_record(cfg, 1);
  rec.partitions = rec.batch_parts = 1;

  ModelParams params = init_params(g.num_features(), cfg.hidden, g.num_classes, cfg.seed, cfg.residual);
  AdamState adam = AdamState::for_params(params);
  const AdamConfig acfg = detail::adam_config(cfg);

  detail::Stopwatch watch;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    watch.start();
    const DropoutKey drop{cfg.dropout, cfg.input_dropout, cfg.seed, epoch, 0};
    const auto fwd = forward_full(params, setup.norm, g.features, true, drop);
    const auto back = backward_batch(params, *fwd.tape, target, GradMode::truncated);
    if (back.count > 0) {
      rec.loss_trace.push_back(back.loss);
      adam_step(params, back.grads, adam, acfg);
    }
    watch.stop();
    const DenseMatrix logits = forward_full(params, setup.norm, g.features, false).logits;
    detail::record_epoch(rec, epoch, accuracy(logits, g.labels, g.splits.val),
                         accuracy(logits, g.labels, g.splits.test));
  }
  if (!params.w1.all_finite() || !params.w2.all_finite())
    detail::fail("training diverged: non-finite parameters");
  rec.wall_time_s = watch.seconds();
  rec.final_params = std::move(params);
  return rec;
}

inline RunRecord train_gas(const TrainConfig& cfg, const Graph& g) {
  detail::require(cfg.method == Method::gas, "train_gas: config method is ", to_string(cfg.method));
  return detail::train_partitioned(cfg, g, 0, false);
}

// I−1 refresh sweeps then the GAS main loop, so I = 1 is exactly GAS.
inline RunRecord train_wavegas(const TrainConfig& cfg, const Graph& g) {
  detail::require(cfg.method == Method::wavegas, "train_wavegas: config method is ",
                  to_string(cfg.method));
  detail::require(cfg.wave_iters >= 1, "wave_iters must be >= 1");
  return detail::train_partitioned(cfg, g, cfg.wave_iters - 1, false);
}

inline RunRecord train_gradas(const TrainConfig& cfg, const Graph& g) {
  detail::require(cfg.method == Method::gradas, "train_gradas: config method is ",
                  to_string(cfg.method));
  detail::require(cfg.wave_iters >= 1, "wave_iters must be >= 1");
  return detail::train_partitioned(cfg, g, cfg.wave_iters - 1, true);
}

inline RunRecord train(const TrainConfig& cfg, const Graph& g) {
  switch (cfg.method) {
    case Method::full: return train_full(cfg, g);
    case Method::gas: return train_gas(cfg, g);
    case Method::wavegas: return train_wavegas(cfg, g);
    case Method::gradas: return train_gradas(cfg, g);
  }
  detail::fail("train: unknown method");
}

}  // namespace wavegas
