#pragma once

// Shared by the unit tests and the acceptance binary: toy graphs and the
// finite-difference gradient checks built on oracle.hpp.

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "oracle.hpp"
#include "wavegas/model.hpp"
#include "wavegas/partition.hpp"

namespace fixtures {

using namespace wavegas;

// Relative error with a floor on the denominator so that entries which are
// zero up to float32 rounding are compared absolutely.
inline constexpr double kRelFloor = 1e-3;

inline double rel_err(double got, double want) {
  return std::abs(got - want) / std::max({std::abs(got), std::abs(want), kRelFloor});
}

inline double max_rel_err(const std::vector<float>& got, const std::vector<double>& want) {
  if (got.size() != want.size()) throw std::logic_error("max_rel_err: size mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i) worst = std::max(worst, rel_err(got[i], want[i]));
  return worst;
}

inline std::vector<double> to_double(const std::vector<float>& v) { return {v.begin(), v.end()}; }

inline std::vector<index_t> iota_nodes(std::size_t n) {
  std::vector<index_t> v(n);
  for (index_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

inline Graph with_features(std::size_t n, const std::vector<Edge>& edges, std::size_t f, std::size_t c,
                           std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> gauss(0.0f, 1.0f);
  DenseMatrix x(n, f);
  for (float& v : x.values()) v = gauss(rng);
  std::vector<std::int32_t> labels(n);
  for (std::size_t v = 0; v < n; ++v) labels[v] = static_cast<std::int32_t>(rng() % c);
  return make_graph(n, edges, std::move(x), std::move(labels), c, {});
}

// Seeded toy graphs of at most 12 nodes.
inline std::vector<Graph> toy_graphs() {
  std::vector<Graph> out;
  out.push_back(synth_sbm({2, 3, 0.9, 0.2, 3, 2, 1.0}, 1));
  out.push_back(synth_sbm({3, 4, 0.7, 0.15, 4, 3, 1.0}, 2));
  out.push_back(with_features(6, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 0}, {1, 4}}, 3, 3, 3));
  out.push_back(synth_sbm({2, 5, 0.6, 0.2, 5, 2, 1.0}, 4));
  return out;
}

// First batch of a 2-way partition with a non-empty halo.
inline BatchView batch_with_halo(const Graph& g, const NormAdjacency& norm, std::uint64_t seed) {
  for (std::uint64_t s = seed; s < seed + 50; ++s)
    for (auto& bv : build_batches(g, norm, greedy_partition(g, 2, s), s))
      if (!bv.halo_nodes.empty()) return bv;
  throw std::logic_error("batch_with_halo: graph has no cut edges");
}

inline DenseMatrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.5f);
  DenseMatrix m(r, c);
  for (float& v : m.values()) v = u(rng);
  return m;
}

inline std::function<double(std::size_t, std::size_t)> hidden_mask(const DropoutKey& k) {
  if (!k.active()) return {};
  return [k](std::size_t v, std::size_t j) {
    return detail::dropout_uniform(k, DropoutSite::hidden, static_cast<index_t>(v), j) < k.rate
               ? 0.0
               : 1.0 / (1.0 - k.rate);
  };
}

inline oracle::Mat input_dropped(const Graph& g, const DropoutKey& k) {
  oracle::Mat x = oracle::from(g.features);
  if (k.input_rate <= 0.0f) return x;
  for (std::size_t v = 0; v < x.size(); ++v)
    for (std::size_t j = 0; j < x[v].size(); ++j)
      if (x[v][j] != 0.0)
        x[v][j] = detail::dropout_uniform(k, DropoutSite::input, static_cast<index_t>(v), j) < k.input_rate
                      ? 0.0
                      : x[v][j] * (1.0 / (1.0 - k.input_rate));
  return x;
}

struct GradientCheck {
  double max_rel_err = 0.0;
  double loss_diff = 0.0;  // |library loss - oracle loss|
  std::size_t num_params = 0;
};

// backward_batch on one halo batch against central differences of the
// double-precision oracle loss. Truncated mode holds the pulled history
// constant; gradas mode runs on a history refreshed at the current
// parameters, where its gradient is the exact batch-loss gradient.
inline GradientCheck batch_gradient_check(const Graph& g, const ModelParams& params, GradMode mode,
                                          const DropoutKey& drop, std::uint64_t seed) {
  const auto norm = gcn_normalize(g);
  const auto bv = batch_with_halo(g, norm, seed);
  HistoryStore store = init_history(params, g);
  const auto all = iota_nodes(g.num_nodes);
  if (mode == GradMode::truncated)
    store.push(1, all, random_matrix(g.num_nodes, params.hidden(), seed));
  else
    store.push(1, all, forward_full(params, norm, g.features, false).hidden);
  const auto jac = build_jacobians(params, norm, g.features, std::size_t{1} << 30);
  const auto halo_hist = oracle::from(store.pull(1, bv.halo_nodes));

  const std::vector<char> mask(g.num_nodes, 1);
  const auto fwd = forward_batch(params, bv, store, true, drop);
  const auto back = backward_batch(params, *fwd.tape, {g.labels, mask}, mode, &jac);

  const auto ahat = oracle::norm_adjacency(g);
  const auto x = input_dropped(g, drop);
  const auto scale = hidden_mask(drop);
  std::optional<oracle::Mat> held;
  if (mode == GradMode::truncated) held = halo_hist;
  auto loss = [&](const oracle::Params& p) {
    return oracle::batch_loss(p, ahat, x, bv.in_nodes, bv.halo_nodes, held, g.labels, mask, 0.0, scale);
  };
  GradientCheck out;
  out.loss_diff = std::abs(back.loss - loss(oracle::from(params)));
  const auto got = oracle::flatten(back.grads);
  out.num_params = got.size();
  out.max_rel_err = max_rel_err(got, oracle::finite_differences(oracle::from(params), loss));
  return out;
}

// Full-graph backward against central differences.
inline GradientCheck full_gradient_check(const Graph& g, const ModelParams& p) {
  const auto norm = gcn_normalize(g);
  const std::vector<char> mask(g.num_nodes, 1);
  const auto fwd = forward_full(p, norm, g.features, true);
  const auto back = backward_batch(p, *fwd.tape, {g.labels, mask}, GradMode::truncated);
  const auto ahat = oracle::norm_adjacency(g);
  const auto x = oracle::from(g.features);
  const auto all = iota_nodes(g.num_nodes);
  auto loss = [&](const oracle::Params& q) {
    return oracle::batch_loss(q, ahat, x, all, {}, std::nullopt, g.labels, mask);
  };
  GradientCheck out;
  out.loss_diff = std::abs(back.loss - loss(oracle::from(p)));
  const auto got = oracle::flatten(back.grads);
  out.num_params = got.size();
  out.max_rel_err = max_rel_err(got, oracle::finite_differences(oracle::from(p), loss));
  return out;
}

struct GradasSumCheck {
  double vs_library_full = 0.0;  // max rel err against backward on the full graph
  double vs_oracle = 0.0;        // max rel err against finite differences
  double truncated_vs_oracle = 0.0;
  std::size_t halo_total = 0;
};

// Sum of per-batch gradas gradients at zero staleness versus the full-graph
// gradient. Each batch loss is divided by the total train count so the sum
// is the full-graph mean.
inline GradasSumCheck gradas_sum_check(const Graph& g, const ModelParams& p, std::size_t partitions,
                                       std::uint64_t seed) {
  const auto norm = gcn_normalize(g);
  std::vector<char> train(g.num_nodes, 0);
  for (index_t v : g.splits.train) train[v] = 1;
  const double n_train = static_cast<double>(g.splits.train.size());

  HistoryStore store = init_history(p, g);
  store.push(1, iota_nodes(g.num_nodes), forward_full(p, norm, g.features, false).hidden);
  const auto jac = build_jacobians(p, norm, g.features, std::size_t{1} << 24);

  GradBuffer gradas = GradBuffer::zeros_like(p), truncated = GradBuffer::zeros_like(p);
  GradasSumCheck out;
  auto accumulate = [](DenseMatrix& acc, const DenseMatrix& x) { acc = add(acc, x); };
  for (const auto& bv : build_batches(g, norm, greedy_partition(g, partitions, seed), seed)) {
    out.halo_total += bv.num_halo();
    const auto fwd = forward_batch(p, bv, store, true);
    auto a = backward_batch(p, *fwd.tape, {g.labels, train}, GradMode::gradas, &jac, n_train);
    auto b = backward_batch(p, *fwd.tape, {g.labels, train}, GradMode::truncated, nullptr, n_train);
    zip_tensors(gradas, a.grads, accumulate);
    zip_tensors(truncated, b.grads, accumulate);
  }

  const auto ahat = oracle::norm_adjacency(g);
  const auto x = oracle::from(g.features);
  const auto all = iota_nodes(g.num_nodes);
  const auto reference = oracle::finite_differences(oracle::from(p), [&](const oracle::Params& q) {
    return oracle::batch_loss(q, ahat, x, all, {}, std::nullopt, g.labels, train);
  });
  const auto full = forward_full(p, norm, g.features, true);
  const auto full_grad = backward_batch(p, *full.tape, {g.labels, train}, GradMode::truncated);
  out.vs_library_full = max_rel_err(oracle::flatten(gradas), to_double(oracle::flatten(full_grad.grads)));
  out.vs_oracle = max_rel_err(oracle::flatten(gradas), reference);
  out.truncated_vs_oracle = max_rel_err(oracle::flatten(truncated), reference);
  return out;
}

}  // namespace fixtures
