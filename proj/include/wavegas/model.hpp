#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "wavegas/error.hpp"
#include "wavegas/graph.hpp"
#include "wavegas/history.hpp"
#include "wavegas/linalg.hpp"
#include "wavegas/partition.hpp"

namespace wavegas {

// Two-layer GCN: logits = Â·(dropout(relu(Â·X·W1 + b1)))·W2 + b2.
// With residual set, the (dropped-out) hidden activation of each node is added
// to its own logits, which requires hidden == classes.
struct ModelParams {
  DenseMatrix w1;  // F×H
  DenseMatrix b1;  // 1×H
  DenseMatrix w2;  // H×C
  DenseMatrix b2;  // 1×C
  bool residual = false;

  std::size_t in_dim() const { return w1.rows(); }
  std::size_t hidden() const { return w1.cols(); }
  std::size_t classes() const { return w2.cols(); }
  std::size_t layer1_params() const { return w1.size() + b1.size(); }
  std::size_t num_params() const { return w1.size() + b1.size() + w2.size() + b2.size(); }

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

struct GradBuffer {
  DenseMatrix w1, b1, w2, b2;

  static GradBuffer zeros_like(const ModelParams& p) {
    return {DenseMatrix(p.w1.rows(), p.w1.cols()), DenseMatrix(1, p.b1.cols()),
            DenseMatrix(p.w2.rows(), p.w2.cols()), DenseMatrix(1, p.b2.cols())};
  }

  bool all_finite() const {
    return w1.all_finite() && b1.all_finite() && w2.all_finite() && b2.all_finite();
  }

  friend bool operator==(const GradBuffer&, const GradBuffer&) = default;
};

// Applies f to corresponding tensors of two parameter-shaped structs.
template <typename A, typename B, typename F>
void zip_tensors(A& a, B& b, F&& f) {
  f(a.w1, b.w1);
  f(a.b1, b.b1);
  f(a.w2, b.w2);
  f(a.b2, b.b2);
}

// Glorot-uniform weights, zero biases.
inline ModelParams init_params(std::size_t in_dim, std::size_t hidden, std::size_t classes,
                               std::uint64_t seed, bool residual = false) {
  detail::require(in_dim > 0 && hidden > 0 && classes > 0, "init_params: zero dimension");
  detail::require(!residual || hidden == classes, "init_params: residual mode needs hidden (", hidden,
                  ") == classes (", classes, ")");
  std::mt19937_64 rng(seed);
  auto glorot = [&](std::size_t fan_in, std::size_t fan_out) {
    const float limit = std::sqrt(6.0f / static_cast<float>(fan_in + fan_out));
    std::uniform_real_distribution<float> u(-limit, limit);
    DenseMatrix w(fan_in, fan_out);
    for (float& v : w.values()) v = u(rng);
    return w;
  };
  ModelParams p;
  p.w1 = glorot(in_dim, hidden);
  p.b1 = DenseMatrix(1, hidden);
  p.w2 = glorot(hidden, classes);
  p.b2 = DenseMatrix(1, classes);
  p.residual = residual;
  return p;
}

inline HistoryStore init_history(const ModelParams& params, const Graph& g) {
  detail::require(params.in_dim() == g.num_features(), "init_history: model expects ",
                  params.in_dim(), " features, graph has ", g.num_features());
  const std::size_t dims[] = {params.hidden()};
  return HistoryStore(g.features, dims);
}

// ---------------------------------------------------------------------------
// Dropout
// ---------------------------------------------------------------------------

// Counter-based: the mask of (node, unit) depends only on the key, so the
// same step sees the same mask whether it runs full-graph or as one batch.
struct DropoutKey {
  float rate = 0.0f;        // hidden layer
  float input_rate = 0.0f;  // input features
  std::uint64_t seed = 0;
  std::uint64_t epoch = 0;
  std::uint64_t batch = 0;

  bool active() const { return rate > 0.0f; }
};

enum class DropoutSite : std::uint64_t { hidden = 1, input = 2 };

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline float dropout_uniform(const DropoutKey& k, DropoutSite site, index_t node, std::size_t unit) {
  std::uint64_t h = splitmix64(k.seed ^ 0xd1b54a32d192ed03ull);
  h = splitmix64(h ^ static_cast<std::uint64_t>(site));
  h = splitmix64(h ^ k.epoch);
  h = splitmix64(h ^ k.batch);
  h = splitmix64(h ^ node);
  h = splitmix64(h ^ unit);
  return static_cast<float>(h >> 40) * 0x1.0p-24f;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Forward
// ---------------------------------------------------------------------------

struct ForwardTape {
  const CsrMatrix* adjacency = nullptr;  // borrowed from the BatchView / NormAdjacency
  std::vector<index_t> in_nodes;
  std::vector<index_t> halo_nodes;
  DenseMatrix layer0_input;   // features of [in | halo], after input dropout
  DenseMatrix pre1;           // |in|×H pre-activation
  DenseMatrix layer1_input;   // [relu(pre1) | pulled halo history], before dropout
  DenseMatrix dropout_scale;  // same shape as layer1_input, empty when dropout is off
  DenseMatrix layer1_dropped;
  DenseMatrix logits;
};

struct ForwardResult {
  DenseMatrix logits;  // rows follow in_nodes
  DenseMatrix hidden;  // relu(pre1) for in_nodes, what gets pushed to history
  std::optional<ForwardTape> tape;
};

namespace detail {

inline ForwardResult forward_local(const ModelParams& p, const CsrMatrix& adj, DenseMatrix x_local,
                                   const DenseMatrix& halo_hidden, std::vector<index_t> in_nodes,
                                   std::vector<index_t> halo_nodes, bool track,
                                   const DropoutKey& drop) {
  require(x_local.cols() == p.in_dim(), "forward: features have ", x_local.cols(),
          " columns, model expects ", p.in_dim());
  require(adj.cols == x_local.rows() && adj.rows == in_nodes.size(),
          "forward: adjacency ", adj.rows, "x", adj.cols, " vs ", in_nodes.size(), " in-nodes / ",
          x_local.rows(), " local rows");

  auto node_at = [&](std::size_t i) {
    return i < in_nodes.size() ? in_nodes[i] : halo_nodes[i - in_nodes.size()];
  };
  if (drop.input_rate > 0.0f) {
    const float keep = 1.0f / (1.0f - drop.input_rate);
    for (std::size_t i = 0; i < x_local.rows(); ++i) {
      auto r = x_local.row(i);
      for (std::size_t j = 0; j < r.size(); ++j)
        if (r[j] != 0.0f)
          r[j] = dropout_uniform(drop, DropoutSite::input, node_at(i), j) < drop.input_rate ? 0.0f
                                                                                           : r[j] * keep;
    }
  }
  DenseMatrix pre1 = add_row_vector(spmm(adj, matmul(x_local, p.w1)), p.b1);
  DenseMatrix hidden = relu(pre1);
  DenseMatrix layer1 = vstack(hidden, halo_hidden);

  DenseMatrix scale;
  DenseMatrix dropped;
  if (drop.active()) {
    scale = DenseMatrix(layer1.rows(), layer1.cols());
    const float keep = 1.0f / (1.0f - drop.rate);
    for (std::size_t i = 0; i < layer1.rows(); ++i) {
      for (std::size_t j = 0; j < layer1.cols(); ++j)
        scale(i, j) = dropout_uniform(drop, DropoutSite::hidden, node_at(i), j) < drop.rate ? 0.0f : keep;
    }
    dropped = hadamard(layer1, scale);
  } else {
    dropped = layer1;
  }

  DenseMatrix logits = add_row_vector(spmm(adj, matmul(dropped, p.w2)), p.b2);
  if (p.residual)
    for (std::size_t i = 0; i < logits.rows(); ++i)
      for (std::size_t j = 0; j < logits.cols(); ++j) logits(i, j) += dropped(i, j);

  ForwardResult r;
  r.logits = logits;
  r.hidden = hidden;
  if (track) {
    ForwardTape t;
    t.adjacency = &adj;
    t.in_nodes = std::move(in_nodes);
    t.halo_nodes = std::move(halo_nodes);
    t.layer0_input = std::move(x_local);
    t.pre1 = std::move(pre1);
    t.layer1_input = std::move(layer1);
    t.dropout_scale = std::move(scale);
    t.layer1_dropped = std::move(dropped);
    t.logits = std::move(logits);
    r.tape = std::move(t);
  }
  return r;
}

}  // namespace detail

// Full-graph forward. x must be num_nodes × F; the tape borrows norm.
inline ForwardResult forward_full(const ModelParams& p, const NormAdjacency& norm, const DenseMatrix& x,
                                  bool track, const DropoutKey& drop = {}) {
  std::vector<index_t> all(x.rows());
  for (index_t v = 0; v < all.size(); ++v) all[v] = v;
  return detail::forward_local(p, norm.matrix, x, DenseMatrix(0, p.hidden()), std::move(all), {},
                               track, drop);
}

// The tape borrows the adjacency, so a temporary NormAdjacency would dangle.
ForwardResult forward_full(const ModelParams&, NormAdjacency&&, const DenseMatrix&, bool,
                           const DropoutKey& = {}) = delete;

// Mini-batch forward against historical embeddings: halo features come from
// layer 0 (exact), halo hidden activations are pulled from layer 1, and the
// freshly computed in-batch hidden activations are pushed back.
inline ForwardResult forward_batch(const ModelParams& p, const BatchView& bv, HistoryStore& store,
                                   bool track, const DropoutKey& drop = {}) {
  detail::require(store.num_layers() == 2 && store.dim(1) == p.hidden(),
                  "forward_batch: history layout does not match the model");
  std::vector<index_t> local = bv.in_nodes;
  local.insert(local.end(), bv.halo_nodes.begin(), bv.halo_nodes.end());
  DenseMatrix x_local = store.pull(0, local);
  DenseMatrix halo_hidden = store.pull(1, bv.halo_nodes);
  auto r = detail::forward_local(p, bv.adjacency, std::move(x_local), halo_hidden, bv.in_nodes,
                                 bv.halo_nodes, track, drop);
  store.push(1, bv.in_nodes, r.hidden);
  return r;
}

// ---------------------------------------------------------------------------
// Backward
// ---------------------------------------------------------------------------

enum class GradMode {
  truncated,  // pulled history rows are constants
  gradas,     // add dL/dh̄_w · dh_w/dθ for every halo node w
};

// Which nodes contribute to the loss, indexed by global node id.
struct LossTarget {
  std::span<const std::int32_t> labels;
  std::span<const char> in_loss;
};

struct BackwardResult {
  GradBuffer grads;
  double loss = 0.0;
  std::size_t count = 0;  // loss nodes in this batch
};

// Softmax cross-entropy summed over the batch's loss nodes and divided by
// `normalizer` (0 means: by the number of loss nodes in the batch).
inline BackwardResult backward_batch(const ModelParams& p, const ForwardTape& tape,
                                     const LossTarget& target, GradMode mode,
                                     const JacobianCache* jac = nullptr, double normalizer = 0.0) {
  detail::require(tape.adjacency != nullptr, "backward_batch: tape has no adjacency");
  detail::require(mode != GradMode::gradas || jac != nullptr,
                  "backward_batch: gradas mode requires a JacobianCache");
  const std::size_t n_in = tape.in_nodes.size();
  const std::size_t classes = p.classes();

  BackwardResult out;
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < n_in; ++i)
    if (target.in_loss[tape.in_nodes[i]]) rows.push_back(i);
  out.count = rows.size();
  const double norm = normalizer > 0.0 ? normalizer : static_cast<double>(rows.size());

  DenseMatrix d_logits(n_in, classes);
  double loss = 0.0;
  for (std::size_t i : rows) {
    const auto z = tape.logits.row(i);
    const std::int32_t y = target.labels[tape.in_nodes[i]];
    double mx = z[0];
    for (float v : z) mx = std::max(mx, static_cast<double>(v));
    double sum = 0.0;
    for (float v : z) sum += std::exp(v - mx);
    const double lse = mx + std::log(sum);
    loss += lse - z[y];
    for (std::size_t j = 0; j < classes; ++j) {
      const double prob = std::exp(z[j] - lse);
      d_logits(i, j) = static_cast<float>((prob - (static_cast<std::int32_t>(j) == y ? 1.0 : 0.0)) / norm);
    }
  }
  out.loss = rows.empty() ? 0.0 : loss / norm;

  const CsrMatrix& adj = *tape.adjacency;
  GradBuffer& g = out.grads;
  g.b2 = column_sums(d_logits);
  DenseMatrix d_hw = spmm_transposed(adj, d_logits);  // local×C
  g.w2 = matmul_tn(tape.layer1_dropped, d_hw);
  DenseMatrix d_dropped = matmul_nt(d_hw, p.w2);  // local×H
  if (p.residual)
    for (std::size_t i = 0; i < n_in; ++i)
      for (std::size_t j = 0; j < classes; ++j) d_dropped(i, j) += d_logits(i, j);
  DenseMatrix d_layer1 =
      tape.dropout_scale.empty() ? std::move(d_dropped) : hadamard(d_dropped, tape.dropout_scale);

  DenseMatrix d_hidden(n_in, p.hidden());
  std::copy_n(d_layer1.values().begin(), d_hidden.size(), d_hidden.values().begin());
  DenseMatrix d_pre1 = relu_backward(d_hidden, tape.pre1);
  g.b1 = column_sums(d_pre1);
  g.w1 = matmul_tn(tape.layer0_input, spmm_transposed(adj, d_pre1));

  if (mode == GradMode::gradas && !tape.halo_nodes.empty()) {
    const std::size_t hdim = p.hidden();
    const std::size_t w1_size = p.w1.size();
    detail::require(jac->num_params == p.layer1_params(), "backward_batch: jacobian cache has ",
                    jac->num_params, " columns, model layer 1 has ", p.layer1_params());
    std::vector<double> acc(p.layer1_params(), 0.0);
    for (std::size_t k = 0; k < tape.halo_nodes.size(); ++k) {
      const auto gw = d_layer1.row(n_in + k);
      const DenseMatrix& jw = jac->at(tape.halo_nodes[k]);
      detail::require(jw.rows() == hdim, "backward_batch: jacobian row count mismatch");
      for (std::size_t j = 0; j < hdim; ++j) {
        if (gw[j] == 0.0f) continue;
        const double s = gw[j];
        const auto jr = jw.row(j);
        for (std::size_t q = 0; q < jr.size(); ++q)
          if (jr[q] != 0.0f) acc[q] += s * jr[q];
      }
    }
    for (std::size_t q = 0; q < w1_size; ++q)
      g.w1.values()[q] = static_cast<float>(g.w1.values()[q] + acc[q]);
    for (std::size_t q = 0; q < hdim; ++q)
      g.b1.values()[q] = static_cast<float>(g.b1.values()[q] + acc[w1_size + q]);
  }
  return out;
}

// dh_v/d(W1, b1) for every node at the current parameters. Refuses when
// num_nodes × num_params exceeds `budget`.
inline JacobianCache build_jacobians(const ModelParams& p, const NormAdjacency& norm,
                                     const DenseMatrix& x, std::size_t budget) {
  const std::size_t n = x.rows();
  const std::size_t demand = n * p.num_params();
  if (demand > budget)
    detail::fail("jacobian cache needs num_nodes x num_params = ", n, " x ", p.num_params(), " = ",
                 demand, ", above the configured budget of ", budget);
  const std::size_t hdim = p.hidden();
  const std::size_t f = p.in_dim();
  const DenseMatrix agg = spmm(norm.matrix, x);
  const DenseMatrix pre1 = add_row_vector(spmm(norm.matrix, matmul(x, p.w1)), p.b1);

  JacobianCache cache;
  cache.num_params = p.layer1_params();
  cache.per_node.reserve(n);
  for (std::size_t v = 0; v < n; ++v) {
    DenseMatrix j(hdim, cache.num_params);
    for (std::size_t u = 0; u < hdim; ++u) {
      if (!(pre1(v, u) > 0.0f)) continue;
      for (std::size_t k = 0; k < f; ++k) j(u, k * hdim + u) = agg(v, k);
      j(u, f * hdim + u) = 1.0f;
    }
    cache.per_node.push_back(std::move(j));
  }
  return cache;
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

enum class DecayMode {
  decoupled,  // p -= lr·wd·p, separate from the adaptive step
  l2,         // wd·p added to the gradient
};

struct AdamConfig {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // applied to W1 only
  DecayMode decay_mode = DecayMode::decoupled;
};

struct AdamState {
  GradBuffer m;
  GradBuffer v;
  std::uint64_t step = 0;

  static AdamState for_params(const ModelParams& p) {
    return {GradBuffer::zeros_like(p), GradBuffer::zeros_like(p), 0};
  }
};

inline void adam_step(ModelParams& params, const GradBuffer& grads, AdamState& state,
                      const AdamConfig& cfg) {
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  auto update = [&](DenseMatrix& w, const DenseMatrix& g, DenseMatrix& m, DenseMatrix& v, double wd) {
    detail::require(w.rows() == g.rows() && w.cols() == g.cols(), "adam_step: shape mismatch");
    for (std::size_t i = 0; i < w.size(); ++i) {
      double p = w.values()[i];
      double gi = g.values()[i];
      if (wd > 0.0) {
        if (cfg.decay_mode == DecayMode::l2) gi += wd * p;
        else p -= cfg.lr * wd * p;
      }
      const double mi = cfg.beta1 * m.values()[i] + (1.0 - cfg.beta1) * gi;
      const double vi = cfg.beta2 * v.values()[i] + (1.0 - cfg.beta2) * gi * gi;
      m.values()[i] = static_cast<float>(mi);
      v.values()[i] = static_cast<float>(vi);
      p -= cfg.lr * (mi / c1) / (std::sqrt(vi / c2) + cfg.eps);
      w.values()[i] = static_cast<float>(p);
    }
  };
  update(params.w1, grads.w1, state.m.w1, state.v.w1, cfg.weight_decay);
  update(params.b1, grads.b1, state.m.b1, state.v.b1, 0.0);
  update(params.w2, grads.w2, state.m.w2, state.v.w2, 0.0);
  update(params.b2, grads.b2, state.m.b2, state.v.b2, 0.0);
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

// logits rows indexed by global node id.
inline double accuracy(const DenseMatrix& logits, std::span<const std::int32_t> labels,
                       std::span<const index_t> nodes) {
  if (nodes.empty()) return 0.0;
  std::size_t hit = 0;
  for (index_t v : nodes) {
    const auto r = logits.row(v);
    const auto arg = static_cast<std::int32_t>(std::max_element(r.begin(), r.end()) - r.begin());
    hit += arg == labels[v];
  }
  return static_cast<double>(hit) / static_cast<double>(nodes.size());
}

}  // namespace wavegas
