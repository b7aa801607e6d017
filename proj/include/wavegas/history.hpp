#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "wavegas/error.hpp"
#include "wavegas/graph.hpp"
#include "wavegas/linalg.hpp"

namespace wavegas {

// Historical embeddings, one matrix per layer below the output. Layer 0 is a
// read-only view of the graph's features; the Graph must outlive the store.
class HistoryStore {
 public:
  HistoryStore(const DenseMatrix& features, std::span<const std::size_t> hidden_dims)
      : features_(&features) {
    for (std::size_t d : hidden_dims) hidden_.emplace_back(features.rows(), d);
  }

  std::size_t num_layers() const { return hidden_.size() + 1; }
  std::size_t num_nodes() const { return features_->rows(); }
  std::size_t dim(std::size_t layer) const { return layer_ref(layer).cols(); }

  const DenseMatrix& layer(std::size_t l) const { return layer_ref(l); }

  DenseMatrix pull(std::size_t layer, std::span<const index_t> nodes) const {
    const DenseMatrix& src = layer_ref(layer);
    for (index_t v : nodes)
      detail::require(v < src.rows(), "HistoryStore::pull: node ", v, " out of range ", src.rows());
    return select_rows(src, nodes);
  }

  void push(std::size_t layer, std::span<const index_t> nodes, const DenseMatrix& values) {
    detail::require(layer != 0, "HistoryStore::push: layer 0 holds the input features and is read-only");
    detail::require(layer < num_layers(), "HistoryStore::push: layer ", layer, " >= ", num_layers());
    DenseMatrix& dst = hidden_[layer - 1];
    detail::require(values.rows() == nodes.size() && values.cols() == dst.cols(),
                    "HistoryStore::push: values ", values.rows(), "x", values.cols(), " for ",
                    nodes.size(), " nodes of dim ", dst.cols());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      detail::require(nodes[i] < dst.rows(), "HistoryStore::push: node ", nodes[i], " out of range");
      std::copy_n(values.row(i).begin(), dst.cols(), dst.row(nodes[i]).begin());
    }
  }

  void reset() {
    for (auto& m : hidden_) std::fill(m.values().begin(), m.values().end(), 0.0f);
  }

  // Bytes owned by the store (hidden layers only; layer 0 is borrowed).
  std::size_t resident_bytes() const {
    std::size_t b = 0;
    for (const auto& m : hidden_) b += m.bytes();
    return b;
  }

  // Raw little-endian float32 dump, same layout as features.bin.
  void dump_layer(std::size_t layer, const std::filesystem::path& path) const {
    write_features_bin(layer_ref(layer), path);
  }

 private:
  const DenseMatrix& layer_ref(std::size_t l) const {
    detail::require(l < num_layers(), "HistoryStore: layer ", l, " >= ", num_layers());
    return l == 0 ? *features_ : hidden_[l - 1];
  }

  const DenseMatrix* features_;
  std::vector<DenseMatrix> hidden_;
};

// Per-node jacobians dh_v/dθ of the first hidden layer with respect to
// (W1 row-major, then b1): one dim × num_params matrix per node.
struct JacobianCache {
  std::size_t num_params = 0;
  std::vector<DenseMatrix> per_node;

  const DenseMatrix& at(index_t v) const { return per_node.at(v); }

  std::size_t bytes() const {
    std::size_t b = 0;
    for (const auto& m : per_node) b += m.bytes();
    return b;
  }
};

}  // namespace wavegas
