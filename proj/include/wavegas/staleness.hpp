#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "wavegas/graph.hpp"
#include "wavegas/history.hpp"
#include "wavegas/model.hpp"

namespace wavegas {

struct LayerStaleness {
  double max = 0.0;
  double mean = 0.0;
};

// Per stored layer: max and mean over nodes of ‖h̄_v − ĥ_v‖₂, where ĥ is the
// full-graph activation at the given (frozen) parameters.
struct StalenessReport {
  std::vector<LayerStaleness> layers;

  std::vector<double> max_per_layer() const {
    std::vector<double> out;
    for (const auto& l : layers) out.push_back(l.max);
    return out;
  }
};

inline LayerStaleness row_distance_stats(const DenseMatrix& a, const DenseMatrix& b) {
  LayerStaleness s;
  if (a.rows() == 0) return s;
  double total = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double sq = 0.0;
    const auto ra = a.row(i);
    const auto rb = b.row(i);
    for (std::size_t j = 0; j < ra.size(); ++j) {
      const double d = static_cast<double>(ra[j]) - rb[j];
      sq += d * d;
    }
    const double dist = std::sqrt(sq);
    s.max = std::max(s.max, dist);
    total += dist;
  }
  s.mean = total / static_cast<double>(a.rows());
  return s;
}

inline StalenessReport measure_staleness(const ModelParams& params, const Graph& g,
                                         const NormAdjacency& norm, const HistoryStore& store) {
  detail::require(store.num_nodes() == g.num_nodes && store.num_layers() == 2,
                  "measure_staleness: store not dimensioned for this graph/model");
  const auto fresh = forward_full(params, norm, g.features, false);
  StalenessReport r;
  r.layers.push_back({});  // layer 0 aliases the features
  r.layers.push_back(row_distance_stats(store.layer(1), fresh.hidden));
  return r;
}

}  // namespace wavegas
