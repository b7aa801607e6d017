#include <gtest/gtest.h>

#include "oracle.hpp"
#include "wavegas/partition.hpp"
#include "wavegas/staleness.hpp"

using namespace wavegas;

namespace {

struct Fixture {
  Graph g = synth_sbm({4, 25, 0.3, 0.05, 6, 4, 1.0}, 3);
  NormAdjacency norm = gcn_normalize(g);
  ModelParams p = init_params(6, 8, 4, 5);
};

}  // namespace

TEST(Staleness, ZeroHistoryReportsActivationNorms) {
  Fixture f;
  for (float& v : f.p.b1.values()) v = 0.1f;
  HistoryStore store = init_history(f.p, f.g);
  const auto rep = measure_staleness(f.p, f.g, f.norm, store);
  ASSERT_EQ(rep.layers.size(), 2u);
  EXPECT_EQ(rep.layers[0].max, 0.0);
  EXPECT_EQ(rep.layers[0].mean, 0.0);

  const auto h = oracle::hidden(oracle::from(f.p), oracle::norm_adjacency(f.g), oracle::from(f.g.features));
  double max_norm = 0.0, sum = 0.0;
  for (const auto& row : h) {
    double sq = 0.0;
    for (double v : row) sq += v * v;
    max_norm = std::max(max_norm, std::sqrt(sq));
    sum += std::sqrt(sq);
  }
  EXPECT_NEAR(rep.layers[1].max, max_norm, 1e-5);
  EXPECT_NEAR(rep.layers[1].mean, sum / static_cast<double>(h.size()), 1e-5);
  EXPECT_EQ(rep.max_per_layer(), (std::vector<double>{0.0, rep.layers[1].max}));
}

TEST(Staleness, RefreshedStoreIsFresh) {
  Fixture f;
  HistoryStore store = init_history(f.p, f.g);
  // L = 2 sweeps over the batches at frozen parameters.
  const auto batches = build_batches(f.g, f.norm, greedy_partition(f.g, 8, 1, 2), 4);
  for (int s = 0; s < 2; ++s)
    for (const auto& bv : batches) forward_batch(f.p, bv, store, false);
  const auto rep = measure_staleness(f.p, f.g, f.norm, store);
  for (const auto& l : rep.layers) {
    EXPECT_LE(l.max, 1e-5);
    EXPECT_GE(l.mean, 0.0);
  }
}

TEST(Staleness, StaleAfterParameterChange) {
  Fixture f;
  HistoryStore store = init_history(f.p, f.g);
  for (const auto& bv : build_batches(f.g, f.norm, greedy_partition(f.g, 8, 1), 0))
    forward_batch(f.p, bv, store, false);
  auto moved = f.p;
  for (float& v : moved.w1.values()) v *= 1.5f;
  EXPECT_GT(measure_staleness(moved, f.g, f.norm, store).layers[1].max, 1e-3);
}

TEST(Staleness, RowDistanceStats) {
  const auto a = DenseMatrix::from_rows({{3, 4}, {0, 0}});
  const auto b = DenseMatrix::from_rows({{0, 0}, {0, 1}});
  const auto s = row_distance_stats(a, b);
  EXPECT_DOUBLE_EQ(s.max, 5.0);
  EXPECT_DOUBLE_EQ(s.mean, 3.0);
  EXPECT_EQ(row_distance_stats(DenseMatrix(0, 2), DenseMatrix(0, 2)).max, 0.0);
}

TEST(Staleness, MismatchedStoreThrows) {
  Fixture f;
  const auto other = synth_sbm({2, 5, 0.3, 0.05, 6, 2, 1.0}, 3);
  HistoryStore store = init_history(f.p, other);
  EXPECT_THROW(measure_staleness(f.p, f.g, f.norm, store), ConfigError);
}
