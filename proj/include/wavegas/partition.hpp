#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "wavegas/error.hpp"
#include "wavegas/graph.hpp"
#include "wavegas/linalg.hpp"

namespace wavegas {

struct PartitionPlan {
  std::size_t num_partitions = 1;
  std::size_t batch_parts = 1;
  std::vector<index_t> assignment;  // node -> partition

  std::vector<std::size_t> sizes() const {
    std::vector<std::size_t> s(num_partitions, 0);
    for (index_t p : assignment) ++s[p];
    return s;
  }

  friend bool operator==(const PartitionPlan&, const PartitionPlan&) = default;
};

// One mini-batch. Local node order is [in_nodes | halo_nodes]; adjacency holds
// the rows of Â for in_nodes with columns remapped into that local order.
struct BatchView {
  std::size_t batch_id = 0;
  std::vector<index_t> in_nodes;
  std::vector<index_t> halo_nodes;
  CsrMatrix adjacency;

  std::size_t num_in() const { return in_nodes.size(); }
  std::size_t num_halo() const { return halo_nodes.size(); }
  std::size_t num_local() const { return in_nodes.size() + halo_nodes.size(); }
};

inline std::size_t edge_cut(const Graph& g, const PartitionPlan& plan) {
  std::size_t cut = 0;
  for (auto [u, v] : edge_list(g))
    if (plan.assignment[u] != plan.assignment[v]) ++cut;
  return cut;
}

// Seeded BFS region growing. Partition p starts from a uniformly drawn
// unassigned node of minimum degree (a cheap stand-in for a peripheral node)
// and grows breadth-first until it holds ceil(remaining / partitions_left)
// nodes or its frontier is exhausted. Nodes left over afterwards join the
// smallest partition they are adjacent to.
inline PartitionPlan greedy_partition(const Graph& g, std::size_t num_partitions, std::uint64_t seed,
                                      std::size_t batch_parts = 1) {
  const std::size_t n = g.num_nodes;
  detail::require(num_partitions >= 1 && num_partitions <= n, "greedy_partition: need 1 <= P <= ", n,
                  ", got P=", num_partitions);
  detail::require(batch_parts >= 1 && batch_parts <= num_partitions,
                  "greedy_partition: need 1 <= batch_parts <= P, got ", batch_parts);
  constexpr index_t unassigned = std::numeric_limits<index_t>::max();

  PartitionPlan plan;
  plan.num_partitions = num_partitions;
  plan.batch_parts = batch_parts;
  plan.assignment.assign(n, unassigned);
  std::vector<std::size_t> sizes(num_partitions, 0);

  std::vector<index_t> pool(n);
  std::iota(pool.begin(), pool.end(), index_t{0});
  std::mt19937_64 rng(seed);
  std::size_t remaining = n;

  for (std::size_t p = 0; p < num_partitions && remaining > 0; ++p) {
    const std::size_t target = (remaining + (num_partitions - p) - 1) / (num_partitions - p);
    // Drop assigned entries lazily, then draw a seed node.
    std::erase_if(pool, [&](index_t v) { return plan.assignment[v] != unassigned; });
    std::size_t min_deg = std::numeric_limits<std::size_t>::max();
    for (index_t v : pool) min_deg = std::min(min_deg, g.degree(v));
    std::vector<index_t> candidates;
    for (index_t v : pool)
      if (g.degree(v) == min_deg) candidates.push_back(v);
    std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
    const index_t start = candidates[pick(rng)];

    std::deque<index_t> frontier{start};
    plan.assignment[start] = static_cast<index_t>(p);
    sizes[p] = 1;
    --remaining;
    while (!frontier.empty() && sizes[p] < target) {
      const index_t u = frontier.front();
      frontier.pop_front();
      for (index_t w : g.neighbors(u)) {
        if (plan.assignment[w] != unassigned) continue;
        plan.assignment[w] = static_cast<index_t>(p);
        ++sizes[p];
        --remaining;
        frontier.push_back(w);
        if (sizes[p] == target) break;
      }
    }
  }

  while (remaining > 0) {
    bool progress = false;
    for (index_t v = 0; v < n; ++v) {
      if (plan.assignment[v] != unassigned) continue;
      index_t best = unassigned;
      for (index_t w : g.neighbors(v)) {
        const index_t q = plan.assignment[w];
        if (q != unassigned && (best == unassigned || sizes[q] < sizes[best])) best = q;
      }
      if (best == unassigned) continue;
      plan.assignment[v] = best;
      ++sizes[best];
      --remaining;
      progress = true;
    }
    if (!progress) {
      // Isolated leftovers: first one goes to the globally smallest partition.
      const index_t v = static_cast<index_t>(
          std::find(plan.assignment.begin(), plan.assignment.end(), unassigned) -
          plan.assignment.begin());
      const auto q = static_cast<index_t>(std::min_element(sizes.begin(), sizes.end()) - sizes.begin());
      plan.assignment[v] = q;
      ++sizes[q];
      --remaining;
    }
  }
  return plan;
}

// Plan with a caller-provided assignment (tests, externally computed partitions).
inline PartitionPlan plan_from_assignment(std::vector<index_t> assignment, std::size_t num_partitions,
                                          std::size_t batch_parts) {
  for (index_t p : assignment)
    detail::require(p < num_partitions, "plan_from_assignment: partition ", p, " >= ", num_partitions);
  detail::require(batch_parts >= 1 && batch_parts <= num_partitions,
                  "plan_from_assignment: need 1 <= batch_parts <= P");
  return {num_partitions, batch_parts, std::move(assignment)};
}

inline BatchView make_batch_view(const NormAdjacency& norm, std::vector<index_t> in_nodes,
                                 std::size_t batch_id = 0) {
  const auto& a = norm.matrix;
  std::sort(in_nodes.begin(), in_nodes.end());
  constexpr index_t none = std::numeric_limits<index_t>::max();
  std::vector<index_t> local(a.rows, none);
  for (std::size_t i = 0; i < in_nodes.size(); ++i) local[in_nodes[i]] = static_cast<index_t>(i);

  std::vector<index_t> halo;
  for (index_t v : in_nodes)
    for (std::size_t k = a.row_begin(v); k < a.row_end(v); ++k)
      if (local[a.col_idx[k]] == none) halo.push_back(a.col_idx[k]);
  std::sort(halo.begin(), halo.end());
  halo.erase(std::unique(halo.begin(), halo.end()), halo.end());
  for (std::size_t i = 0; i < halo.size(); ++i)
    local[halo[i]] = static_cast<index_t>(in_nodes.size() + i);

  BatchView bv;
  bv.batch_id = batch_id;
  bv.adjacency.rows = in_nodes.size();
  bv.adjacency.cols = in_nodes.size() + halo.size();
  bv.adjacency.row_ptr.assign(in_nodes.size() + 1, 0);
  std::vector<std::pair<index_t, float>> row;
  for (std::size_t i = 0; i < in_nodes.size(); ++i) {
    const index_t v = in_nodes[i];
    row.clear();
    for (std::size_t k = a.row_begin(v); k < a.row_end(v); ++k)
      row.emplace_back(local[a.col_idx[k]], a.values[k]);
    std::sort(row.begin(), row.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
    for (auto [c, w] : row) {
      bv.adjacency.col_idx.push_back(c);
      bv.adjacency.values.push_back(w);
    }
    bv.adjacency.row_ptr[i + 1] = bv.adjacency.col_idx.size();
  }
  bv.in_nodes = std::move(in_nodes);
  bv.halo_nodes = std::move(halo);
  return bv;
}

// Shuffles partitions with epoch_seed, then groups batch_parts of them per batch.
inline std::vector<BatchView> build_batches(const Graph& g, const NormAdjacency& norm,
                                            const PartitionPlan& plan, std::uint64_t epoch_seed) {
  detail::require(plan.assignment.size() == g.num_nodes, "build_batches: plan covers ",
                  plan.assignment.size(), " nodes, graph has ", g.num_nodes);
  std::vector<std::vector<index_t>> members(plan.num_partitions);
  for (index_t v = 0; v < g.num_nodes; ++v) members[plan.assignment[v]].push_back(v);

  std::vector<std::size_t> order(plan.num_partitions);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(epoch_seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<BatchView> batches;
  for (std::size_t start = 0; start < order.size(); start += plan.batch_parts) {
    std::vector<index_t> nodes;
    for (std::size_t i = start; i < std::min(order.size(), start + plan.batch_parts); ++i)
      nodes.insert(nodes.end(), members[order[i]].begin(), members[order[i]].end());
    if (nodes.empty()) continue;
    batches.push_back(make_batch_view(norm, std::move(nodes), batches.size()));
  }
  return batches;
}

}  // namespace wavegas
