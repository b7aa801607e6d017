#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "wavegas/error.hpp"

namespace wavegas {

struct PairedValue {
  double a = 0.0;
  double b = 0.0;
};

struct WilcoxonResult {
  std::size_t n = 0;     // pairs left after dropping zero differences
  double w_plus = 0.0;   // sum of ranks of positive differences
  double p_value = 1.0;  // P(W+ >= observed) under H0, alternative "a greater than b"
};

// Average ranks of |d| (1-based), doubled so tied ranks stay integral.
inline std::vector<std::int64_t> doubled_ranks(std::span<const double> abs_diffs) {
  const std::size_t n = abs_diffs.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return abs_diffs[i] < abs_diffs[j]; });
  std::vector<std::int64_t> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && abs_diffs[order[j + 1]] == abs_diffs[order[i]]) ++j;
    // positions i..j share rank ((i+1)+(j+1))/2; doubled: i+j+2
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = static_cast<std::int64_t>(i + j + 2);
    i = j + 1;
  }
  return ranks;
}

// Exact one-sided signed-rank test. The null distribution of W+ is counted
// over all 2^n sign assignments with a subset-sum table on doubled ranks.
inline WilcoxonResult wilcoxon_one_sided(std::span<const PairedValue> pairs) {
  detail::require(!pairs.empty(), "wilcoxon_one_sided: need at least one pair");
  std::vector<double> diffs;
  // Differences are snapped to a 1e-12 grid so that accuracy columns such as
  // 0.815 - 0.810 and 0.820 - 0.815 tie instead of differing in the last ulp.
  for (const auto& p : pairs) {
    const double d = std::round((p.a - p.b) * 1e12) / 1e12;
    if (d != 0.0) diffs.push_back(d);
  }
  WilcoxonResult r;
  r.n = diffs.size();
  if (r.n == 0) return r;
  detail::require(r.n <= 62, "wilcoxon_one_sided: n=", r.n, " too large for exact counting");

  std::vector<double> mags(diffs.size());
  std::transform(diffs.begin(), diffs.end(), mags.begin(), [](double d) { return std::abs(d); });
  const auto ranks = doubled_ranks(mags);

  std::int64_t observed = 0;
  for (std::size_t i = 0; i < diffs.size(); ++i)
    if (diffs[i] > 0) observed += ranks[i];
  r.w_plus = static_cast<double>(observed) / 2.0;

  const std::int64_t total = std::accumulate(ranks.begin(), ranks.end(), std::int64_t{0});
  std::vector<double> count(static_cast<std::size_t>(total) + 1, 0.0);
  count[0] = 1.0;
  for (std::int64_t rk : ranks)
    for (std::int64_t s = total; s >= rk; --s) count[s] += count[s - rk];
  double tail = 0.0;
  for (std::int64_t s = observed; s <= total; ++s) tail += count[s];
  r.p_value = tail / std::ldexp(1.0, static_cast<int>(r.n));
  return r;
}

}  // namespace wavegas
