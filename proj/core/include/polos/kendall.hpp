#pragma once

#include <cstdint>
#include <span>

namespace polos {

struct ScoredPair {
  double metric_score = 0.0;
  double human_score = 0.0;
};

/// Classification of all n(n-1)/2 unordered index pairs.
struct PairCounts {
  std::int64_t n = 0;
  std::int64_t concordant = 0;
  std::int64_t discordant = 0;
  std::int64_t tied_metric_only = 0;
  std::int64_t tied_human_only = 0;
  std::int64_t tied_both = 0;
  std::int64_t distinct_metric = 0;
  std::int64_t distinct_human = 0;

  [[nodiscard]] std::int64_t total_pairs() const { return n * (n - 1) / 2; }
};

/// O(n log n) pair classification (sort plus merge-sort inversion count).
PairCounts count_pairs(std::span<const ScoredPair> pairs);

/// (C - D) / sqrt((C + D + Tx)(C + D + Ty)).
/// Throws DegenerateStatistic for n < 2 or when either axis is fully tied.
double kendall_tau_b(std::span<const ScoredPair> pairs);
double kendall_tau_b(const PairCounts& counts);

/// 2m(C - D) / (n^2 (m - 1)), m = min(distinct metric, distinct human).
/// Throws DegenerateStatistic when m < 2.
double kendall_tau_c(std::span<const ScoredPair> pairs);
double kendall_tau_c(const PairCounts& counts);

}  // namespace polos
