#include "polos/kendall.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <fmt/format.h>

#include "polos/error.hpp"

namespace polos {

namespace {

// Number of pairs inside runs of equal values in a sorted sequence.
template <typename It, typename Eq>
std::int64_t tied_pairs(It first, It last, Eq eq, std::int64_t* distinct) {
  std::int64_t ties = 0;
  std::int64_t groups = 0;
  while (first != last) {
    auto run_end = std::next(first);
    while (run_end != last && eq(*first, *run_end)) ++run_end;
    const auto len = static_cast<std::int64_t>(std::distance(first, run_end));
    ties += len * (len - 1) / 2;
    ++groups;
    first = run_end;
  }
  if (distinct != nullptr) *distinct = groups;
  return ties;
}

// Sorts v ascending and returns the number of inversions (strictly greater
// element before a smaller one).
std::int64_t merge_count(std::vector<double>& v, std::vector<double>& scratch, std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::int64_t swaps = merge_count(v, scratch, lo, mid) + merge_count(v, scratch, mid, hi);
  std::size_t i = lo;
  std::size_t j = mid;
  std::size_t k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      swaps += static_cast<std::int64_t>(mid - i);
      scratch[k++] = v[j++];
    } else {
      scratch[k++] = v[i++];
    }
  }
  while (i < mid) scratch[k++] = v[i++];
  while (j < hi) scratch[k++] = v[j++];
  std::copy(scratch.begin() + static_cast<std::ptrdiff_t>(lo), scratch.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return swaps;
}

}  // namespace

PairCounts count_pairs(std::span<const ScoredPair> pairs) {
  for (const auto& p : pairs) {
    if (!std::isfinite(p.metric_score) || !std::isfinite(p.human_score)) {
      throw DataError("kendall: non-finite score");
    }
  }
  std::vector<ScoredPair> sorted(pairs.begin(), pairs.end());
  std::sort(sorted.begin(), sorted.end(), [](const ScoredPair& a, const ScoredPair& b) {
    return a.metric_score < b.metric_score || (a.metric_score == b.metric_score && a.human_score < b.human_score);
  });

  PairCounts c;
  c.n = static_cast<std::int64_t>(sorted.size());
  const std::int64_t x_ties = tied_pairs(
      sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.metric_score == b.metric_score; },
      &c.distinct_metric);
  c.tied_both = tied_pairs(
      sorted.begin(), sorted.end(),
      [](const auto& a, const auto& b) { return a.metric_score == b.metric_score && a.human_score == b.human_score; },
      nullptr);

  // With ties in x broken by ascending y, every inversion in y is a
  // discordant pair.
  std::vector<double> ys(sorted.size());
  std::transform(sorted.begin(), sorted.end(), ys.begin(), [](const ScoredPair& p) { return p.human_score; });
  std::vector<double> scratch(ys.size());
  c.discordant = merge_count(ys, scratch, 0, ys.size());

  const std::int64_t y_ties = tied_pairs(
      ys.begin(), ys.end(), [](double a, double b) { return a == b; }, &c.distinct_human);

  c.tied_metric_only = x_ties - c.tied_both;
  c.tied_human_only = y_ties - c.tied_both;
  c.concordant = c.total_pairs() - x_ties - y_ties + c.tied_both - c.discordant;
  return c;
}

double kendall_tau_b(const PairCounts& c) {
  const std::int64_t untied = c.concordant + c.discordant;
  const auto dx = static_cast<double>(untied + c.tied_metric_only);
  const auto dy = static_cast<double>(untied + c.tied_human_only);
  if (c.n < 2 || dx == 0.0 || dy == 0.0) {
    throw DegenerateStatistic(fmt::format("tau-b undefined for n = {} with all scores tied on an axis", c.n));
  }
  return static_cast<double>(c.concordant - c.discordant) / std::sqrt(dx * dy);
}

double kendall_tau_c(const PairCounts& c) {
  const std::int64_t m = std::min(c.distinct_metric, c.distinct_human);
  if (c.n < 2 || m < 2) {
    throw DegenerateStatistic(fmt::format("tau-c undefined: m = {} distinct values (need at least 2)", m));
  }
  const auto n = static_cast<double>(c.n);
  const auto md = static_cast<double>(m);
  return 2.0 * md * static_cast<double>(c.concordant - c.discordant) / (n * n * (md - 1.0));
}

double kendall_tau_b(std::span<const ScoredPair> pairs) { return kendall_tau_b(count_pairs(pairs)); }

double kendall_tau_c(std::span<const ScoredPair> pairs) { return kendall_tau_c(count_pairs(pairs)); }

}  // namespace polos
