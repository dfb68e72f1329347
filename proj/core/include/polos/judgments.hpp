#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "polos/embed_io.hpp"

namespace polos {

struct JudgmentRecord {
  std::string sample_id;
  std::string evaluator_id;
  int rating = 0;                       // 1..5
  std::optional<double> response_time;  // seconds

  friend bool operator==(const JudgmentRecord&, const JudgmentRecord&) = default;
};

struct EvaluatorProfile {
  std::string evaluator_id;
  std::size_t judgment_count = 0;
  std::optional<double> median_response_time;
  std::size_t distinct_ratings = 0;
  std::size_t longest_constant_run = 0;  // in input order
  std::vector<std::string> reasons;      // non-empty for excluded evaluators
};

struct FilterThresholds {
  double min_median_response_time = 2.0;
  std::size_t max_constant_run = 20;
  std::size_t min_distinct_ratings = 2;
  std::size_t diversity_min_judgments = 10;  // distinct-rating rule applies from this count on
};

struct FilterResult {
  std::vector<JudgmentRecord> kept;
  std::vector<EvaluatorProfile> excluded;
};

/// Min-max map of the five-point scale: (rating - 1) / 4.
double normalize_rating(int rating);

/// Per-evaluator statistics over `records` (ordered by first appearance).
std::vector<EvaluatorProfile> profile_evaluators(std::span<const JudgmentRecord> records);

/// Drops every record of an evaluator whose median response time is below
/// the threshold ("response time"), who has a run of identical ratings at
/// least max_constant_run long ("constant ratings"), or who uses fewer than
/// min_distinct_ratings values over at least diversity_min_judgments
/// judgments ("low rating diversity").
FilterResult filter_evaluators(std::span<const JudgmentRecord> records, const FilterThresholds& thresholds = {});

enum class Reduction { mean, median };

struct AggregatedScore {
  std::string sample_id;
  double score = 0.0;
  std::size_t evaluator_count = 0;

  friend bool operator==(const AggregatedScore&, const AggregatedScore&) = default;
};

struct AggregationResult {
  std::vector<AggregatedScore> scores;       // sorted by sample_id
  std::vector<std::string> missing_samples;  // expected ids with no surviving record
};

/// Reduces normalized ratings per sample. Ids listed in `expected` that have
/// no record are reported in missing_samples.
AggregationResult aggregate_judgments(std::span<const JudgmentRecord> records,
                                      std::span<const std::string> expected = {},
                                      Reduction reduction = Reduction::mean);

struct SplitRatios {
  double train = 0.6;
  double valid = 0.2;
  double test = 0.2;
};

/// Seeded shuffle then cut into train/valid/test. Train and valid sizes are
/// round(ratio * n); test takes the remainder.
std::array<DatasetSplit, 3> make_splits(std::span<const std::string> sample_ids, const SplitRatios& ratios,
                                        std::uint64_t seed);

/// Explicit id -> split assignment. Throws on overlap, unknown split names,
/// or ids missing from `sample_ids`.
std::array<DatasetSplit, 3> make_splits(std::span<const std::string> sample_ids,
                                        std::span<const std::pair<std::string, std::string>> assignment);

struct ScoreHistogram {
  std::array<std::size_t, 10> bins{};  // [0,0.1), ..., [0.9,1.0]
  std::size_t count = 0;
  double mean = 0.0;
  double stddev = 0.0;
  double min = 0.0;
  double max = 0.0;
  double median = 0.0;
};

ScoreHistogram score_distribution(std::span<const double> scores);

// JSONL I/O.
std::vector<JudgmentRecord> read_judgments(const std::filesystem::path& path);
std::string aggregated_to_jsonl(std::span<const AggregatedScore> scores);
std::string splits_to_jsonl(std::span<const DatasetSplit> splits, const std::string& source);
std::string histogram_to_json(const ScoreHistogram& histogram);

}  // namespace polos
