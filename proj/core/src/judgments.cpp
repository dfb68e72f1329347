#include "polos/judgments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <unordered_map>

#include <fmt/format.h>
#include <json.hpp>

#include "polos/error.hpp"
#include "polos/rng.hpp"

namespace polos {

namespace {

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

constexpr std::array<const char*, 3> kSplitNames{"train", "valid", "test"};

}  // namespace

double normalize_rating(int rating) {
  if (rating < 1 || rating > 5) throw DataError(fmt::format("rating {} outside the 1..5 scale", rating));
  return static_cast<double>(rating - 1) / 4.0;
}

std::vector<EvaluatorProfile> profile_evaluators(std::span<const JudgmentRecord> records) {
  struct Acc {
    std::size_t count = 0;
    std::vector<double> times;
    std::set<int> ratings;
    int last = 0;
    std::size_t run = 0;
    std::size_t longest = 0;
  };
  std::vector<std::string> order;
  std::unordered_map<std::string, Acc> acc;
  for (const auto& r : records) {
    auto [it, inserted] = acc.try_emplace(r.evaluator_id);
    if (inserted) order.push_back(r.evaluator_id);
    Acc& a = it->second;
    ++a.count;
    if (r.response_time) a.times.push_back(*r.response_time);
    a.ratings.insert(r.rating);
    a.run = (a.count > 1 && r.rating == a.last) ? a.run + 1 : 1;
    a.last = r.rating;
    a.longest = std::max(a.longest, a.run);
  }

  std::vector<EvaluatorProfile> profiles;
  profiles.reserve(order.size());
  for (const auto& id : order) {
    const Acc& a = acc.at(id);
    EvaluatorProfile p;
    p.evaluator_id = id;
    p.judgment_count = a.count;
    if (!a.times.empty()) p.median_response_time = median_of(a.times);
    p.distinct_ratings = a.ratings.size();
    p.longest_constant_run = a.longest;
    profiles.push_back(std::move(p));
  }
  return profiles;
}

FilterResult filter_evaluators(std::span<const JudgmentRecord> records, const FilterThresholds& thresholds) {
  std::set<std::string> dropped;
  FilterResult result;
  for (auto& p : profile_evaluators(records)) {
    if (p.median_response_time && *p.median_response_time < thresholds.min_median_response_time) {
      p.reasons.emplace_back("response time");
    }
    if (p.longest_constant_run >= thresholds.max_constant_run) p.reasons.emplace_back("constant ratings");
    if (p.judgment_count >= thresholds.diversity_min_judgments &&
        p.distinct_ratings < thresholds.min_distinct_ratings) {
      p.reasons.emplace_back("low rating diversity");
    }
    if (!p.reasons.empty()) {
      dropped.insert(p.evaluator_id);
      result.excluded.push_back(std::move(p));
    }
  }
  for (const auto& r : records) {
    if (!dropped.contains(r.evaluator_id)) result.kept.push_back(r);
  }
  return result;
}

AggregationResult aggregate_judgments(std::span<const JudgmentRecord> records, std::span<const std::string> expected,
                                      Reduction reduction) {
  std::map<std::string, std::vector<double>> by_sample;
  std::map<std::string, std::set<std::string>> evaluators;
  for (const auto& r : records) {
    by_sample[r.sample_id].push_back(normalize_rating(r.rating));
    evaluators[r.sample_id].insert(r.evaluator_id);
  }

  AggregationResult result;
  for (auto& [id, values] : by_sample) {
    // Sorting first makes the mean independent of record order.
    std::sort(values.begin(), values.end());
    double score = 0.0;
    if (reduction == Reduction::mean) {
      for (const double v : values) score += v;
      score /= static_cast<double>(values.size());
    } else {
      score = median_of(values);
    }
    result.scores.push_back({id, score, evaluators[id].size()});
  }
  for (const auto& id : expected) {
    if (!by_sample.contains(id)) result.missing_samples.push_back(id);
  }
  return result;
}

std::array<DatasetSplit, 3> make_splits(std::span<const std::string> sample_ids, const SplitRatios& ratios,
                                        std::uint64_t seed) {
  if (ratios.train < 0 || ratios.valid < 0 || ratios.test < 0 ||
      std::abs(ratios.train + ratios.valid + ratios.test - 1.0) > 1e-9) {
    throw ConfigError("split ratios must be non-negative and sum to 1");
  }
  const std::set<std::string> unique(sample_ids.begin(), sample_ids.end());
  if (unique.size() != sample_ids.size()) throw DataError("duplicate sample ids in split input");

  std::vector<std::string> ids(sample_ids.begin(), sample_ids.end());
  Rng rng(derive_seed(seed, "splits"));
  rng.shuffle(std::span(ids));

  const auto n = static_cast<double>(ids.size());
  const auto n_train = std::min(ids.size(), static_cast<std::size_t>(std::llround(ratios.train * n)));
  const auto n_valid = std::min(ids.size() - n_train, static_cast<std::size_t>(std::llround(ratios.valid * n)));

  std::array<DatasetSplit, 3> splits{
      DatasetSplit{kSplitNames[0], {}}, DatasetSplit{kSplitNames[1], {}}, DatasetSplit{kSplitNames[2], {}}};
  const auto b = ids.begin();
  splits[0].sample_ids.assign(b, b + static_cast<std::ptrdiff_t>(n_train));
  splits[1].sample_ids.assign(b + static_cast<std::ptrdiff_t>(n_train),
                              b + static_cast<std::ptrdiff_t>(n_train + n_valid));
  splits[2].sample_ids.assign(b + static_cast<std::ptrdiff_t>(n_train + n_valid), ids.end());
  return splits;
}

std::array<DatasetSplit, 3> make_splits(std::span<const std::string> sample_ids,
                                        std::span<const std::pair<std::string, std::string>> assignment) {
  std::array<DatasetSplit, 3> splits{
      DatasetSplit{kSplitNames[0], {}}, DatasetSplit{kSplitNames[1], {}}, DatasetSplit{kSplitNames[2], {}}};
  std::unordered_map<std::string, std::string> assigned;
  for (const auto& [id, split] : assignment) {
    const auto [it, inserted] = assigned.emplace(id, split);
    if (!inserted) {
      throw DataError(fmt::format("sample '{}' assigned to both '{}' and '{}'", id, it->second, split));
    }
  }
  for (const auto& id : sample_ids) {
    const auto it = assigned.find(id);
    if (it == assigned.end()) throw DataError(fmt::format("sample '{}' has no split assignment", id));
    const auto slot = std::find(kSplitNames.begin(), kSplitNames.end(), it->second);
    if (slot == kSplitNames.end()) throw DataError(fmt::format("unknown split name '{}'", it->second));
    splits[static_cast<std::size_t>(slot - kSplitNames.begin())].sample_ids.push_back(id);
  }
  if (assigned.size() != sample_ids.size()) throw DataError("assignment names ids outside the sample set");
  return splits;
}

ScoreHistogram score_distribution(std::span<const double> scores) {
  ScoreHistogram h;
  h.count = scores.size();
  if (scores.empty()) return h;
  double sum = 0.0;
  h.min = scores.front();
  h.max = scores.front();
  for (const double s : scores) {
    if (!(s >= 0.0 && s <= 1.0)) throw DataError(fmt::format("score {} outside [0, 1]", s));
    const auto bin = std::min<std::size_t>(9, static_cast<std::size_t>(s * 10.0));
    ++h.bins[bin];
    sum += s;
    h.min = std::min(h.min, s);
    h.max = std::max(h.max, s);
  }
  h.mean = sum / static_cast<double>(h.count);
  double sq = 0.0;
  for (const double s : scores) sq += (s - h.mean) * (s - h.mean);
  h.stddev = std::sqrt(sq / static_cast<double>(h.count));
  h.median = median_of(std::vector<double>(scores.begin(), scores.end()));
  return h;
}

std::vector<JudgmentRecord> read_judgments(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError(fmt::format("cannot open judgments '{}'", path.string()));
  std::vector<JudgmentRecord> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      JudgmentRecord r;
      r.sample_id = j.at("sample_id").get<std::string>();
      r.evaluator_id = j.at("evaluator_id").get<std::string>();
      r.rating = j.at("rating").get<int>();
      if (j.contains("response_time") && !j.at("response_time").is_null()) {
        r.response_time = j.at("response_time").get<double>();
        if (!(*r.response_time >= 0.0)) throw DataError("response_time must be non-negative");
      }
      normalize_rating(r.rating);
      records.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(fmt::format("{}:{}: {}", path.string(), lineno, e.what()));
    } catch (const DataError& e) {
      throw DataError(fmt::format("{}:{}: {}", path.string(), lineno, e.what()));
    }
  }
  return records;
}

std::string aggregated_to_jsonl(std::span<const AggregatedScore> scores) {
  std::string out;
  for (const auto& s : scores) {
    nlohmann::ordered_json j;
    j["sample_id"] = s.sample_id;
    j["score"] = s.score;
    j["evaluators"] = s.evaluator_count;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::string splits_to_jsonl(std::span<const DatasetSplit> splits, const std::string& source) {
  std::string out;
  for (const auto& split : splits) {
    for (const auto& id : split.sample_ids) {
      nlohmann::ordered_json j;
      j["sample_id"] = id;
      j["split"] = split.name;
      j["source"] = source;
      out += j.dump();
      out += '\n';
    }
  }
  return out;
}

std::string histogram_to_json(const ScoreHistogram& h) {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["bin_edges"] = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  j["bins"] = h.bins;
  j["count"] = h.count;
  j["mean"] = h.mean;
  j["stddev"] = h.stddev;
  j["min"] = h.min;
  j["max"] = h.max;
  j["median"] = h.median;
  return j.dump(2);
}

}  // namespace polos
