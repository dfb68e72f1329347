#include "polos/eval.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_map>

#include <fmt/format.h>
#include <json.hpp>

#include "polos/error.hpp"
#include "polos/kendall.hpp"
#include "polos/rng.hpp"

namespace polos {

namespace {

EmbeddingSample as_sample(const CaptionEmbedding& caption, const std::vector<std::vector<float>>& refs_clip,
                          const std::vector<std::vector<float>>& refs_rb, const std::vector<float>& img) {
  EmbeddingSample s;
  s.cand_clip = caption.clip;
  s.cand_rb = caption.rb;
  s.refs_clip = refs_clip;
  s.refs_rb = refs_rb;
  s.img = img;
  return s;
}

template <typename F>
void for_each_json_line(const std::filesystem::path& path, F&& fn) {
  std::ifstream f(path);
  if (!f) throw DataError(fmt::format("cannot open manifest '{}'", path.string()));
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      fn(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(fmt::format("{}:{}: {}", path.string(), lineno, e.what()));
    } catch (const DataError& e) {
      throw DataError(fmt::format("{}:{}: {}", path.string(), lineno, e.what()));
    }
  }
}

std::unordered_map<std::string, const EmbeddingSample*> index_samples(const Bundle& bundle) {
  std::unordered_map<std::string, const EmbeddingSample*> index;
  for (const auto& s : bundle.samples) index.emplace(s.sample_id, &s);
  return index;
}

const EmbeddingSample& lookup(const std::unordered_map<std::string, const EmbeddingSample*>& index,
                              const std::string& id) {
  const auto it = index.find(id);
  if (it == index.end()) throw DataError(fmt::format("sample '{}' not found in bundle", id));
  return *it->second;
}

}  // namespace

std::string_view to_string(Statistic s) { return s == Statistic::tau_b ? "tau_b" : "tau_c"; }

Statistic parse_statistic(std::string_view s) {
  if (s == "tau_b") return Statistic::tau_b;
  if (s == "tau_c") return Statistic::tau_c;
  throw ConfigError(fmt::format("unknown statistic '{}' (expected tau_b|tau_c)", s));
}

EvalReport correlation_report(const Bundle& bundle, const HeadParams& params, const HeadConfig& config,
                              Statistic statistic, const std::string& dataset, std::uint64_t seed, unsigned jobs) {
  for (const auto& s : bundle.samples) {
    if (!s.score) throw DataError(fmt::format("sample '{}' has no human score", s.sample_id));
  }
  const auto scored = score_batch(bundle.samples, params, config, jobs);
  std::vector<ScoredPair> pairs;
  pairs.reserve(scored.size());
  for (std::size_t k = 0; k < scored.size(); ++k) {
    pairs.push_back({scored[k].y_hat, static_cast<double>(*bundle.samples[k].score)});
  }
  EvalReport report;
  report.dataset = dataset;
  report.statistic = std::string(to_string(statistic));
  report.value = statistic == Statistic::tau_b ? kendall_tau_b(pairs) : kendall_tau_c(pairs);
  report.sample_count = pairs.size();
  report.seed = seed;
  report.config = head_entries(config);
  return report;
}

std::string_view to_string(PascalCategory c) {
  switch (c) {
    case PascalCategory::HC:
      return "HC";
    case PascalCategory::HI:
      return "HI";
    case PascalCategory::HM:
      return "HM";
    case PascalCategory::MM:
      return "MM";
  }
  return "?";
}

PascalCategory parse_pascal_category(std::string_view s) {
  for (const auto c : kPascalCategories) {
    if (to_string(c) == s) return c;
  }
  throw DataError(fmt::format("unknown PASCAL category '{}'", s));
}

PascalResult pascal_accuracy(std::span<const PascalPair> pairs, const HeadParams& params, const HeadConfig& config,
                             std::size_t draws, std::uint64_t seed, std::size_t repeats) {
  if (draws == 0) throw ConfigError("PASCAL draw count must be positive");
  if (repeats == 0) throw ConfigError("PASCAL repeat count must be positive");

  std::vector<EmbeddingSample> samples;
  samples.reserve(2 * pairs.size() * repeats);
  for (const auto& pair : pairs) {
    if (pair.pool_clip.empty() || pair.pool_clip.size() != pair.pool_rb.size()) {
      throw DataError(fmt::format("pair '{}': reference pool empty or inconsistent", pair.pair_id));
    }
    if (pair.pool_clip.size() < draws) {
      throw DataError(fmt::format("pair '{}': reference pool ({}) smaller than draw count ({})", pair.pair_id,
                                  pair.pool_clip.size(), draws));
    }
    for (std::size_t rep = 0; rep < repeats; ++rep) {
      Rng rng(derive_seed(seed, "pascal:" + pair.pair_id, rep));
      auto picked = rng.sample_without_replacement(pair.pool_clip.size(), draws);
      std::sort(picked.begin(), picked.end());
      std::vector<std::vector<float>> clip;
      std::vector<std::vector<float>> rb;
      for (const auto i : picked) {
        clip.push_back(pair.pool_clip[i]);
        rb.push_back(pair.pool_rb[i]);
      }
      samples.push_back(as_sample(pair.caption_a, clip, rb, pair.img));
      samples.push_back(as_sample(pair.caption_b, clip, rb, pair.img));
    }
  }

  const auto scored = score_batch(samples, params, config);
  PascalResult result;
  std::size_t k = 0;
  for (const auto& pair : pairs) {
    auto& cat = result.categories[pair.category];
    for (std::size_t rep = 0; rep < repeats; ++rep, k += 2) {
      const double a = scored[k].y_hat;
      const double b = scored[k + 1].y_hat;
      const bool correct = pair.winner == Winner::A ? a > b : b > a;
      cat.correct += correct ? 1 : 0;
      ++cat.total;
    }
  }
  if (!result.categories.empty()) {
    double sum = 0.0;
    for (const auto& [c, acc] : result.categories) sum += acc.accuracy();
    result.mean = sum / static_cast<double>(result.categories.size());
  }
  return result;
}

std::map<std::size_t, FoilSetting> foil_accuracy(std::span<const FoilPair> pairs, const HeadParams& params,
                                                 const HeadConfig& config) {
  if (pairs.empty()) throw DataError("no pairs");
  std::vector<EmbeddingSample> samples;
  samples.reserve(2 * pairs.size());
  for (const auto& pair : pairs) {
    const auto n = pair.refs_clip.size();
    if (n != 1 && n != 4) {
      throw DataError(fmt::format("FOIL pair for image '{}' has {} references (expected 1 or 4)", pair.image_id, n));
    }
    samples.push_back(as_sample(pair.true_caption, pair.refs_clip, pair.refs_rb, pair.img));
    samples.push_back(as_sample(pair.foil_caption, pair.refs_clip, pair.refs_rb, pair.img));
  }
  const auto scored = score_batch(samples, params, config);
  std::map<std::size_t, FoilSetting> result;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    auto& setting = result[pairs[k].refs_clip.size()];
    setting.correct += scored[2 * k].y_hat > scored[2 * k + 1].y_hat ? 1 : 0;
    ++setting.total;
  }
  return result;
}

std::vector<PascalPair> load_pascal_pairs(const Bundle& bundle, const std::filesystem::path& manifest) {
  const auto index = index_samples(bundle);
  std::vector<PascalPair> pairs;
  for_each_json_line(manifest, [&](const nlohmann::json& j) {
    const auto& a = lookup(index, j.at("sample_a").get<std::string>());
    const auto& b = lookup(index, j.at("sample_b").get<std::string>());
    PascalPair p;
    p.pair_id = j.at("pair_id").get<std::string>();
    p.image_id = j.value("image_id", a.sample_id);
    p.caption_a = {a.cand_clip, a.cand_rb};
    p.caption_b = {b.cand_clip, b.cand_rb};
    p.pool_clip = a.refs_clip;
    p.pool_rb = a.refs_rb;
    p.img = a.img;
    p.category = parse_pascal_category(j.at("category").get<std::string>());
    const auto winner = j.at("winner").get<std::string>();
    if (winner == "A") {
      p.winner = Winner::A;
    } else if (winner == "B") {
      p.winner = Winner::B;
    } else {
      throw DataError(fmt::format("winner must be A or B, got '{}'", winner));
    }
    pairs.push_back(std::move(p));
  });
  return pairs;
}

std::vector<FoilPair> load_foil_pairs(const Bundle& bundle, const std::filesystem::path& manifest) {
  const auto index = index_samples(bundle);
  std::vector<FoilPair> pairs;
  for_each_json_line(manifest, [&](const nlohmann::json& j) {
    const auto& t = lookup(index, j.at("true_sample").get<std::string>());
    const auto& f = lookup(index, j.at("foil_sample").get<std::string>());
    const auto refs = j.at("refs").get<std::size_t>();
    if (refs != t.n_refs()) {
      throw DataError(fmt::format("sample '{}' has {} references but the manifest says {}", t.sample_id,
                                  t.n_refs(), refs));
    }
    FoilPair p;
    p.image_id = j.value("image_id", t.sample_id);
    p.true_caption = {t.cand_clip, t.cand_rb};
    p.foil_caption = {f.cand_clip, f.cand_rb};
    p.refs_clip = t.refs_clip;
    p.refs_rb = t.refs_rb;
    p.img = t.img;
    pairs.push_back(std::move(p));
  });
  return pairs;
}

}  // namespace polos
