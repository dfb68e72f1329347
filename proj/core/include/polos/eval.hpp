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

#include "polos/config.hpp"
#include "polos/embed_io.hpp"
#include "polos/head.hpp"

namespace polos {

enum class Statistic { tau_b, tau_c };

std::string_view to_string(Statistic s);
Statistic parse_statistic(std::string_view s);

/// One emitted benchmark number with enough context to reproduce it.
struct EvalReport {
  std::string dataset;
  std::string statistic;  // tau_b | tau_c | pascal_accuracy_<cat> | pascal_accuracy_mean | foil_accuracy_<k>ref
  double value = 0.0;
  std::size_t sample_count = 0;
  std::uint64_t seed = 0;
  ConfigEntries config;
  std::string cell;  // ablation cell label, empty outside sweeps
};

/// Scores every sample and correlates predictions with human scores.
EvalReport correlation_report(const Bundle& bundle, const HeadParams& params, const HeadConfig& config,
                              Statistic statistic, const std::string& dataset, std::uint64_t seed = 0,
                              unsigned jobs = 1);

// --- PASCAL-50S -----------------------------------------------------------

enum class PascalCategory { HC, HI, HM, MM };
inline constexpr std::array<PascalCategory, 4> kPascalCategories{PascalCategory::HC, PascalCategory::HI,
                                                                 PascalCategory::HM, PascalCategory::MM};

std::string_view to_string(PascalCategory c);
PascalCategory parse_pascal_category(std::string_view s);

enum class Winner { A, B };

struct CaptionEmbedding {
  std::vector<float> clip;
  std::vector<float> rb;
};

struct PascalPair {
  std::string pair_id;  // drives the per-pair reference draw
  std::string image_id;
  CaptionEmbedding caption_a;
  CaptionEmbedding caption_b;
  std::vector<std::vector<float>> pool_clip;
  std::vector<std::vector<float>> pool_rb;
  std::vector<float> img;
  PascalCategory category = PascalCategory::HC;
  Winner winner = Winner::A;
};

struct CategoryAccuracy {
  std::size_t correct = 0;
  std::size_t total = 0;  // pairs x repeats
  [[nodiscard]] double accuracy() const {
    return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
  }
};

struct PascalResult {
  std::map<PascalCategory, CategoryAccuracy> categories;  // only categories present
  double mean = 0.0;  // unweighted mean over present categories
};

/// Draws `draws` references per pair without replacement (seeded by pair_id,
/// seed and repeat index), scores both captions against the same draw, and
/// counts the pair correct when the ground-truth winner scores strictly
/// higher. Ties count as incorrect.
PascalResult pascal_accuracy(std::span<const PascalPair> pairs, const HeadParams& params, const HeadConfig& config,
                             std::size_t draws = 5, std::uint64_t seed = 0, std::size_t repeats = 1);

// --- FOIL -------------------------------------------------------------------

struct FoilPair {
  std::string image_id;
  CaptionEmbedding true_caption;
  CaptionEmbedding foil_caption;
  std::vector<std::vector<float>> refs_clip;
  std::vector<std::vector<float>> refs_rb;
  std::vector<float> img;
};

struct FoilSetting {
  std::size_t correct = 0;
  std::size_t total = 0;
  [[nodiscard]] double accuracy() const {
    return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
  }
};

/// Accuracy keyed by reference count (1 or 4): correct iff
/// score(true) > score(foil) strictly. Throws DataError("no pairs") on empty
/// input and on reference counts outside {1, 4}.
std::map<std::size_t, FoilSetting> foil_accuracy(std::span<const FoilPair> pairs, const HeadParams& params,
                                                 const HeadConfig& config);

// --- Protocol manifests ------------------------------------------------------
//
// PASCAL lines: {"pair_id", "sample_a", "sample_b", "category", "winner"}.
//   The reference pool and image come from sample_a; sample_b contributes
//   only its candidate embeddings.
// FOIL lines: {"pair_id", "true_sample", "foil_sample", "refs"}.
//   References and image come from true_sample, whose ref count must equal
//   "refs".

std::vector<PascalPair> load_pascal_pairs(const Bundle& bundle, const std::filesystem::path& manifest);
std::vector<FoilPair> load_foil_pairs(const Bundle& bundle, const std::filesystem::path& manifest);

// --- JSON ---------------------------------------------------------------------

inline constexpr int kSchemaVersion = 1;

/// {"schema_version": 1, "reports": [...]} with one object per report.
std::string reports_to_json(std::span<const EvalReport> reports, int indent = 2);

}  // namespace polos
