#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "polos/config.hpp"
#include "polos/embed_io.hpp"
#include "polos/eval.hpp"
#include "polos/optim.hpp"

namespace polos {

struct GridAxis {
  std::string field;
  std::vector<std::string> values;
};

/// Parses "field[=v1|v2],field2,...". A bare field expands to its full
/// domain (booleans, enums). Throws ConfigError for non-HeadConfig fields
/// or numeric fields without explicit values.
std::vector<GridAxis> parse_grid(std::string_view spec);

struct AblationCell {
  std::string label;
  ConfigEntries overrides;
  HeadConfig config;
  std::string error;  // set when the overrides produce an infeasible config
};

/// Cartesian product of the axes applied on top of `base`, in row-major
/// order (last axis varies fastest).
std::vector<AblationCell> expand_grid(std::span<const GridAxis> axes, const HeadConfig& base);

/// The six-row study: (i) concat-only fusion, (ii) no image, (iii) no CLIP
/// text, (iv) no RoBERTa, (v) mean aggregation, (vi) the base config.
std::vector<AblationCell> standard_grid(const HeadConfig& base);

struct CellOutcome {
  AblationCell cell;
  std::optional<EvalReport> report;
  std::optional<TrainLog> log;
  std::string error;
};

/// Trains one head per cell (shared seeds) and reports the correlation
/// statistic on `test`. Cell failures are recorded and the sweep continues.
std::vector<CellOutcome> run_ablation(std::span<const AblationCell> cells, const Bundle& train, const Bundle& valid,
                                      const Bundle& test, const TrainConfig& train_config, Statistic statistic,
                                      const std::string& dataset, unsigned jobs = 1);

}  // namespace polos
