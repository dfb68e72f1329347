#include "polos/ablation.hpp"

#include <fmt/format.h>

#include "polos/error.hpp"

namespace polos {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  while (true) {
    const auto p = s.find(sep);
    out.emplace_back(trim(s.substr(0, p)));
    if (p == std::string_view::npos) break;
    s.remove_prefix(p + 1);
  }
  return out;
}

AblationCell make_cell(std::string label, ConfigEntries overrides, const HeadConfig& base) {
  AblationCell cell{std::move(label), std::move(overrides), base, {}};
  try {
    for (const auto& [k, v] : cell.overrides) set_head_field(cell.config, k, v);
    cell.config.validate();
  } catch (const ConfigError& e) {
    cell.error = e.what();
  }
  return cell;
}

}  // namespace

std::vector<GridAxis> parse_grid(std::string_view spec) {
  std::vector<GridAxis> axes;
  for (const auto& item : split(spec, ',')) {
    if (item.empty()) throw ConfigError("empty grid axis");
    GridAxis axis;
    const auto eq = item.find('=');
    axis.field = std::string(trim(std::string_view(item).substr(0, eq)));
    if (!is_head_field(axis.field)) throw ConfigError(fmt::format("grid axis '{}' is not a head config field", axis.field));
    if (eq != std::string::npos) {
      axis.values = split(std::string_view(item).substr(eq + 1), '|');
      HeadConfig scratch;
      for (const auto& v : axis.values) set_head_field(scratch, axis.field, v);
    } else {
      axis.values = head_field_domain(axis.field);
      if (axis.values.empty()) {
        throw ConfigError(fmt::format("grid axis '{}' needs explicit values (field=v1|v2)", axis.field));
      }
    }
    axes.push_back(std::move(axis));
  }
  if (axes.empty()) throw ConfigError("empty grid");
  return axes;
}

std::vector<AblationCell> expand_grid(std::span<const GridAxis> axes, const HeadConfig& base) {
  std::vector<AblationCell> cells;
  std::vector<std::size_t> idx(axes.size(), 0);
  while (true) {
    ConfigEntries overrides;
    std::string label;
    for (std::size_t a = 0; a < axes.size(); ++a) {
      overrides.emplace_back(axes[a].field, axes[a].values[idx[a]]);
      label += fmt::format("{}{}={}", a == 0 ? "" : ",", axes[a].field, axes[a].values[idx[a]]);
    }
    cells.push_back(make_cell(std::move(label), std::move(overrides), base));

    std::size_t a = axes.size();
    while (a > 0) {
      --a;
      if (++idx[a] < axes[a].values.size()) break;
      idx[a] = 0;
      if (a == 0) return cells;
    }
    if (axes.empty()) return cells;
  }
}

std::vector<AblationCell> standard_grid(const HeadConfig& base) {
  return {
      make_cell("(i) concat_only", {{"fusion_mode", "concat_only"}}, base),
      make_cell("(ii) no image", {{"use_image", "false"}}, base),
      make_cell("(iii) no clip text", {{"use_clip_text", "false"}}, base),
      make_cell("(iv) no roberta", {{"use_roberta", "false"}}, base),
      make_cell("(v) mean aggregate", {{"aggregate", "mean"}}, base),
      make_cell("(vi) full", {}, base),
  };
}

std::vector<CellOutcome> run_ablation(std::span<const AblationCell> cells, const Bundle& train, const Bundle& valid,
                                      const Bundle& test, const TrainConfig& train_config, Statistic statistic,
                                      const std::string& dataset, unsigned jobs) {
  std::vector<CellOutcome> outcomes;
  for (const auto& cell : cells) {
    CellOutcome out{cell, std::nullopt, std::nullopt, cell.error};
    if (cell.error.empty()) {
      try {
        FitOptions options;
        options.jobs = jobs;
        auto fitted = fit(train.samples, valid.samples, cell.config, train_config, options);
        auto report =
            correlation_report(test, fitted.params, cell.config, statistic, dataset, train_config.seed, jobs);
        report.cell = cell.label;
        out.report = std::move(report);
        out.log = std::move(fitted.log);
      } catch (const std::exception& e) {
        out.error = e.what();
      }
    }
    outcomes.push_back(std::move(out));
  }
  return outcomes;
}

}  // namespace polos
