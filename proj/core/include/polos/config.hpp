#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "polos/head.hpp"
#include "polos/optim.hpp"

namespace polos {

// Flat key = value configuration covering both HeadConfig and TrainConfig.
// Lines starting with '#' and blank lines are ignored; unknown keys are
// rejected with ConfigError.
struct RunConfig {
  HeadConfig head;
  TrainConfig train;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

/// Canonical text form; parse_config(to_config_text(c)) == c.
std::string to_config_text(const RunConfig& config);

using ConfigEntries = std::vector<std::pair<std::string, std::string>>;

ConfigEntries head_entries(const HeadConfig& config);
ConfigEntries train_entries(const TrainConfig& config);

/// Assigns one field by name. Returns false when `key` names no HeadConfig
/// field; throws ConfigError when the value does not parse.
bool set_head_field(HeadConfig& config, std::string_view key, std::string_view value);
bool set_train_field(TrainConfig& config, std::string_view key, std::string_view value);

bool is_head_field(std::string_view key);

/// Allowed values for enumerable head fields (booleans and enums); empty for
/// numeric fields.
std::vector<std::string> head_field_domain(std::string_view key);

}  // namespace polos
