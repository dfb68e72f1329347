#include "polos/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "polos/error.hpp"

namespace polos {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(fmt::format("{}: expected a boolean, got '{}'", key, v));
}

template <typename T>
T parse_number(std::string_view key, std::string_view v) {
  T out{};
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc{} || ptr != end) throw ConfigError(fmt::format("{}: cannot parse '{}'", key, v));
  return out;
}

std::vector<std::size_t> parse_widths(std::string_view key, std::string_view v) {
  std::vector<std::size_t> out;
  if (trim(v).empty() || trim(v) == "none") return out;
  while (!v.empty()) {
    const auto comma = v.find(',');
    out.push_back(parse_number<std::size_t>(key, trim(v.substr(0, comma))));
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
  }
  return out;
}

std::string join_widths(const std::vector<std::size_t>& w) {
  if (w.empty()) return "none";
  return fmt::format("{}", fmt::join(w, ","));
}

std::string format_real(double x) { return fmt::format("{}", x); }

}  // namespace

bool set_head_field(HeadConfig& c, std::string_view key, std::string_view value) {
  const auto v = trim(value);
  if (key == "aggregate") {
    if (v == "max") {
      c.aggregate = Aggregate::max;
    } else if (v == "mean") {
      c.aggregate = Aggregate::mean;
    } else {
      throw ConfigError(fmt::format("aggregate: expected max|mean, got '{}'", v));
    }
  } else if (key == "fusion_mode") {
    if (v == "full") {
      c.fusion_mode = FusionMode::full;
    } else if (v == "concat_only") {
      c.fusion_mode = FusionMode::concat_only;
    } else {
      throw ConfigError(fmt::format("fusion_mode: expected full|concat_only, got '{}'", v));
    }
  } else if (key == "use_image") {
    c.use_image = parse_bool(key, v);
  } else if (key == "use_clip_text") {
    c.use_clip_text = parse_bool(key, v);
  } else if (key == "use_roberta") {
    c.use_roberta = parse_bool(key, v);
  } else if (key == "mlp1_hidden") {
    c.mlp1_hidden = parse_widths(key, v);
  } else if (key == "d_h") {
    c.d_h = parse_number<std::size_t>(key, v);
  } else if (key == "mlp2_hidden") {
    c.mlp2_hidden = parse_widths(key, v);
  } else if (key == "activation") {
    if (v == "relu") {
      c.activation = Activation::relu;
    } else if (v == "tanh") {
      c.activation = Activation::tanh;
    } else if (v == "identity") {
      c.activation = Activation::identity;
    } else {
      throw ConfigError(fmt::format("activation: expected relu|tanh|identity, got '{}'", v));
    }
  } else if (key == "head_seed") {
    c.seed = parse_number<std::uint64_t>(key, v);
  } else {
    return false;
  }
  return true;
}

bool set_train_field(TrainConfig& c, std::string_view key, std::string_view value) {
  const auto v = trim(value);
  if (key == "learning_rate") {
    c.learning_rate = parse_number<double>(key, v);
  } else if (key == "beta1") {
    c.beta1 = parse_number<double>(key, v);
  } else if (key == "beta2") {
    c.beta2 = parse_number<double>(key, v);
  } else if (key == "epsilon") {
    c.epsilon = parse_number<double>(key, v);
  } else if (key == "batch_size") {
    c.batch_size = parse_number<std::size_t>(key, v);
  } else if (key == "patience") {
    c.patience = parse_number<std::size_t>(key, v);
  } else if (key == "max_epochs") {
    c.max_epochs = parse_number<std::size_t>(key, v);
  } else if (key == "seed") {
    c.seed = parse_number<std::uint64_t>(key, v);
  } else if (key == "shuffle") {
    c.shuffle = parse_bool(key, v);
  } else {
    return false;
  }
  return true;
}

bool is_head_field(std::string_view key) {
  for (const auto& [k, v] : head_entries(HeadConfig{})) {
    if (k == key) return true;
  }
  return false;
}

std::vector<std::string> head_field_domain(std::string_view key) {
  if (key == "aggregate") return {"max", "mean"};
  if (key == "fusion_mode") return {"full", "concat_only"};
  if (key == "activation") return {"relu", "tanh", "identity"};
  if (key == "use_image" || key == "use_clip_text" || key == "use_roberta") return {"true", "false"};
  return {};
}

ConfigEntries head_entries(const HeadConfig& c) {
  return {
      {"aggregate", std::string(to_string(c.aggregate))},
      {"fusion_mode", std::string(to_string(c.fusion_mode))},
      {"use_image", c.use_image ? "true" : "false"},
      {"use_clip_text", c.use_clip_text ? "true" : "false"},
      {"use_roberta", c.use_roberta ? "true" : "false"},
      {"mlp1_hidden", join_widths(c.mlp1_hidden)},
      {"d_h", std::to_string(c.d_h)},
      {"mlp2_hidden", join_widths(c.mlp2_hidden)},
      {"activation", std::string(to_string(c.activation))},
      {"head_seed", std::to_string(c.seed)},
  };
}

ConfigEntries train_entries(const TrainConfig& c) {
  return {
      {"learning_rate", format_real(c.learning_rate)},
      {"beta1", format_real(c.beta1)},
      {"beta2", format_real(c.beta2)},
      {"epsilon", format_real(c.epsilon)},
      {"batch_size", std::to_string(c.batch_size)},
      {"patience", std::to_string(c.patience)},
      {"max_epochs", std::to_string(c.max_epochs)},
      {"seed", std::to_string(c.seed)},
      {"shuffle", c.shuffle ? "true" : "false"},
  };
}

RunConfig parse_config(std::string_view text) {
  RunConfig config;
  std::size_t lineno = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    const auto line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++lineno;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(fmt::format("config line {}: expected key = value", lineno));
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (!set_head_field(config.head, key, value) && !set_train_field(config.train, key, value)) {
      throw ConfigError(fmt::format("config line {}: unknown key '{}'", lineno, key));
    }
  }
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError(fmt::format("cannot open config '{}'", path.string()));
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

std::string to_config_text(const RunConfig& config) {
  std::string out;
  for (const auto& [k, v] : head_entries(config.head)) out += fmt::format("{} = {}\n", k, v);
  for (const auto& [k, v] : train_entries(config.train)) out += fmt::format("{} = {}\n", k, v);
  return out;
}

}  // namespace polos
