#include <json.hpp>

#include "polos/eval.hpp"
#include "polos/optim.hpp"

namespace polos {

std::string reports_to_json(std::span<const EvalReport> reports, int indent) {
  nlohmann::ordered_json root;
  root["schema_version"] = kSchemaVersion;
  root["reports"] = nlohmann::ordered_json::array();
  for (const auto& r : reports) {
    nlohmann::ordered_json j;
    j["dataset"] = r.dataset;
    j["statistic"] = r.statistic;
    j["value"] = r.value;
    j["sample_count"] = r.sample_count;
    j["seed"] = r.seed;
    if (!r.cell.empty()) j["cell"] = r.cell;
    nlohmann::ordered_json config = nlohmann::ordered_json::object();
    for (const auto& [k, v] : r.config) config[k] = v;
    j["config"] = std::move(config);
    root["reports"].push_back(std::move(j));
  }
  return root.dump(indent);
}

std::string train_log_to_jsonl(const TrainLog& log, bool include_timing) {
  std::string out;
  for (const auto& rec : log.epochs) {
    nlohmann::ordered_json j;
    j["epoch"] = rec.epoch;
    j["train_loss"] = rec.train_loss;
    j["valid_tau"] = rec.valid_tau ? nlohmann::ordered_json(*rec.valid_tau) : nlohmann::ordered_json(nullptr);
    j["best"] = rec.epoch == log.best_epoch;
    if (include_timing) j["wall_seconds"] = rec.wall_seconds;
    out += j.dump();
    out += '\n';
  }
  return out;
}

}  // namespace polos
