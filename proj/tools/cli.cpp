#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>
#include <json.hpp>

#include "polos/ablation.hpp"
#include "polos/checkpoint.hpp"
#include "polos/config.hpp"
#include "polos/embed_io.hpp"
#include "polos/error.hpp"
#include "polos/eval.hpp"
#include "polos/head.hpp"
#include "polos/judgments.hpp"
#include "polos/optim.hpp"
#include "polos/synthetic.hpp"

namespace polos::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

struct Common {
  std::uint64_t seed = 0;
  unsigned jobs = 1;
  bool json = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--seed", c.seed, "Root seed for every stochastic step");
  cmd->add_option("--jobs", c.jobs, "Parallel scoring workers")->check(CLI::PositiveNumber);
  cmd->add_flag("--json", c.json, "Machine-readable JSON on stdout");
}

std::string dataset_tag(const std::string& explicit_tag, const fs::path& data) {
  return explicit_tag.empty() ? data.stem().string() : explicit_tag;
}

void emit_reports(std::ostream& out, const std::vector<EvalReport>& reports, bool as_json,
                  const std::string& out_path) {
  const auto text = reports_to_json(reports);
  if (!out_path.empty()) write_file_atomic(out_path, text + "\n");
  if (as_json) {
    out << text << "\n";
    return;
  }
  for (const auto& r : reports) {
    out << fmt::format("{}\t{}{}\t{:.6f}\tn={}\n", r.dataset, r.cell.empty() ? "" : r.cell + "\t", r.statistic,
                       r.value, r.sample_count);
  }
}

json validation_json(const ValidationReport& v) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["sample_count"] = v.sample_count;
  j["d_clip"] = v.dims.d_clip;
  j["d_rb"] = v.dims.d_rb;
  j["min_refs"] = v.min_refs;
  j["max_refs"] = v.max_refs;
  j["mean_refs"] = v.mean_refs;
  j["score_presence"] = v.score_presence;
  j["findings"] = json::array();
  for (const auto& f : v.findings) j["findings"].push_back({{"sample_id", f.sample_id}, {"message", f.message}});
  return j;
}

// ---- verbs ------------------------------------------------------------------

struct ValidateArgs {
  std::string bundle;
  Common common;
};

int do_validate(const ValidateArgs& a, std::ostream& out) {
  const auto bundle = read_bundle(a.bundle);
  const auto report = validate_bundle(bundle);
  if (a.common.json) {
    out << validation_json(report).dump(2) << "\n";
  } else {
    out << fmt::format("{}: {} samples, d_clip={}, d_rb={}, refs {}..{}, scores {:.1f}%, {} findings\n", a.bundle,
                       report.sample_count, report.dims.d_clip, report.dims.d_rb, report.min_refs, report.max_refs,
                       100.0 * report.score_presence, report.findings.size());
    for (const auto& f : report.findings) out << fmt::format("  {}: {}\n", f.sample_id, f.message);
  }
  return report.ok() ? kOk : kDataError;
}

struct SynthArgs {
  std::string out;
  SynthSpec spec;
  std::string scores = "quality";
  Common common;
};

int do_synth(SynthArgs a, std::ostream& out) {
  if (a.scores == "quality") {
    a.spec.scores = SynthScores::quality;
  } else if (a.scores == "random") {
    a.spec.scores = SynthScores::random;
  } else if (a.scores == "none") {
    a.spec.scores = SynthScores::none;
  } else {
    throw ConfigError(fmt::format("--scores must be quality|random|none, got '{}'", a.scores));
  }
  a.spec.seed = a.common.seed;
  const auto bytes = write_bundle(make_synthetic_bundle(a.spec), a.out);
  if (a.common.json) {
    out << json{{"schema_version", kSchemaVersion}, {"path", a.out}, {"bytes", bytes},
                {"sample_count", a.spec.count}}
               .dump(2)
        << "\n";
  } else {
    out << fmt::format("wrote {} samples ({} bytes) to {}\n", a.spec.count, bytes, a.out);
  }
  return kOk;
}

RunConfig config_with_seed(const std::string& path, std::uint64_t seed) {
  RunConfig config = path.empty() ? RunConfig{} : load_config(path);
  config.head.seed = seed;
  config.train.seed = seed;
  return config;
}

struct TrainArgs {
  std::string data;
  std::string val;
  std::string config;
  std::string checkpoint;
  std::string log;
  bool timing = false;
  bool verbose = false;
  Common common;
};

int do_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  const auto config = config_with_seed(a.config, a.common.seed);
  config.head.validate();
  config.train.validate();
  const auto train = read_bundle(a.data);
  const auto valid = read_bundle(a.val);
  if (!(train.dims == valid.dims)) throw DimensionError("training and validation bundles differ in dimensions");

  FitOptions options;
  options.jobs = a.common.jobs;
  if (a.verbose) {
    options.on_epoch = [&](const EpochRecord& r) {
      err << fmt::format("epoch {:3d}  loss {:.6f}  tau_c {}\n", r.epoch, r.train_loss,
                         r.valid_tau ? fmt::format("{:.4f}", *r.valid_tau) : "undefined");
    };
  }
  const auto result = fit(train.samples, valid.samples, config.head, config.train, options);
  save_checkpoint({config, train.dims, result.params}, a.checkpoint);
  if (!a.log.empty()) write_file_atomic(a.log, train_log_to_jsonl(result.log, a.timing));

  if (a.common.json) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["checkpoint"] = a.checkpoint;
    j["epochs_run"] = result.log.epochs.size();
    j["best_epoch"] = result.log.best_epoch;
    j["best_tau"] = result.log.best_tau ? json(*result.log.best_tau) : json(nullptr);
    out << j.dump(2) << "\n";
  } else {
    out << fmt::format("trained {} epochs; best epoch {} (tau_c {}); checkpoint {}\n", result.log.epochs.size(),
                       result.log.best_epoch,
                       result.log.best_tau ? fmt::format("{:.4f}", *result.log.best_tau) : "undefined",
                       a.checkpoint);
  }
  return kOk;
}

Checkpoint load_for(const std::string& path, const Dims& dims) {
  auto ckpt = load_checkpoint(path);
  if (!(ckpt.dims == dims)) {
    throw DimensionError(fmt::format("checkpoint expects d_clip={}, d_rb={} but the bundle has d_clip={}, d_rb={}",
                                     ckpt.dims.d_clip, ckpt.dims.d_rb, dims.d_clip, dims.d_rb));
  }
  return ckpt;
}

struct ScoreArgs {
  std::string data;
  std::string checkpoint;
  std::string out_path;
  Common common;
};

int do_score(const ScoreArgs& a, std::ostream& out) {
  const auto bundle = read_bundle(a.data);
  const auto ckpt = load_for(a.checkpoint, bundle.dims);
  const auto scored = score_batch(bundle.samples, ckpt.params, ckpt.config.head, a.common.jobs);

  std::string jsonl;
  for (std::size_t k = 0; k < scored.size(); ++k) {
    json j;
    j["sample_id"] = bundle.samples[k].sample_id;
    j["score"] = scored[k].y_hat;
    j["per_ref_scores"] = scored[k].per_ref_scores;
    if (ckpt.config.head.aggregate == Aggregate::max) j["argmax_ref"] = scored[k].argmax_ref;
    jsonl += j.dump() + "\n";
  }
  if (!a.out_path.empty()) write_file_atomic(a.out_path, jsonl);
  if (a.common.json) {
    out << jsonl;
  } else {
    for (std::size_t k = 0; k < scored.size(); ++k) {
      out << fmt::format("{}\t{:.6f}\n", bundle.samples[k].sample_id, scored[k].y_hat);
    }
  }
  return kOk;
}

struct EvalArgs {
  std::string data;
  std::string checkpoint;
  std::string manifest;
  std::string dataset;
  std::string statistic = "tau_c";
  std::string out_path;
  std::size_t draws = 5;
  std::size_t repeats = 1;
  std::size_t refs = 0;  // 0 = every setting present
  Common common;
};

int do_eval_corr(const EvalArgs& a, std::ostream& out) {
  const auto bundle = read_bundle(a.data);
  const auto ckpt = load_for(a.checkpoint, bundle.dims);
  const auto report = correlation_report(bundle, ckpt.params, ckpt.config.head, parse_statistic(a.statistic),
                                         dataset_tag(a.dataset, a.data), a.common.seed, a.common.jobs);
  emit_reports(out, {report}, a.common.json, a.out_path);
  return kOk;
}

int do_eval_pascal(const EvalArgs& a, std::ostream& out) {
  const auto bundle = read_bundle(a.data);
  const auto ckpt = load_for(a.checkpoint, bundle.dims);
  const auto pairs = load_pascal_pairs(bundle, a.manifest);
  if (pairs.empty()) throw DataError("no pairs");
  const auto result = pascal_accuracy(pairs, ckpt.params, ckpt.config.head, a.draws, a.common.seed, a.repeats);

  std::vector<EvalReport> reports;
  auto entries = head_entries(ckpt.config.head);
  entries.emplace_back("draws", std::to_string(a.draws));
  entries.emplace_back("repeats", std::to_string(a.repeats));
  const auto tag = dataset_tag(a.dataset, a.data);
  for (const auto& [cat, acc] : result.categories) {
    reports.push_back({tag, fmt::format("pascal_accuracy_{}", to_string(cat)), acc.accuracy(), acc.total / a.repeats,
                       a.common.seed, entries, {}});
  }
  reports.push_back({tag, "pascal_accuracy_mean", result.mean, pairs.size(), a.common.seed, entries, {}});
  emit_reports(out, reports, a.common.json, a.out_path);
  return kOk;
}

int do_eval_foil(const EvalArgs& a, std::ostream& out) {
  const auto bundle = read_bundle(a.data);
  const auto ckpt = load_for(a.checkpoint, bundle.dims);
  auto pairs = load_foil_pairs(bundle, a.manifest);
  if (a.refs != 0) {
    std::erase_if(pairs, [&](const FoilPair& p) { return p.refs_clip.size() != a.refs; });
  }
  const auto result = foil_accuracy(pairs, ckpt.params, ckpt.config.head);
  std::vector<EvalReport> reports;
  const auto tag = dataset_tag(a.dataset, a.data);
  for (const auto& [refs, setting] : result) {
    reports.push_back({tag, fmt::format("foil_accuracy_{}ref", refs), setting.accuracy(), setting.total,
                       a.common.seed, head_entries(ckpt.config.head), {}});
  }
  emit_reports(out, reports, a.common.json, a.out_path);
  return kOk;
}

struct JudgmentArgs {
  std::string input;
  std::string out_scores;
  std::string out_splits;
  std::string out_hist;
  std::string source = "polaris";
  std::vector<double> ratios{0.6, 0.2, 0.2};
  bool median = false;
  FilterThresholds thresholds;
  Common common;
};

int do_judgments(const JudgmentArgs& a, std::ostream& out, std::ostream& err) {
  if (a.ratios.size() != 3) throw ConfigError("--ratios takes exactly three values");
  const auto records = read_judgments(a.input);
  std::vector<std::string> all_ids;
  for (const auto& r : records) all_ids.push_back(r.sample_id);
  std::sort(all_ids.begin(), all_ids.end());
  all_ids.erase(std::unique(all_ids.begin(), all_ids.end()), all_ids.end());

  const auto filtered = filter_evaluators(records, a.thresholds);
  const auto agg = aggregate_judgments(filtered.kept, all_ids, a.median ? Reduction::median : Reduction::mean);
  std::vector<std::string> kept_ids;
  std::vector<double> values;
  for (const auto& s : agg.scores) {
    kept_ids.push_back(s.sample_id);
    values.push_back(s.score);
  }
  const auto splits = make_splits(kept_ids, SplitRatios{a.ratios[0], a.ratios[1], a.ratios[2]}, a.common.seed);
  const auto hist = score_distribution(values);

  if (!a.out_scores.empty()) write_file_atomic(a.out_scores, aggregated_to_jsonl(agg.scores));
  if (!a.out_splits.empty()) write_file_atomic(a.out_splits, splits_to_jsonl(splits, a.source));
  if (!a.out_hist.empty()) write_file_atomic(a.out_hist, histogram_to_json(hist) + "\n");

  for (const auto& p : filtered.excluded) {
    err << fmt::format("excluded evaluator {}: {}\n", p.evaluator_id, fmt::join(p.reasons, ", "));
  }
  for (const auto& id : agg.missing_samples) err << fmt::format("sample {} has no surviving judgments\n", id);

  if (a.common.json) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["records"] = records.size();
    j["kept_records"] = filtered.kept.size();
    j["excluded"] = json::array();
    for (const auto& p : filtered.excluded) {
      j["excluded"].push_back({{"evaluator_id", p.evaluator_id}, {"reasons", p.reasons}});
    }
    j["missing_samples"] = agg.missing_samples;
    j["samples"] = agg.scores.size();
    j["splits"] = {{"train", splits[0].sample_ids.size()},
                   {"valid", splits[1].sample_ids.size()},
                   {"test", splits[2].sample_ids.size()}};
    j["histogram"] = json::parse(histogram_to_json(hist));
    out << j.dump(2) << "\n";
  } else {
    out << fmt::format("{} records, {} kept, {} evaluators excluded, {} samples scored ({} / {} / {})\n",
                       records.size(), filtered.kept.size(), filtered.excluded.size(), agg.scores.size(),
                       splits[0].sample_ids.size(), splits[1].sample_ids.size(), splits[2].sample_ids.size());
  }
  return agg.missing_samples.empty() ? kOk : kDataError;
}

struct AblateArgs {
  std::string grid;
  std::string data;
  std::string val;
  std::string test;
  std::string config;
  std::string dataset;
  std::string statistic = "tau_c";
  std::string out_path;
  Common common;
};

int do_ablate(const AblateArgs& a, std::ostream& out, std::ostream& err) {
  const auto config = config_with_seed(a.config, a.common.seed);
  config.train.validate();
  const auto cells = a.grid == "standard" ? standard_grid(config.head) : expand_grid(parse_grid(a.grid), config.head);
  const auto train = read_bundle(a.data);
  const auto valid = read_bundle(a.val);
  const auto test = a.test.empty() ? valid : read_bundle(a.test);

  const auto outcomes = run_ablation(cells, train, valid, test, config.train, parse_statistic(a.statistic),
                                     dataset_tag(a.dataset, a.test.empty() ? a.val : a.test), a.common.jobs);
  std::vector<EvalReport> reports;
  json errors = json::array();
  for (const auto& o : outcomes) {
    if (o.report) {
      reports.push_back(*o.report);
    } else {
      err << fmt::format("cell {}: {}\n", o.cell.label, o.error);
      errors.push_back({{"cell", o.cell.label}, {"error", o.error}});
    }
  }
  auto doc = json::parse(reports_to_json(reports));
  doc["cell_errors"] = errors;
  if (!a.out_path.empty()) write_file_atomic(a.out_path, doc.dump(2) + "\n");
  if (a.common.json) {
    out << doc.dump(2) << "\n";
  } else {
    emit_reports(out, reports, false, "");
  }
  return kOk;
}

}  // namespace

int run(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"polos: learned caption-evaluation head, training and benchmark protocols", "polos"};
  app.require_subcommand(1);

  ValidateArgs validate;
  auto* v = app.add_subcommand("validate", "Check a PEB bundle against its invariants");
  v->add_option("bundle", validate.bundle, "Bundle path")->required();
  add_common(v, validate.common);

  SynthArgs synth;
  auto* sy = app.add_subcommand("synth", "Write a seeded synthetic bundle");
  sy->add_option("--out", synth.out, "Output bundle")->required();
  sy->add_option("--count", synth.spec.count, "Number of samples");
  sy->add_option("--d-clip", synth.spec.dims.d_clip, "CLIP dimension")->check(CLI::PositiveNumber);
  sy->add_option("--d-rb", synth.spec.dims.d_rb, "RoBERTa dimension")->check(CLI::PositiveNumber);
  sy->add_option("--min-refs", synth.spec.min_refs, "Minimum references per sample");
  sy->add_option("--max-refs", synth.spec.max_refs, "Maximum references per sample");
  sy->add_option("--scores", synth.scores, "quality | random | none");
  sy->add_option("--prefix", synth.spec.id_prefix, "sample_id prefix");
  add_common(sy, synth.common);

  TrainArgs train;
  auto* tr = app.add_subcommand("train", "Fit the head with Adam and early stopping");
  tr->add_option("--data", train.data, "Training bundle")->required();
  tr->add_option("--val", train.val, "Validation bundle")->required();
  tr->add_option("--config", train.config, "key = value config file");
  tr->add_option("--checkpoint", train.checkpoint, "Output checkpoint")->required();
  tr->add_option("--log", train.log, "TrainLog JSONL output");
  tr->add_flag("--timing", train.timing, "Include wall time in the TrainLog");
  tr->add_flag("--verbose", train.verbose, "Per-epoch progress on stderr");
  add_common(tr, train.common);

  ScoreArgs score_args;
  auto* sc = app.add_subcommand("score", "Score every sample of a bundle");
  sc->add_option("--data", score_args.data, "Bundle")->required();
  sc->add_option("--checkpoint", score_args.checkpoint, "Trained checkpoint")->required();
  sc->add_option("--out", score_args.out_path, "Write JSONL scores here");
  add_common(sc, score_args.common);

  EvalArgs corr;
  auto* ec = app.add_subcommand("eval-corr", "Kendall correlation against human scores");
  ec->add_option("--data", corr.data, "Bundle with human scores")->required();
  ec->add_option("--checkpoint", corr.checkpoint, "Trained checkpoint")->required();
  ec->add_option("--statistic", corr.statistic, "tau_b | tau_c")->check(CLI::IsMember({"tau_b", "tau_c"}));
  ec->add_option("--dataset", corr.dataset, "Dataset tag for the report");
  ec->add_option("--out", corr.out_path, "Write the JSON report here");
  add_common(ec, corr.common);

  EvalArgs pascal;
  auto* ep = app.add_subcommand("eval-pascal", "PASCAL-50S pairwise accuracy");
  ep->add_option("--data", pascal.data, "Bundle")->required();
  ep->add_option("--manifest", pascal.manifest, "Pair manifest (JSONL)")->required();
  ep->add_option("--checkpoint", pascal.checkpoint, "Trained checkpoint")->required();
  ep->add_option("--draws", pascal.draws, "References drawn per pair")->check(CLI::PositiveNumber);
  ep->add_option("--repeats", pascal.repeats, "Seeded draws averaged per pair")->check(CLI::PositiveNumber);
  ep->add_option("--dataset", pascal.dataset, "Dataset tag for the report");
  ep->add_option("--out", pascal.out_path, "Write the JSON report here");
  add_common(ep, pascal.common);

  EvalArgs foil;
  auto* ef = app.add_subcommand("eval-foil", "FOIL hallucination accuracy");
  ef->add_option("--data", foil.data, "Bundle")->required();
  ef->add_option("--manifest", foil.manifest, "Pair manifest (JSONL)")->required();
  ef->add_option("--checkpoint", foil.checkpoint, "Trained checkpoint")->required();
  ef->add_option("--refs", foil.refs, "Restrict to the 1- or 4-reference setting")->check(CLI::IsMember({1, 4}));
  ef->add_option("--dataset", foil.dataset, "Dataset tag for the report");
  ef->add_option("--out", foil.out_path, "Write the JSON report here");
  add_common(ef, foil.common);

  JudgmentArgs judg;
  auto* jd = app.add_subcommand("judgments", "Normalize, filter, aggregate and split raw judgments");
  jd->add_option("--input", judg.input, "Judgment records (JSONL)")->required();
  jd->add_option("--out-scores", judg.out_scores, "Aggregated scores (JSONL)");
  jd->add_option("--out-splits", judg.out_splits, "Split manifest (JSONL)");
  jd->add_option("--out-hist", judg.out_hist, "Histogram (JSON)");
  jd->add_option("--source", judg.source, "Dataset tag written to the split manifest");
  jd->add_option("--ratios", judg.ratios, "train valid test ratios")->delimiter(',')->expected(3);
  jd->add_flag("--median", judg.median, "Median instead of mean aggregation");
  jd->add_option("--min-response-time", judg.thresholds.min_median_response_time, "Seconds");
  jd->add_option("--max-constant-run", judg.thresholds.max_constant_run, "Identical-rating run limit");
  jd->add_option("--min-distinct", judg.thresholds.min_distinct_ratings, "Minimum distinct ratings");
  add_common(jd, judg.common);

  AblateArgs ablate;
  auto* ab = app.add_subcommand("ablate", "Train and evaluate one head per grid cell");
  ab->add_option("--grid", ablate.grid, "'standard' or field[=v1|v2],...")->required();
  ab->add_option("--data", ablate.data, "Training bundle")->required();
  ab->add_option("--val", ablate.val, "Validation bundle")->required();
  ab->add_option("--test", ablate.test, "Evaluation bundle (defaults to --val)");
  ab->add_option("--config", ablate.config, "Base key = value config");
  ab->add_option("--statistic", ablate.statistic, "tau_b | tau_c")->check(CLI::IsMember({"tau_b", "tau_c"}));
  ab->add_option("--dataset", ablate.dataset, "Dataset tag for the reports");
  ab->add_option("--out", ablate.out_path, "Write the JSON reports here");
  add_common(ab, ablate.common);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (v->parsed()) return do_validate(validate, out);
    if (sy->parsed()) return do_synth(synth, out);
    if (tr->parsed()) return do_train(train, out, err);
    if (sc->parsed()) return do_score(score_args, out);
    if (ec->parsed()) return do_eval_corr(corr, out);
    if (ep->parsed()) return do_eval_pascal(pascal, out);
    if (ef->parsed()) return do_eval_foil(foil, out);
    if (jd->parsed()) return do_judgments(judg, out, err);
    if (ab->parsed()) return do_ablate(ablate, out, err);
  } catch (const ConfigError& e) {
    err << "polos: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "polos: " << e.what() << "\n";
    return kDataError;
  }
  return kUsage;
}

}  // namespace polos::cli
