#include "polos/optim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "polos/error.hpp"
#include "polos/kendall.hpp"
#include "polos/rng.hpp"

namespace polos {

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be finite and non-negative");
  }
  if (!(beta1 > 0.0 && beta1 < 1.0)) throw ConfigError("beta1 must lie in (0, 1)");
  if (!(beta2 > 0.0 && beta2 < 1.0)) throw ConfigError("beta2 must lie in (0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (patience == 0) throw ConfigError("patience must be at least 1");
  if (max_epochs == 0) throw ConfigError("max_epochs must be positive");
}

AdamState AdamState::for_params(const HeadParams& params) {
  return AdamState{params.zeros_like(), params.zeros_like(), 0};
}

void adam_update(std::span<double> theta, std::span<const double> grad, std::span<double> m, std::span<double> v,
                 std::uint64_t step, const TrainConfig& config) {
  if (grad.size() != theta.size() || m.size() != theta.size() || v.size() != theta.size()) {
    throw DimensionError("adam: buffer sizes disagree");
  }
  if (step == 0) throw std::invalid_argument("adam: step count starts at 1");
  const double b1 = config.beta1;
  const double b2 = config.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(step));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(step));
  for (std::size_t k = 0; k < theta.size(); ++k) {
    const double g = grad[k];
    m[k] = b1 * m[k] + (1.0 - b1) * g;
    v[k] = b2 * v[k] + (1.0 - b2) * g * g;
    const double m_hat = m[k] / correction1;
    const double v_hat = v[k] / correction2;
    theta[k] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
  }
}

void adam_step(HeadParams& params, const HeadParams& grads, AdamState& state, const TrainConfig& config) {
  std::vector<std::span<double>> p;
  std::vector<std::span<const double>> g;
  std::vector<std::span<double>> m;
  std::vector<std::span<double>> v;
  params.for_each_buffer([&](std::span<double> b) { p.push_back(b); });
  grads.for_each_buffer([&](std::span<const double> b) { g.push_back(b); });
  state.m.for_each_buffer([&](std::span<double> b) { m.push_back(b); });
  state.v.for_each_buffer([&](std::span<double> b) { v.push_back(b); });
  if (g.size() != p.size() || m.size() != p.size() || v.size() != p.size()) {
    throw DimensionError("adam: parameter, gradient and moment shapes disagree");
  }
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (g[k].size() != p[k].size()) throw DimensionError("adam: parameter and gradient shapes disagree");
    if (!std::all_of(g[k].begin(), g[k].end(), [](double x) { return std::isfinite(x); })) {
      throw NumericError("adam: non-finite gradient");
    }
  }

  ++state.t;
  for (std::size_t k = 0; k < p.size(); ++k) adam_update(p[k], g[k], m[k], v[k], state.t, config);

  for (const auto& buf : p) {
    if (!std::all_of(buf.begin(), buf.end(), [](double x) { return std::isfinite(x); })) {
      throw NumericError("adam: non-finite update");
    }
  }
}

double train_epoch(std::span<const EmbeddingSample> train, HeadParams& params, AdamState& state,
                   const TrainConfig& config, const HeadConfig& head, std::size_t epoch) {
  config.validate();
  if (train.empty()) throw DataError("empty training set");
  for (const auto& s : train) {
    if (!s.score) throw DataError(fmt::format("training sample '{}' has no score", s.sample_id));
  }

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (config.shuffle) {
    Rng rng(derive_seed(config.seed, "shuffle", epoch));
    rng.shuffle(std::span(order));
  }

  double loss_sum = 0.0;
  std::vector<const EmbeddingSample*> batch;
  std::vector<double> targets;
  for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
    const std::size_t end = std::min(order.size(), begin + config.batch_size);
    batch.clear();
    targets.clear();
    for (std::size_t k = begin; k < end; ++k) {
      batch.push_back(&train[order[k]]);
      targets.push_back(static_cast<double>(*train[order[k]].score));
    }
    const auto lg = batch_gradient(batch, targets, params, head);
    loss_sum += lg.loss * static_cast<double>(batch.size());
    adam_step(params, lg.grads, state, config);
  }
  return loss_sum / static_cast<double>(train.size());
}

std::optional<double> validation_tau(std::span<const EmbeddingSample> samples, const HeadParams& params,
                                     const HeadConfig& head, unsigned jobs) {
  const auto scored = score_batch(samples, params, head, jobs);
  std::vector<ScoredPair> pairs;
  pairs.reserve(samples.size());
  for (std::size_t k = 0; k < samples.size(); ++k) {
    if (!samples[k].score) throw DataError(fmt::format("validation sample '{}' has no score", samples[k].sample_id));
    pairs.push_back({scored[k].y_hat, static_cast<double>(*samples[k].score)});
  }
  try {
    return kendall_tau_c(pairs);
  } catch (const DegenerateStatistic&) {
    return std::nullopt;
  }
}

double evaluate_mse(std::span<const EmbeddingSample> samples, const HeadParams& params, const HeadConfig& head) {
  if (samples.empty()) throw DataError("empty sample set");
  const auto scored = score_batch(samples, params, head);
  double sum = 0.0;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    if (!samples[k].score) throw DataError(fmt::format("sample '{}' has no score", samples[k].sample_id));
    const double e = scored[k].y_hat - static_cast<double>(*samples[k].score);
    sum += e * e;
  }
  return sum / static_cast<double>(samples.size());
}

FitResult fit(std::span<const EmbeddingSample> train, std::span<const EmbeddingSample> valid, const HeadConfig& head,
              const TrainConfig& config, const FitOptions& options) {
  config.validate();
  head.validate();
  if (train.empty()) throw DataError("empty training set");
  if (valid.empty()) throw DataError("empty validation set");
  for (const auto& s : valid) {
    if (!s.score) throw DataError(fmt::format("validation sample '{}' has no score", s.sample_id));
  }

  const Dims dims{static_cast<std::uint32_t>(train.front().cand_clip.size()),
                  static_cast<std::uint32_t>(train.front().cand_rb.size())};
  HeadParams params = init_params(head, dims);
  AdamState state = AdamState::for_params(params);

  ValidationFn evaluate = options.validate;
  if (!evaluate) {
    evaluate = [&](const HeadParams& p, std::size_t) { return validation_tau(valid, p, head, options.jobs); };
  }

  FitResult result;
  double best_key = -std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = train_epoch(train, params, state, config, head, epoch);
    rec.valid_tau = evaluate(params, epoch);
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.log.epochs.push_back(rec);
    if (options.on_epoch) options.on_epoch(rec);

    // An undefined statistic never counts as an improvement; the first epoch
    // always seeds the snapshot.
    const double key = rec.valid_tau.value_or(-std::numeric_limits<double>::infinity());
    if (epoch == 1 || key > best_key) {
      best_key = key;
      result.log.best_epoch = epoch;
      result.log.best_tau = rec.valid_tau;
      result.params = params;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  return result;
}

}  // namespace polos
