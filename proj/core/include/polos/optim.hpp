#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "polos/embed_io.hpp"
#include "polos/head.hpp"

namespace polos {

struct TrainConfig {
  double learning_rate = 3.0e-5;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double epsilon = 1e-8;
  std::size_t batch_size = 64;
  std::size_t patience = 5;
  std::size_t max_epochs = 100;
  std::uint64_t seed = 0;
  bool shuffle = true;

  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct AdamState {
  HeadParams m;
  HeadParams v;
  std::uint64_t t = 0;

  static AdamState for_params(const HeadParams& params);
};

/// Bias-corrected Adam on raw buffers. `step` is the post-increment step
/// count (1 on the first update).
void adam_update(std::span<double> theta, std::span<const double> grad, std::span<double> m, std::span<double> v,
                 std::uint64_t step, const TrainConfig& config);

/// One Adam update of every parameter buffer; advances state.t.
void adam_step(HeadParams& params, const HeadParams& grads, AdamState& state, const TrainConfig& config);

/// One pass over `train` in seeded mini-batches. Returns the mean per-sample
/// squared error measured before each batch's update.
double train_epoch(std::span<const EmbeddingSample> train, HeadParams& params, AdamState& state,
                   const TrainConfig& config, const HeadConfig& head, std::size_t epoch);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  std::optional<double> valid_tau;  // empty when the statistic is undefined
  double wall_seconds = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  std::optional<double> best_tau;
};

/// Validation statistic evaluated after each epoch; empty = undefined.
using ValidationFn = std::function<std::optional<double>(const HeadParams&, std::size_t epoch)>;

struct FitResult {
  HeadParams params;  // snapshot from log.best_epoch
  TrainLog log;
};

struct FitOptions {
  unsigned jobs = 1;
  ValidationFn validate;  // defaults to tau-c against valid scores
  std::function<void(const EpochRecord&)> on_epoch;
};

/// Trains from init_params(head) with early stopping on validation tau-c.
/// Stops once `patience` consecutive epochs fail to beat the best tau
/// strictly, or at max_epochs, and returns the best epoch's parameters.
FitResult fit(std::span<const EmbeddingSample> train, std::span<const EmbeddingSample> valid, const HeadConfig& head,
              const TrainConfig& config, const FitOptions& options = {});

/// Tau-c between head predictions and human scores on `samples`.
std::optional<double> validation_tau(std::span<const EmbeddingSample> samples, const HeadParams& params,
                                     const HeadConfig& head, unsigned jobs = 1);

/// One JSON object per epoch. Wall time is included only on request so that
/// logs from identical runs compare byte-for-byte.
std::string train_log_to_jsonl(const TrainLog& log, bool include_timing = false);

/// Mean squared error of head predictions against human scores.
double evaluate_mse(std::span<const EmbeddingSample> samples, const HeadParams& params, const HeadConfig& head);

}  // namespace polos
