#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "polos/embed_io.hpp"

namespace polos {

enum class Aggregate { max, mean };
enum class FusionMode { full, concat_only };
enum class Activation { relu, tanh, identity };

std::string_view to_string(Aggregate a);
std::string_view to_string(FusionMode f);
std::string_view to_string(Activation a);

/// Architecture and ablation switches of the scoring head.
///
/// MLP1 maps h_inter through `mlp1_hidden` to `d_h` (every layer activated);
/// MLP2 maps d_h through `mlp2_hidden` to a single logit (last layer linear).
struct HeadConfig {
  Aggregate aggregate = Aggregate::max;
  FusionMode fusion_mode = FusionMode::full;
  bool use_image = true;
  bool use_clip_text = true;
  bool use_roberta = true;
  std::vector<std::size_t> mlp1_hidden{1024};
  std::size_t d_h = 512;
  std::vector<std::size_t> mlp2_hidden{128};
  Activation activation = Activation::relu;
  std::uint64_t seed = 0;

  /// Throws ConfigError when no text stream is enabled or a width is zero.
  void validate() const;

  friend bool operator==(const HeadConfig&, const HeadConfig&) = default;
};

/// Length of F(c, r) for d-dimensional inputs under the given mode.
std::size_t fusion_width(std::size_t d, FusionMode mode);

/// Length of h_inter for the enabled streams.
std::size_t h_inter_size(const HeadConfig& config, const Dims& dims);

/// F(c, r) = [c; r; |c - r|; c * r] (elementwise product).
Eigen::VectorXd fuse(std::span<const double> c, std::span<const double> r);

/// F'(c, r) = [c; r], the ablated fusion.
Eigen::VectorXd fuse_concat(std::span<const double> c, std::span<const double> r);

/// h_inter for reference `ref_index`:
/// [F(c_clip, r_clip_i); F(c_clip, v); F(c_rb, r_rb_i)], minus disabled streams.
Eigen::VectorXd build_h_inter(const EmbeddingSample& sample, std::size_t ref_index,
                              const HeadConfig& config);

struct Layer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
  Activation activation = Activation::relu;

  [[nodiscard]] std::size_t in() const { return static_cast<std::size_t>(weight.cols()); }
  [[nodiscard]] std::size_t out() const { return static_cast<std::size_t>(weight.rows()); }
};

struct HeadParams {
  std::vector<Layer> mlp1;
  std::vector<Layer> mlp2;

  [[nodiscard]] std::size_t input_dim() const { return mlp1.empty() ? 0 : mlp1.front().in(); }
  [[nodiscard]] std::size_t parameter_count() const;

  /// Zero-valued parameters with the same shape.
  [[nodiscard]] HeadParams zeros_like() const;

  /// Throws DimensionError unless layers chain and MLP2 ends in one output.
  void validate() const;

  /// Visits every weight and bias buffer in a fixed order (mlp1 then mlp2,
  /// weight before bias).
  void for_each_buffer(const std::function<void(std::span<double>)>& fn);
  void for_each_buffer(const std::function<void(std::span<const double>)>& fn) const;

  friend bool operator==(const HeadParams& a, const HeadParams& b);
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases, seeded by
/// config.seed.
HeadParams init_params(const HeadConfig& config, const Dims& dims);

struct ScoreOutput {
  double y_hat = 0.0;
  std::vector<double> per_ref_scores;
  std::size_t argmax_ref = 0;  // lowest index among ties; meaningful for max
};

ScoreOutput score(const EmbeddingSample& sample, const HeadParams& params, const HeadConfig& config);

/// Scores many samples. Work is cut into fixed-size chunks so results do not
/// depend on `jobs`.
std::vector<ScoreOutput> score_batch(std::span<const EmbeddingSample> samples, const HeadParams& params,
                                     const HeadConfig& config, unsigned jobs = 1);

/// Reduces per-reference scores to y_hat (max or mean); sets argmax_ref.
ScoreOutput aggregate_scores(std::vector<double> per_ref_scores, Aggregate aggregate);

struct LossGradient {
  double loss = 0.0;
  HeadParams grads;
};

/// Squared error (y_hat - target)^2 and its exact gradient.
LossGradient score_gradient(const EmbeddingSample& sample, double target, const HeadParams& params,
                            const HeadConfig& config);

/// Mean squared error over a batch and the mean of per-sample gradients.
LossGradient batch_gradient(std::span<const EmbeddingSample* const> samples, std::span<const double> targets,
                            const HeadParams& params, const HeadConfig& config);

}  // namespace polos
