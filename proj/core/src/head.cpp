#include "polos/head.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include <fmt/format.h>

#include "polos/error.hpp"
#include "polos/rng.hpp"

namespace polos {

namespace {

constexpr std::size_t kScoreChunk = 64;

using Eigen::Index;
using Eigen::MatrixXd;

template <typename T>
void write_fusion(double* out, std::span<const T> c, std::span<const T> r, FusionMode mode) {
  const std::size_t d = c.size();
  for (std::size_t k = 0; k < d; ++k) {
    const double ck = c[k];
    const double rk = r[k];
    out[k] = ck;
    out[d + k] = rk;
    if (mode == FusionMode::full) {
      out[2 * d + k] = std::abs(ck - rk);
      out[3 * d + k] = ck * rk;
    }
  }
}

// Dimensions implied by a sample, checked for internal consistency.
Dims sample_dims(const EmbeddingSample& s) {
  Dims dims{static_cast<std::uint32_t>(s.cand_clip.size()), static_cast<std::uint32_t>(s.cand_rb.size())};
  if (s.refs_clip.size() != s.refs_rb.size()) {
    throw DimensionError(fmt::format("sample '{}': ref count mismatch", s.sample_id));
  }
  if (s.refs_clip.empty()) throw DimensionError(fmt::format("sample '{}': no references", s.sample_id));
  bool ok = s.img.size() == dims.d_clip;
  for (const auto& r : s.refs_clip) ok = ok && r.size() == dims.d_clip;
  for (const auto& r : s.refs_rb) ok = ok && r.size() == dims.d_rb;
  if (!ok) throw DimensionError(fmt::format("sample '{}': inconsistent vector dimensions", s.sample_id));
  return dims;
}

void write_h_inter(double* out, const EmbeddingSample& s, std::size_t i, const HeadConfig& config) {
  const std::span<const float> c_clip(s.cand_clip);
  if (config.use_clip_text) {
    write_fusion(out, c_clip, std::span<const float>(s.refs_clip[i]), config.fusion_mode);
    out += fusion_width(c_clip.size(), config.fusion_mode);
  }
  if (config.use_image) {
    write_fusion(out, c_clip, std::span<const float>(s.img), config.fusion_mode);
    out += fusion_width(c_clip.size(), config.fusion_mode);
  }
  if (config.use_roberta) {
    write_fusion(out, std::span<const float>(s.cand_rb), std::span<const float>(s.refs_rb[i]),
                 config.fusion_mode);
  }
}

// One column of h_inter per (sample, reference), samples laid out in order.
struct InputBlock {
  MatrixXd x;
  std::vector<std::size_t> offsets;  // first column of each sample; size = samples + 1
};

InputBlock build_inputs(std::span<const EmbeddingSample* const> samples, const HeadParams& params,
                        const HeadConfig& config) {
  InputBlock block;
  block.offsets.reserve(samples.size() + 1);
  block.offsets.push_back(0);
  for (const auto* s : samples) {
    const Dims dims = sample_dims(*s);
    const auto width = h_inter_size(config, dims);
    if (width != params.input_dim()) {
      throw DimensionError(fmt::format("sample '{}': h_inter has {} entries but the head expects {}",
                                       s->sample_id, width, params.input_dim()));
    }
    block.offsets.push_back(block.offsets.back() + s->n_refs());
  }
  block.x.resize(static_cast<Index>(params.input_dim()), static_cast<Index>(block.offsets.back()));
  for (std::size_t k = 0; k < samples.size(); ++k) {
    for (std::size_t i = 0; i < samples[k]->n_refs(); ++i) {
      write_h_inter(block.x.col(static_cast<Index>(block.offsets[k] + i)).data(), *samples[k], i, config);
    }
  }
  return block;
}

void activate(MatrixXd& z, Activation act) {
  switch (act) {
    case Activation::relu:
      z = z.cwiseMax(0.0);
      break;
    case Activation::tanh:
      z = z.array().tanh().matrix();
      break;
    case Activation::identity:
      break;
  }
}

// Elementwise derivative of the activation given pre- and post-activation values.
MatrixXd activation_grad(const MatrixXd& pre, const MatrixXd& post, Activation act) {
  switch (act) {
    case Activation::relu:
      return (pre.array() > 0.0).cast<double>().matrix();
    case Activation::tanh:
      return (1.0 - post.array().square()).matrix();
    case Activation::identity:
      break;
  }
  return MatrixXd::Ones(pre.rows(), pre.cols());
}

std::vector<const Layer*> chain_of(const HeadParams& params) {
  std::vector<const Layer*> chain;
  for (const auto& l : params.mlp1) chain.push_back(&l);
  for (const auto& l : params.mlp2) chain.push_back(&l);
  return chain;
}

struct Trace {
  std::vector<MatrixXd> pre;
  std::vector<MatrixXd> post;
};

// Runs the full chain; returns the 1 x M logits.
Eigen::RowVectorXd forward(const MatrixXd& x, const std::vector<const Layer*>& chain, Trace* trace) {
  MatrixXd a;
  const MatrixXd* input = &x;
  for (std::size_t l = 0; l < chain.size(); ++l) {
    const Layer& layer = *chain[l];
    MatrixXd z(layer.weight.rows(), input->cols());
    z.noalias() = layer.weight * *input;
    z.colwise() += layer.bias;
    if (trace != nullptr) trace->pre.push_back(z);
    activate(z, layer.activation);
    if (trace != nullptr) {
      trace->post.push_back(z);
      input = &trace->post.back();
    } else {
      a = std::move(z);
      input = &a;
    }
  }
  Eigen::RowVectorXd logits = input->row(0);
  if (!logits.allFinite()) throw NumericError("non-finite logit in head forward pass");
  return logits;
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

std::vector<ScoreOutput> score_pointers(std::span<const EmbeddingSample* const> samples, const HeadParams& params,
                                        const HeadConfig& config) {
  params.validate();
  const auto block = build_inputs(samples, params, config);
  const auto logits = forward(block.x, chain_of(params), nullptr);
  std::vector<ScoreOutput> out;
  out.reserve(samples.size());
  for (std::size_t k = 0; k < samples.size(); ++k) {
    std::vector<double> per_ref;
    per_ref.reserve(samples[k]->n_refs());
    for (auto c = block.offsets[k]; c < block.offsets[k + 1]; ++c) {
      per_ref.push_back(sigmoid(logits(static_cast<Index>(c))));
    }
    out.push_back(aggregate_scores(std::move(per_ref), config.aggregate));
  }
  return out;
}

}  // namespace

std::string_view to_string(Aggregate a) { return a == Aggregate::max ? "max" : "mean"; }

std::string_view to_string(FusionMode f) { return f == FusionMode::full ? "full" : "concat_only"; }

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::relu:
      return "relu";
    case Activation::tanh:
      return "tanh";
    case Activation::identity:
      return "identity";
  }
  return "?";
}

void HeadConfig::validate() const {
  if (!use_clip_text && !use_roberta) {
    throw ConfigError("at least one of use_clip_text, use_roberta must be enabled");
  }
  if (d_h == 0) throw ConfigError("d_h must be positive");
  for (const auto w : mlp1_hidden) {
    if (w == 0) throw ConfigError("mlp1_hidden widths must be positive");
  }
  for (const auto w : mlp2_hidden) {
    if (w == 0) throw ConfigError("mlp2_hidden widths must be positive");
  }
}

std::size_t fusion_width(std::size_t d, FusionMode mode) { return mode == FusionMode::full ? 4 * d : 2 * d; }

std::size_t h_inter_size(const HeadConfig& config, const Dims& dims) {
  std::size_t n = 0;
  if (config.use_clip_text) n += fusion_width(dims.d_clip, config.fusion_mode);
  if (config.use_image) n += fusion_width(dims.d_clip, config.fusion_mode);
  if (config.use_roberta) n += fusion_width(dims.d_rb, config.fusion_mode);
  return n;
}

Eigen::VectorXd fuse(std::span<const double> c, std::span<const double> r) {
  if (c.size() != r.size()) {
    throw DimensionError(fmt::format("fuse: dimension mismatch ({} vs {})", c.size(), r.size()));
  }
  Eigen::VectorXd out(static_cast<Index>(4 * c.size()));
  write_fusion(out.data(), c, r, FusionMode::full);
  return out;
}

Eigen::VectorXd fuse_concat(std::span<const double> c, std::span<const double> r) {
  if (c.size() != r.size()) {
    throw DimensionError(fmt::format("fuse: dimension mismatch ({} vs {})", c.size(), r.size()));
  }
  Eigen::VectorXd out(static_cast<Index>(2 * c.size()));
  write_fusion(out.data(), c, r, FusionMode::concat_only);
  return out;
}

Eigen::VectorXd build_h_inter(const EmbeddingSample& sample, std::size_t ref_index, const HeadConfig& config) {
  config.validate();
  const Dims dims = sample_dims(sample);
  if (ref_index >= sample.n_refs()) {
    throw DimensionError(fmt::format("reference index {} out of range (n_refs = {})", ref_index, sample.n_refs()));
  }
  Eigen::VectorXd out(static_cast<Index>(h_inter_size(config, dims)));
  write_h_inter(out.data(), sample, ref_index, config);
  return out;
}

std::size_t HeadParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto* layers : {&mlp1, &mlp2}) {
    for (const auto& l : *layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  }
  return n;
}

HeadParams HeadParams::zeros_like() const {
  HeadParams z = *this;
  for (auto* layers : {&z.mlp1, &z.mlp2}) {
    for (auto& l : *layers) {
      l.weight.setZero();
      l.bias.setZero();
    }
  }
  return z;
}

void HeadParams::validate() const {
  if (mlp1.empty() || mlp2.empty()) throw DimensionError("head needs at least one layer in each MLP");
  const auto chain = chain_of(*this);
  for (std::size_t l = 0; l < chain.size(); ++l) {
    const Layer& layer = *chain[l];
    if (layer.in() == 0 || layer.out() == 0) throw DimensionError(fmt::format("layer {} has a zero dimension", l));
    if (static_cast<std::size_t>(layer.bias.size()) != layer.out()) {
      throw DimensionError(fmt::format("layer {}: bias size {} != output size {}", l, layer.bias.size(), layer.out()));
    }
    if (l > 0 && chain[l - 1]->out() != layer.in()) {
      throw DimensionError(fmt::format("layer {}: input {} does not chain from output {}", l, layer.in(),
                                       chain[l - 1]->out()));
    }
  }
  if (mlp2.back().out() != 1) throw DimensionError("final layer must produce a single logit");
}

void HeadParams::for_each_buffer(const std::function<void(std::span<double>)>& fn) {
  for (auto* layers : {&mlp1, &mlp2}) {
    for (auto& l : *layers) {
      fn(std::span<double>(l.weight.data(), static_cast<std::size_t>(l.weight.size())));
      fn(std::span<double>(l.bias.data(), static_cast<std::size_t>(l.bias.size())));
    }
  }
}

void HeadParams::for_each_buffer(const std::function<void(std::span<const double>)>& fn) const {
  for (const auto* layers : {&mlp1, &mlp2}) {
    for (const auto& l : *layers) {
      fn(std::span<const double>(l.weight.data(), static_cast<std::size_t>(l.weight.size())));
      fn(std::span<const double>(l.bias.data(), static_cast<std::size_t>(l.bias.size())));
    }
  }
}

bool operator==(const HeadParams& a, const HeadParams& b) {
  auto same = [](const std::vector<Layer>& x, const std::vector<Layer>& y) {
    if (x.size() != y.size()) return false;
    for (std::size_t k = 0; k < x.size(); ++k) {
      if (x[k].activation != y[k].activation || x[k].weight.rows() != y[k].weight.rows() ||
          x[k].weight.cols() != y[k].weight.cols() || x[k].bias.size() != y[k].bias.size()) {
        return false;
      }
      if (x[k].weight != y[k].weight || x[k].bias != y[k].bias) return false;
    }
    return true;
  };
  return same(a.mlp1, b.mlp1) && same(a.mlp2, b.mlp2);
}

HeadParams init_params(const HeadConfig& config, const Dims& dims) {
  config.validate();
  const std::size_t input = h_inter_size(config, dims);
  if (input == 0) throw DimensionError("zero-dimension input layer");

  Rng rng(derive_seed(config.seed, "init"));
  auto make_layer = [&](std::size_t in, std::size_t out, Activation act) {
    if (in == 0 || out == 0) throw DimensionError("zero-dimension layer");
    Layer l;
    l.weight.resize(static_cast<Index>(out), static_cast<Index>(in));
    l.bias = Eigen::VectorXd::Zero(static_cast<Index>(out));
    l.activation = act;
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    for (Index r = 0; r < l.weight.rows(); ++r) {
      for (Index c = 0; c < l.weight.cols(); ++c) {
        // Clamp keeps |w| <= bound exactly despite rounding in the affine map.
        l.weight(r, c) = std::clamp(rng.uniform(-bound, bound), -bound, bound);
      }
    }
    return l;
  };

  HeadParams params;
  std::size_t width = input;
  for (const auto h : config.mlp1_hidden) {
    params.mlp1.push_back(make_layer(width, h, config.activation));
    width = h;
  }
  params.mlp1.push_back(make_layer(width, config.d_h, config.activation));
  width = config.d_h;
  for (const auto h : config.mlp2_hidden) {
    params.mlp2.push_back(make_layer(width, h, config.activation));
    width = h;
  }
  params.mlp2.push_back(make_layer(width, 1, Activation::identity));
  return params;
}

ScoreOutput aggregate_scores(std::vector<double> per_ref_scores, Aggregate aggregate) {
  if (per_ref_scores.empty()) throw DimensionError("cannot aggregate zero reference scores");
  ScoreOutput out;
  const auto best = std::max_element(per_ref_scores.begin(), per_ref_scores.end());
  out.argmax_ref = static_cast<std::size_t>(std::distance(per_ref_scores.begin(), best));
  if (aggregate == Aggregate::max) {
    out.y_hat = *best;
  } else {
    double sum = 0.0;
    for (const double s : per_ref_scores) sum += s;
    out.y_hat = sum / static_cast<double>(per_ref_scores.size());
  }
  out.per_ref_scores = std::move(per_ref_scores);
  return out;
}

ScoreOutput score(const EmbeddingSample& sample, const HeadParams& params, const HeadConfig& config) {
  config.validate();
  const EmbeddingSample* one[] = {&sample};
  return std::move(score_pointers(one, params, config).front());
}

std::vector<ScoreOutput> score_batch(std::span<const EmbeddingSample> samples, const HeadParams& params,
                                     const HeadConfig& config, unsigned jobs) {
  config.validate();
  std::vector<ScoreOutput> out(samples.size());
  const std::size_t n_chunks = (samples.size() + kScoreChunk - 1) / kScoreChunk;

  auto run_chunk = [&](std::size_t chunk) {
    const std::size_t begin = chunk * kScoreChunk;
    const std::size_t end = std::min(samples.size(), begin + kScoreChunk);
    std::vector<const EmbeddingSample*> ptrs;
    ptrs.reserve(end - begin);
    for (std::size_t k = begin; k < end; ++k) ptrs.push_back(&samples[k]);
    auto scored = score_pointers(ptrs, params, config);
    std::move(scored.begin(), scored.end(), out.begin() + static_cast<std::ptrdiff_t>(begin));
  };

  const unsigned workers = std::max(1U, std::min<unsigned>(jobs, static_cast<unsigned>(n_chunks)));
  if (workers <= 1) {
    for (std::size_t c = 0; c < n_chunks; ++c) run_chunk(c);
    return out;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t c = next++; c < n_chunks; c = next++) {
          try {
            run_chunk(c);
          } catch (...) {
            const std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

LossGradient batch_gradient(std::span<const EmbeddingSample* const> samples, std::span<const double> targets,
                            const HeadParams& params, const HeadConfig& config) {
  config.validate();
  if (samples.empty()) throw DataError("gradient of an empty batch");
  if (samples.size() != targets.size()) throw DimensionError("one target per sample required");
  for (const double y : targets) {
    if (!(y >= 0.0 && y <= 1.0)) throw DataError(fmt::format("target {} outside [0, 1]", y));
  }

  params.validate();
  const auto block = build_inputs(samples, params, config);
  const auto chain = chain_of(params);
  Trace trace;
  const auto logits = forward(block.x, chain, &trace);

  // Upstream gradient d(loss)/d(logit) for every column that receives any.
  const double inv_batch = 1.0 / static_cast<double>(samples.size());
  double loss_sum = 0.0;
  std::vector<Index> active;
  std::vector<double> upstream;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const auto first = block.offsets[k];
    const auto n = block.offsets[k + 1] - first;
    std::vector<double> per_ref(n);
    for (std::size_t i = 0; i < n; ++i) per_ref[i] = sigmoid(logits(static_cast<Index>(first + i)));
    const auto agg = aggregate_scores(per_ref, config.aggregate);
    const double err = agg.y_hat - targets[k];
    loss_sum += err * err;
    const double d_yhat = 2.0 * err * inv_batch;
    if (config.aggregate == Aggregate::max) {
      const double s = per_ref[agg.argmax_ref];
      active.push_back(static_cast<Index>(first + agg.argmax_ref));
      upstream.push_back(d_yhat * s * (1.0 - s));
    } else {
      const double w = 1.0 / static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) {
        active.push_back(static_cast<Index>(first + i));
        upstream.push_back(d_yhat * w * per_ref[i] * (1.0 - per_ref[i]));
      }
    }
  }

  const auto cols = static_cast<Index>(active.size());
  auto gather = [&](const MatrixXd& m) {
    if (cols == m.cols()) return m;
    MatrixXd g(m.rows(), cols);
    for (Index j = 0; j < cols; ++j) g.col(j) = m.col(active[static_cast<std::size_t>(j)]);
    return g;
  };

  LossGradient result;
  result.loss = loss_sum * inv_batch;
  result.grads = params.zeros_like();
  std::vector<Layer*> grad_chain;
  for (auto& l : result.grads.mlp1) grad_chain.push_back(&l);
  for (auto& l : result.grads.mlp2) grad_chain.push_back(&l);

  MatrixXd delta = Eigen::Map<const Eigen::RowVectorXd>(upstream.data(), cols);
  for (std::size_t l = chain.size(); l-- > 0;) {
    const MatrixXd input = l == 0 ? gather(block.x) : gather(trace.post[l - 1]);
    grad_chain[l]->weight.noalias() = delta * input.transpose();
    grad_chain[l]->bias = delta.rowwise().sum();
    if (l > 0) {
      const MatrixXd back = chain[l]->weight.transpose() * delta;
      delta = back.cwiseProduct(
          activation_grad(gather(trace.pre[l - 1]), input, chain[l - 1]->activation));
    }
  }

  bool finite = std::isfinite(result.loss);
  result.grads.for_each_buffer([&](std::span<const double> buf) {
    finite = finite && std::all_of(buf.begin(), buf.end(), [](double v) { return std::isfinite(v); });
  });
  if (!finite) throw NumericError("non-finite gradient");
  return result;
}

LossGradient score_gradient(const EmbeddingSample& sample, double target, const HeadParams& params,
                            const HeadConfig& config) {
  const EmbeddingSample* one[] = {&sample};
  const double targets[] = {target};
  return batch_gradient(one, targets, params, config);
}

}  // namespace polos
