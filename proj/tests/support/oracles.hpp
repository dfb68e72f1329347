#pragma once

// Reference implementations used only by tests. They share no code with the
// library: plain loops, no Eigen, no sorting tricks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "polos/embed_io.hpp"
#include "polos/head.hpp"
#include "polos/kendall.hpp"
#include "polos/rng.hpp"

namespace oracle {

struct BruteCounts {
  std::int64_t concordant = 0;
  std::int64_t discordant = 0;
  std::int64_t tied_x_only = 0;
  std::int64_t tied_y_only = 0;
  std::size_t distinct_x = 0;
  std::size_t distinct_y = 0;
  std::size_t n = 0;
};

inline BruteCounts brute_counts(const std::vector<double>& x, const std::vector<double>& y) {
  BruteCounts c;
  c.n = x.size();
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      const double dx = x[i] - x[j];
      const double dy = y[i] - y[j];
      if (dx == 0 && dy == 0) continue;
      if (dx == 0) {
        ++c.tied_x_only;
      } else if (dy == 0) {
        ++c.tied_y_only;
      } else if ((dx > 0) == (dy > 0)) {
        ++c.concordant;
      } else {
        ++c.discordant;
      }
    }
  }
  c.distinct_x = std::set<double>(x.begin(), x.end()).size();
  c.distinct_y = std::set<double>(y.begin(), y.end()).size();
  return c;
}

inline double tau_b(const std::vector<double>& x, const std::vector<double>& y) {
  const auto c = brute_counts(x, y);
  const double cd = static_cast<double>(c.concordant + c.discordant);
  return static_cast<double>(c.concordant - c.discordant) /
         std::sqrt((cd + static_cast<double>(c.tied_x_only)) * (cd + static_cast<double>(c.tied_y_only)));
}

inline double tau_c(const std::vector<double>& x, const std::vector<double>& y) {
  const auto c = brute_counts(x, y);
  const double m = static_cast<double>(std::min(c.distinct_x, c.distinct_y));
  const double n = static_cast<double>(c.n);
  return 2.0 * m * static_cast<double>(c.concordant - c.discordant) / (n * n * (m - 1.0));
}

inline std::vector<polos::ScoredPair> zip(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<polos::ScoredPair> out;
  for (std::size_t i = 0; i < x.size(); ++i) out.push_back({x[i], y[i]});
  return out;
}

// ---- head forward pass --------------------------------------------------

inline void append_fusion(std::vector<double>& out, const std::vector<float>& c, const std::vector<float>& r,
                          polos::FusionMode mode) {
  for (float v : c) out.push_back(v);
  for (float v : r) out.push_back(v);
  if (mode == polos::FusionMode::concat_only) return;
  for (std::size_t k = 0; k < c.size(); ++k) out.push_back(std::fabs(double(c[k]) - double(r[k])));
  for (std::size_t k = 0; k < c.size(); ++k) out.push_back(double(c[k]) * double(r[k]));
}

inline std::vector<double> h_inter(const polos::EmbeddingSample& s, std::size_t i, const polos::HeadConfig& cfg) {
  std::vector<double> out;
  if (cfg.use_clip_text) append_fusion(out, s.cand_clip, s.refs_clip[i], cfg.fusion_mode);
  if (cfg.use_image) append_fusion(out, s.cand_clip, s.img, cfg.fusion_mode);
  if (cfg.use_roberta) append_fusion(out, s.cand_rb, s.refs_rb[i], cfg.fusion_mode);
  return out;
}

struct Forward {
  std::vector<double> per_ref;
  double y_hat = 0.0;
  double min_relu_margin = std::numeric_limits<double>::infinity();  // smallest |pre-activation| at a ReLU
  double argmax_gap = std::numeric_limits<double>::infinity();       // best minus runner-up per-ref score
};

inline Forward forward(const polos::EmbeddingSample& s, const polos::HeadParams& p, const polos::HeadConfig& cfg) {
  Forward f;
  std::vector<const polos::Layer*> chain;
  for (const auto& l : p.mlp1) chain.push_back(&l);
  for (const auto& l : p.mlp2) chain.push_back(&l);
  for (std::size_t i = 0; i < s.n_refs(); ++i) {
    auto x = h_inter(s, i, cfg);
    for (const auto* l : chain) {
      std::vector<double> z(l->out(), 0.0);
      for (std::size_t r = 0; r < l->out(); ++r) {
        double acc = l->bias(static_cast<long>(r));
        for (std::size_t c = 0; c < l->in(); ++c) acc += l->weight(static_cast<long>(r), static_cast<long>(c)) * x[c];
        switch (l->activation) {
          case polos::Activation::relu:
            f.min_relu_margin = std::min(f.min_relu_margin, std::fabs(acc));
            acc = acc > 0 ? acc : 0.0;
            break;
          case polos::Activation::tanh:
            acc = std::tanh(acc);
            break;
          case polos::Activation::identity:
            break;
        }
        z[r] = acc;
      }
      x = std::move(z);
    }
    f.per_ref.push_back(1.0 / (1.0 + std::exp(-x[0])));
  }
  if (cfg.aggregate == polos::Aggregate::max) {
    auto sorted = f.per_ref;
    std::sort(sorted.rbegin(), sorted.rend());
    f.y_hat = sorted[0];
    if (sorted.size() > 1) f.argmax_gap = sorted[0] - sorted[1];
  } else {
    double sum = 0;
    for (double v : f.per_ref) sum += v;
    f.y_hat = sum / static_cast<double>(f.per_ref.size());
  }
  return f;
}

inline double loss(const polos::EmbeddingSample& s, double target, const polos::HeadParams& p,
                   const polos::HeadConfig& cfg) {
  const double e = forward(s, p, cfg).y_hat - target;
  return e * e;
}

// ---- fixtures ---------------------------------------------------------------

inline std::vector<float> random_vector(polos::Rng& rng, std::size_t d, double scale = 1.0) {
  std::vector<float> v(d);
  for (auto& x : v) x = static_cast<float>(rng.normal() * scale);
  return v;
}

inline polos::EmbeddingSample random_sample(polos::Rng& rng, polos::Dims dims, std::size_t n_refs,
                                            const std::string& id = "s") {
  polos::EmbeddingSample s;
  s.sample_id = id;
  s.cand_clip = random_vector(rng, dims.d_clip);
  s.cand_rb = random_vector(rng, dims.d_rb);
  for (std::size_t i = 0; i < n_refs; ++i) {
    s.refs_clip.push_back(random_vector(rng, dims.d_clip));
    s.refs_rb.push_back(random_vector(rng, dims.d_rb));
  }
  s.img = random_vector(rng, dims.d_clip);
  s.score = static_cast<float>(rng.uniform());
  return s;
}

inline polos::HeadConfig tiny_head(std::uint64_t seed = 0) {
  polos::HeadConfig c;
  c.mlp1_hidden = {6};
  c.d_h = 5;
  c.mlp2_hidden = {4};
  c.seed = seed;
  return c;
}

// The six ablation rows as HeadConfig edits of `base`.
inline std::vector<polos::HeadConfig> ablation_rows(const polos::HeadConfig& base) {
  std::vector<polos::HeadConfig> rows(6, base);
  rows[0].fusion_mode = polos::FusionMode::concat_only;
  rows[1].use_image = false;
  rows[2].use_clip_text = false;
  rows[3].use_roberta = false;
  rows[4].aggregate = polos::Aggregate::mean;
  return rows;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::path(POLOS_TEST_TMP) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::vector<double*> flat_params(polos::HeadParams& p) {
  std::vector<double*> out;
  p.for_each_buffer([&](std::span<double> buf) {
    for (auto& v : buf) out.push_back(&v);
  });
  return out;
}

inline std::vector<double> flat_values(const polos::HeadParams& p) {
  std::vector<double> out;
  p.for_each_buffer([&](std::span<const double> buf) { out.insert(out.end(), buf.begin(), buf.end()); });
  return out;
}

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t entries = 0;
};

// Central differences on every parameter against the analytic gradient.
// Relative error is |a - n| / max(|a|, |n|, floor).
inline GradCheck check_gradient(const polos::EmbeddingSample& s, double target, polos::HeadParams params,
                                const polos::HeadConfig& cfg, double step = 1e-5, double floor = 1e-6) {
  const auto analytic = flat_values(polos::score_gradient(s, target, params, cfg).grads);
  auto ptrs = flat_params(params);
  GradCheck g;
  for (std::size_t k = 0; k < ptrs.size(); ++k) {
    const double saved = *ptrs[k];
    *ptrs[k] = saved + step;
    const double up = loss(s, target, params, cfg);
    *ptrs[k] = saved - step;
    const double down = loss(s, target, params, cfg);
    *ptrs[k] = saved;
    const double numeric = (up - down) / (2 * step);
    const double denom = std::max({std::fabs(analytic[k]), std::fabs(numeric), floor});
    g.max_rel_error = std::max(g.max_rel_error, std::fabs(analytic[k] - numeric) / denom);
    ++g.entries;
  }
  return g;
}

// Replaces every weight and bias with N(0, scale^2 / fan_in) draws so that
// biases are non-zero and activations are exercised on both sides.
inline void randomize(polos::HeadParams& p, polos::Rng& rng, double scale = 1.5) {
  for (auto* layers : {&p.mlp1, &p.mlp2}) {
    for (auto& l : *layers) {
      const double sd = scale / std::sqrt(static_cast<double>(l.in()));
      for (long r = 0; r < l.weight.rows(); ++r) {
        for (long c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = rng.normal() * sd;
        l.bias(r) = rng.normal() * 0.3;
      }
    }
  }
}

}  // namespace oracle
