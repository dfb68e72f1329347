#include "polos/synthetic.hpp"

#include <cmath>

#include <fmt/format.h>

#include "polos/error.hpp"
#include "polos/rng.hpp"

namespace polos {

namespace {

std::vector<float> gaussian(Rng& rng, std::size_t d, double scale) {
  std::vector<float> v(d);
  for (auto& x : v) x = static_cast<float>(scale * rng.normal());
  return v;
}

std::vector<float> around(Rng& rng, const std::vector<float>& center, double scale) {
  std::vector<float> v(center.size());
  for (std::size_t k = 0; k < v.size(); ++k) {
    v[k] = static_cast<float>(center[k] + scale * rng.normal());
  }
  return v;
}

std::vector<float> blend(const std::vector<float>& a, const std::vector<float>& b, double weight) {
  std::vector<float> v(a.size());
  for (std::size_t k = 0; k < v.size(); ++k) {
    v[k] = static_cast<float>(weight * a[k] + (1.0 - weight) * b[k]);
  }
  return v;
}

}  // namespace

Bundle make_synthetic_bundle(const SynthSpec& spec) {
  if (spec.dims.d_clip == 0 || spec.dims.d_rb == 0) throw ConfigError("synthetic dims must be positive");
  if (spec.min_refs == 0 || spec.min_refs > spec.max_refs) throw ConfigError("synthetic ref range invalid");

  Rng rng(derive_seed(spec.seed, "synthetic"));
  const double s_clip = 1.0 / std::sqrt(static_cast<double>(spec.dims.d_clip));
  const double s_rb = 1.0 / std::sqrt(static_cast<double>(spec.dims.d_rb));

  Bundle bundle;
  bundle.dims = spec.dims;
  bundle.samples.reserve(spec.count);
  for (std::size_t k = 0; k < spec.count; ++k) {
    EmbeddingSample s;
    s.sample_id = fmt::format("{}-{:06d}", spec.id_prefix, k);
    const std::size_t n = spec.min_refs + rng.below(spec.max_refs - spec.min_refs + 1);

    const auto center_clip = gaussian(rng, spec.dims.d_clip, s_clip);
    const auto center_rb = gaussian(rng, spec.dims.d_rb, s_rb);
    for (std::size_t i = 0; i < n; ++i) {
      s.refs_clip.push_back(around(rng, center_clip, 0.3 * s_clip));
      s.refs_rb.push_back(around(rng, center_rb, 0.3 * s_rb));
    }
    s.img = around(rng, center_clip, 0.5 * s_clip);

    const double q = rng.uniform();
    s.cand_clip = blend(s.refs_clip.front(), gaussian(rng, spec.dims.d_clip, s_clip), q);
    s.cand_rb = blend(s.refs_rb.front(), gaussian(rng, spec.dims.d_rb, s_rb), q);

    switch (spec.scores) {
      case SynthScores::none:
        break;
      case SynthScores::quality:
        s.score = static_cast<float>(q);
        break;
      case SynthScores::random:
        s.score = static_cast<float>(rng.uniform());
        break;
    }
    bundle.samples.push_back(std::move(s));
  }
  return bundle;
}

}  // namespace polos
