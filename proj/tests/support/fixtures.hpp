#pragma once

// Constructed protocol datasets shared by unit and acceptance tests.

#include <string>
#include <vector>

#include "oracles.hpp"
#include "polos/eval.hpp"
#include "polos/head.hpp"
#include "polos/optim.hpp"

namespace fixture {

// A head whose logit is exactly dot(c_clip, r_clip_i): one identity layer
// per MLP that sums the Hadamard block of the CLIP text fusion.
inline std::pair<polos::HeadConfig, polos::HeadParams> dot_product_head(polos::Dims dims) {
  polos::HeadConfig cfg;
  cfg.use_image = false;
  cfg.use_roberta = false;
  cfg.mlp1_hidden = {};
  cfg.d_h = 1;
  cfg.mlp2_hidden = {};
  cfg.activation = polos::Activation::identity;
  auto params = polos::init_params(cfg, dims).zeros_like();
  for (std::uint32_t k = 0; k < dims.d_clip; ++k) params.mlp1[0].weight(0, 3 * dims.d_clip + k) = 1.0;
  params.mlp2[0].weight(0, 0) = 1.0;
  return {cfg, params};
}

// Pairs where A's per-reference score beats B's against every reference in
// the pool, so the outcome cannot depend on which references are drawn.
// Winner alternates between A and B; categories cycle through all four.
inline std::vector<polos::PascalPair> dominance_pairs(polos::Dims dims, std::size_t count, std::size_t pool,
                                                      std::uint64_t seed) {
  polos::Rng rng(seed);
  std::vector<polos::PascalPair> pairs;
  for (std::size_t k = 0; k < count; ++k) {
    polos::PascalPair p;
    p.pair_id = "pair-" + std::to_string(k);
    p.image_id = "img-" + std::to_string(k);
    std::vector<float> axis(dims.d_clip);
    for (auto& v : axis) v = static_cast<float>(std::fabs(rng.normal()) + 0.1);
    for (std::size_t r = 0; r < pool; ++r) {
      std::vector<float> ref(dims.d_clip);
      for (std::size_t j = 0; j < ref.size(); ++j) ref[j] = axis[j] * static_cast<float>(0.5 + rng.uniform());
      p.pool_clip.push_back(ref);
      p.pool_rb.push_back(oracle::random_vector(rng, dims.d_rb));
    }
    p.img = oracle::random_vector(rng, dims.d_clip);
    polos::CaptionEmbedding good{axis, oracle::random_vector(rng, dims.d_rb)};
    polos::CaptionEmbedding bad{axis, oracle::random_vector(rng, dims.d_rb)};
    for (auto& v : bad.clip) v = -v * static_cast<float>(rng.uniform());
    p.winner = k % 2 == 0 ? polos::Winner::A : polos::Winner::B;
    p.caption_a = p.winner == polos::Winner::A ? good : bad;
    p.caption_b = p.winner == polos::Winner::A ? bad : good;
    p.category = polos::kPascalCategories[k % 4];
    pairs.push_back(std::move(p));
  }
  return pairs;
}

// References live in the first half of each space. The true caption equals
// one of its references; the foil lies in the orthogonal second half.
struct FoilWorld {
  polos::Dims dims{8, 8};
  polos::Rng rng;

  explicit FoilWorld(std::uint64_t seed) : rng(seed) {}

  std::vector<float> in_half(std::size_t d, bool first) {
    std::vector<float> v(d, 0.0F);
    for (std::size_t j = first ? 0 : d / 2; j < (first ? d / 2 : d); ++j) v[j] = static_cast<float>(rng.normal());
    return v;
  }

  polos::FoilPair pair(std::size_t refs, const std::string& id) {
    polos::FoilPair p;
    p.image_id = id;
    for (std::size_t r = 0; r < refs; ++r) {
      p.refs_clip.push_back(in_half(dims.d_clip, true));
      p.refs_rb.push_back(in_half(dims.d_rb, true));
    }
    const auto pick = rng.below(refs);
    p.true_caption = {p.refs_clip[pick], p.refs_rb[pick]};
    p.foil_caption = {in_half(dims.d_clip, false), in_half(dims.d_rb, false)};
    p.img = in_half(dims.d_clip, true);
    return p;
  }

  // Training samples: the true caption labelled 1, the foil labelled 0.
  std::vector<polos::EmbeddingSample> training_set(std::size_t pairs) {
    std::vector<polos::EmbeddingSample> out;
    for (std::size_t k = 0; k < pairs; ++k) {
      const auto p = pair(k % 2 == 0 ? 1 : 4, "train-" + std::to_string(k));
      for (int side = 0; side < 2; ++side) {
        polos::EmbeddingSample s;
        s.sample_id = p.image_id + (side == 0 ? "-true" : "-foil");
        const auto& cap = side == 0 ? p.true_caption : p.foil_caption;
        s.cand_clip = cap.clip;
        s.cand_rb = cap.rb;
        s.refs_clip = p.refs_clip;
        s.refs_rb = p.refs_rb;
        s.img = p.img;
        s.score = side == 0 ? 1.0F : 0.0F;
        out.push_back(std::move(s));
      }
    }
    return out;
  }
};

inline polos::HeadConfig separator_head() {
  polos::HeadConfig cfg;
  cfg.mlp1_hidden = {32};
  cfg.d_h = 16;
  cfg.mlp2_hidden = {8};
  cfg.seed = 1;
  return cfg;
}

inline polos::TrainConfig separator_training() {
  polos::TrainConfig tc;
  tc.learning_rate = 1e-2;
  tc.batch_size = 16;
  tc.max_epochs = 60;
  tc.patience = 60;
  tc.seed = 1;
  return tc;
}

}  // namespace fixture
