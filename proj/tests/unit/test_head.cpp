#include <numeric>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "polos/error.hpp"
#include "polos/head.hpp"

using namespace polos;

namespace {

std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

TEST(Fuse, IdenticalInputs) {
  const std::vector<double> c{1, 2};
  EXPECT_EQ(to_vec(fuse(c, c)), (std::vector<double>{1, 2, 1, 2, 0, 0, 1, 4}));
}

TEST(Fuse, OrthogonalOneHot) {
  const std::vector<double> c{1, 0}, r{0, 1};
  EXPECT_EQ(to_vec(fuse(c, r)), (std::vector<double>{1, 0, 0, 1, 1, 1, 0, 0}));
}

TEST(Fuse, MixedSigns) {
  const std::vector<double> c{2, -3}, r{-1, 4};
  EXPECT_EQ(to_vec(fuse(c, r)), (std::vector<double>{2, -3, -1, 4, 3, 7, -2, -12}));
}

TEST(Fuse, DimensionMismatch) {
  const std::vector<double> c{1, 2}, r{1};
  EXPECT_THROW(fuse(c, r), DimensionError);
}

TEST(Fuse, SwapSymmetry) {
  polos::Rng rng(4);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> c(7), r(7);
    for (auto& x : c) x = rng.normal();
    for (auto& x : r) x = rng.normal();
    const auto a = to_vec(fuse(c, r));
    const auto b = to_vec(fuse(r, c));
    for (std::size_t k = 0; k < 7; ++k) {
      EXPECT_EQ(a[k], b[7 + k]);
      EXPECT_EQ(a[7 + k], b[k]);
      EXPECT_EQ(a[14 + k], b[14 + k]);
      EXPECT_EQ(a[21 + k], b[21 + k]);
    }
  }
}

TEST(Fuse, ConcatOnlyIsPrefix) {
  const std::vector<double> c{2, -3}, r{-1, 4};
  EXPECT_EQ(to_vec(fuse_concat(c, r)), (std::vector<double>{2, -3, -1, 4}));
}

TEST(HInter, WorkedLengths) {
  const Dims dims{512, 1024};
  HeadConfig cfg;
  EXPECT_EQ(h_inter_size(cfg, dims), 8192U);
  cfg.use_image = false;
  EXPECT_EQ(h_inter_size(cfg, dims), 6144U);
  cfg = {};
  cfg.fusion_mode = FusionMode::concat_only;
  EXPECT_EQ(h_inter_size(cfg, dims), 4096U);
}

TEST(HInter, MatchesOracleLayoutForEveryRow) {
  polos::Rng rng(8);
  const auto s = oracle::random_sample(rng, {3, 5}, 3);
  for (const auto& cfg : oracle::ablation_rows(HeadConfig{})) {
    for (std::size_t i = 0; i < 3; ++i) {
      EXPECT_EQ(to_vec(build_h_inter(s, i, cfg)), oracle::h_inter(s, i, cfg));
    }
  }
}

TEST(HInter, AllTextStreamsDisabledIsAnError) {
  polos::Rng rng(8);
  const auto s = oracle::random_sample(rng, {3, 5}, 1);
  HeadConfig cfg;
  cfg.use_clip_text = false;
  cfg.use_roberta = false;
  EXPECT_THROW(build_h_inter(s, 0, cfg), ConfigError);
}

TEST(Aggregate, MaxAndMean) {
  const auto mx = aggregate_scores({0.2, 0.7, 0.5}, Aggregate::max);
  EXPECT_DOUBLE_EQ(mx.y_hat, 0.7);
  EXPECT_EQ(mx.argmax_ref, 1U);
  const auto mn = aggregate_scores({0.2, 0.7, 0.5}, Aggregate::mean);
  EXPECT_NEAR(mn.y_hat, 0.4666667, 1e-7);
}

TEST(Aggregate, TieGoesToLowestIndex) {
  EXPECT_EQ(aggregate_scores({0.3, 0.9, 0.9}, Aggregate::max).argmax_ref, 1U);
}

TEST(Score, ZeroParamsGiveHalf) {
  polos::Rng rng(5);
  const auto cfg = oracle::tiny_head();
  auto params = init_params(cfg, {3, 4}).zeros_like();
  for (int t = 0; t < 5; ++t) {
    const auto out = score(oracle::random_sample(rng, {3, 4}, 1 + t), params, cfg);
    EXPECT_EQ(out.y_hat, 0.5);
    for (double v : out.per_ref_scores) EXPECT_EQ(v, 0.5);
  }
}

TEST(Score, MatchesIndependentForwardPass) {
  polos::Rng rng(6);
  for (const auto& base : oracle::ablation_rows(oracle::tiny_head(3))) {
    for (auto act : {Activation::relu, Activation::tanh, Activation::identity}) {
      auto cfg = base;
      cfg.activation = act;
      auto params = init_params(cfg, {3, 4});
      oracle::randomize(params, rng);
      const auto s = oracle::random_sample(rng, {3, 4}, 4);
      const auto got = score(s, params, cfg);
      const auto want = oracle::forward(s, params, cfg);
      EXPECT_NEAR(got.y_hat, want.y_hat, 1e-12);
      for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(got.per_ref_scores[i], want.per_ref[i], 1e-12);
    }
  }
}

TEST(Score, OpenUnitIntervalAndAggregateConsistency) {
  polos::Rng rng(7);
  for (auto agg : {Aggregate::max, Aggregate::mean}) {
    auto cfg = oracle::tiny_head();
    cfg.aggregate = agg;
    auto params = init_params(cfg, {3, 4});
    oracle::randomize(params, rng);
    for (int t = 0; t < 50; ++t) {
      const auto out = score(oracle::random_sample(rng, {3, 4}, 1 + rng.below(5)), params, cfg);
      EXPECT_GT(out.y_hat, 0.0);
      EXPECT_LT(out.y_hat, 1.0);
      EXPECT_EQ(out.y_hat, aggregate_scores(out.per_ref_scores, agg).y_hat);
    }
  }
}

TEST(Score, ReferencePermutationInvariance) {
  polos::Rng rng(9);
  for (auto agg : {Aggregate::max, Aggregate::mean}) {
    auto cfg = oracle::tiny_head();
    cfg.aggregate = agg;
    auto params = init_params(cfg, {3, 4});
    oracle::randomize(params, rng);
    for (int t = 0; t < 20; ++t) {
      auto s = oracle::random_sample(rng, {3, 4}, 5);
      const auto before = score(s, params, cfg);
      std::vector<std::size_t> perm(5);
      std::iota(perm.begin(), perm.end(), 0);
      rng.shuffle(std::span(perm));
      auto p = s;
      for (std::size_t i = 0; i < 5; ++i) {
        p.refs_clip[i] = s.refs_clip[perm[i]];
        p.refs_rb[i] = s.refs_rb[perm[i]];
      }
      const auto after = score(p, params, cfg);
      EXPECT_NEAR(after.y_hat, before.y_hat, 1e-15);
      const auto top = std::count(before.per_ref_scores.begin(), before.per_ref_scores.end(), before.y_hat);
      if (agg == Aggregate::max && top == 1) EXPECT_EQ(perm[after.argmax_ref], before.argmax_ref);
    }
  }
}

TEST(Score, SingleReferenceMaxEqualsMean) {
  polos::Rng rng(10);
  auto cfg = oracle::tiny_head();
  auto params = init_params(cfg, {3, 4});
  oracle::randomize(params, rng);
  auto mean_cfg = cfg;
  mean_cfg.aggregate = Aggregate::mean;
  for (int t = 0; t < 20; ++t) {
    const auto s = oracle::random_sample(rng, {3, 4}, 1);
    EXPECT_EQ(score(s, params, cfg).y_hat, score(s, params, mean_cfg).y_hat);
  }
}

TEST(Score, DisabledStreamIsIgnoredBitExactly) {
  polos::Rng rng(12);
  struct Case {
    HeadConfig cfg;
    std::function<void(EmbeddingSample&)> perturb;
  };
  auto base = oracle::tiny_head();
  std::vector<Case> cases;
  cases.push_back({base, {}});
  cases.back().cfg.use_roberta = false;
  cases.back().perturb = [&](EmbeddingSample& s) {
    for (auto& r : s.refs_rb) r = oracle::random_vector(rng, r.size(), 100);
    s.cand_rb = oracle::random_vector(rng, s.cand_rb.size(), 100);
  };
  cases.push_back({base, {}});
  cases.back().cfg.use_image = false;
  cases.back().perturb = [&](EmbeddingSample& s) { s.img = oracle::random_vector(rng, s.img.size(), 100); };
  cases.push_back({base, {}});
  cases.back().cfg.use_clip_text = false;
  cases.back().cfg.use_image = false;
  cases.back().perturb = [&](EmbeddingSample& s) {
    for (auto& r : s.refs_clip) r = oracle::random_vector(rng, r.size(), 100);
    s.cand_clip = oracle::random_vector(rng, s.cand_clip.size(), 100);
    s.img = oracle::random_vector(rng, s.img.size(), 100);
  };
  for (auto& c : cases) {
    auto params = init_params(c.cfg, {3, 4});
    oracle::randomize(params, rng);
    for (int t = 0; t < 10; ++t) {
      auto s = oracle::random_sample(rng, {3, 4}, 3);
      const auto before = score(s, params, c.cfg);
      c.perturb(s);
      const auto after = score(s, params, c.cfg);
      EXPECT_EQ(before.y_hat, after.y_hat);
      EXPECT_EQ(before.per_ref_scores, after.per_ref_scores);
    }
  }
}

TEST(Score, DimensionMismatchAgainstParams) {
  polos::Rng rng(13);
  const auto cfg = oracle::tiny_head();
  const auto params = init_params(cfg, {3, 4});
  EXPECT_THROW(score(oracle::random_sample(rng, {4, 4}, 2), params, cfg), DimensionError);
}

TEST(Score, BatchMatchesSingleAndIgnoresJobs) {
  polos::Rng rng(14);
  const auto cfg = oracle::tiny_head();
  auto params = init_params(cfg, {3, 4});
  oracle::randomize(params, rng);
  std::vector<EmbeddingSample> samples;
  for (int k = 0; k < 150; ++k) samples.push_back(oracle::random_sample(rng, {3, 4}, 1 + rng.below(5)));
  const auto one = score_batch(samples, params, cfg, 1);
  const auto four = score_batch(samples, params, cfg, 4);
  for (std::size_t k = 0; k < samples.size(); ++k) {
    EXPECT_EQ(one[k].y_hat, four[k].y_hat);
    EXPECT_NEAR(one[k].y_hat, score(samples[k], params, cfg).y_hat, 1e-14);
  }
}

TEST(Init, DeterministicBoundedZeroBias) {
  HeadConfig cfg;
  cfg.seed = 1;
  const Dims dims{16, 24};
  const auto a = init_params(cfg, dims);
  EXPECT_TRUE(a == init_params(cfg, dims));
  cfg.seed = 2;
  EXPECT_FALSE(a == init_params(cfg, dims));
  for (const auto* layers : {&a.mlp1, &a.mlp2}) {
    for (const auto& l : *layers) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(l.in()));
      EXPECT_LE(l.weight.cwiseAbs().maxCoeff(), bound);
      EXPECT_EQ(l.bias.cwiseAbs().maxCoeff(), 0.0);
    }
  }
}

TEST(Init, DefaultShape) {
  const auto p = init_params(HeadConfig{}, {512, 1024});
  ASSERT_EQ(p.mlp1.size(), 2U);
  ASSERT_EQ(p.mlp2.size(), 2U);
  EXPECT_EQ(p.mlp1[0].in(), 8192U);
  EXPECT_EQ(p.mlp1[0].out(), 1024U);
  EXPECT_EQ(p.mlp1[1].out(), 512U);
  EXPECT_EQ(p.mlp2[0].out(), 128U);
  EXPECT_EQ(p.mlp2[1].out(), 1U);
  EXPECT_EQ(p.mlp2[1].activation, Activation::identity);
  EXPECT_EQ(p.mlp1[0].activation, Activation::relu);
}

TEST(Gradient, ZeroAtTarget) {
  polos::Rng rng(15);
  const auto cfg = oracle::tiny_head();
  auto params = init_params(cfg, {3, 4});
  oracle::randomize(params, rng);
  const auto s = oracle::random_sample(rng, {3, 4}, 3);
  const double y = score(s, params, cfg).y_hat;
  const auto g = score_gradient(s, y, params, cfg);
  EXPECT_EQ(g.loss, 0.0);
  for (double v : oracle::flat_values(g.grads)) EXPECT_EQ(v, 0.0);
}

TEST(Gradient, MaxRoutesOnlyArgmaxBranch) {
  // Under max the gradient must equal that of the argmax reference scored alone.
  polos::Rng rng(16);
  const auto cfg = oracle::tiny_head();
  auto params = init_params(cfg, {3, 4});
  oracle::randomize(params, rng);
  for (int t = 0; t < 20; ++t) {
    const auto s = oracle::random_sample(rng, {3, 4}, 4);
    const auto out = score(s, params, cfg);
    auto solo = s;
    solo.refs_clip = {s.refs_clip[out.argmax_ref]};
    solo.refs_rb = {s.refs_rb[out.argmax_ref]};
    const auto full = oracle::flat_values(score_gradient(s, 0.3, params, cfg).grads);
    const auto one = oracle::flat_values(score_gradient(solo, 0.3, params, cfg).grads);
    ASSERT_EQ(full.size(), one.size());
    for (std::size_t k = 0; k < full.size(); ++k) EXPECT_NEAR(full[k], one[k], 1e-15 + 1e-12 * std::fabs(one[k]));
  }
}

TEST(Gradient, FiniteDifferenceSmallSweep) {
  polos::Rng rng(17);
  int checked = 0;
  for (const auto& base : oracle::ablation_rows(oracle::tiny_head(4))) {
    for (auto act : {Activation::relu, Activation::tanh}) {
      auto cfg = base;
      cfg.activation = act;
      auto params = init_params(cfg, {3, 4});
      oracle::randomize(params, rng);
      const auto s = oracle::random_sample(rng, {3, 4}, 3);
      const auto f = oracle::forward(s, params, cfg);
      if (f.min_relu_margin < 1e-3 || f.argmax_gap < 1e-4) continue;
      EXPECT_LT(oracle::check_gradient(s, rng.uniform(), params, cfg).max_rel_error, 1e-4);
      ++checked;
    }
  }
  EXPECT_GE(checked, 8);
}

TEST(Gradient, BatchIsMeanOfSamplesAndOrderFree) {
  polos::Rng rng(18);
  const auto cfg = oracle::tiny_head();
  auto params = init_params(cfg, {3, 4});
  oracle::randomize(params, rng);
  std::vector<EmbeddingSample> samples;
  std::vector<double> targets;
  for (int k = 0; k < 6; ++k) {
    samples.push_back(oracle::random_sample(rng, {3, 4}, 1 + rng.below(4)));
    targets.push_back(rng.uniform());
  }
  std::vector<const EmbeddingSample*> ptrs;
  for (const auto& s : samples) ptrs.push_back(&s);
  const auto batch = batch_gradient(ptrs, targets, params, cfg);

  double loss = 0;
  std::vector<double> mean(params.parameter_count(), 0.0);
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const auto g = score_gradient(samples[k], targets[k], params, cfg);
    loss += g.loss / 6;
    const auto flat = oracle::flat_values(g.grads);
    for (std::size_t j = 0; j < flat.size(); ++j) mean[j] += flat[j] / 6;
  }
  EXPECT_NEAR(batch.loss, loss, 1e-14);
  const auto flat = oracle::flat_values(batch.grads);
  for (std::size_t j = 0; j < flat.size(); ++j) EXPECT_NEAR(flat[j], mean[j], 1e-13);

  std::reverse(ptrs.begin(), ptrs.end());
  std::reverse(targets.begin(), targets.end());
  const auto reversed = batch_gradient(ptrs, targets, params, cfg);
  EXPECT_NEAR(reversed.loss, batch.loss, 1e-15);
}
