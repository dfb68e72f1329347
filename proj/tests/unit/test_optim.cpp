#include <gtest/gtest.h>

#include "oracles.hpp"
#include "polos/error.hpp"
#include "polos/optim.hpp"
#include "polos/synthetic.hpp"

using namespace polos;

namespace {

Bundle small_bundle(std::size_t count, std::uint64_t seed, const std::string& prefix = "syn") {
  SynthSpec spec;
  spec.count = count;
  spec.dims = {3, 4};
  spec.seed = seed;
  spec.id_prefix = prefix;
  return make_synthetic_bundle(spec);
}

FitResult fit_with_taus(const std::vector<std::optional<double>>& taus, std::size_t patience,
                        std::size_t max_epochs = 100) {
  const auto train = small_bundle(8, 1);
  const auto valid = small_bundle(4, 2, "val");
  TrainConfig tc;
  tc.patience = patience;
  tc.max_epochs = max_epochs;
  FitOptions opts;
  opts.validate = [taus](const HeadParams&, std::size_t epoch) -> std::optional<double> {
    return epoch - 1 < taus.size() ? taus[epoch - 1] : taus.back();
  };
  return fit(train.samples, valid.samples, oracle::tiny_head(), tc, opts);
}

}  // namespace

TEST(Adam, ScalarHandExample) {
  std::vector<double> theta{0.0}, grad{1.0}, m{0.0}, v{0.0};
  TrainConfig tc;
  tc.learning_rate = 0.1;
  adam_update(theta, grad, m, v, 1, tc);
  // t=1: m_hat = g, v_hat = g^2, so the step is lr * 1 / (1 + eps)
  EXPECT_DOUBLE_EQ(theta[0], -0.1 / (1.0 + 1e-8));
  EXPECT_NEAR(m[0], 0.1, 1e-15);
  EXPECT_NEAR(v[0], 0.02, 1e-15);
}

TEST(Adam, MatchesClosedFormOverSeveralSteps) {
  TrainConfig tc;
  tc.learning_rate = 0.01;
  std::vector<double> theta{0.5}, m{0}, v{0};
  double ot = 0.5, om = 0, ov = 0;
  const double gs[] = {0.3, -1.2, 0.7, 2.0};
  for (std::uint64_t t = 1; t <= 4; ++t) {
    const double g = gs[t - 1];
    std::vector<double> grad{g};
    adam_update(theta, grad, m, v, t, tc);
    om = 0.9 * om + 0.1 * g;
    ov = 0.98 * ov + 0.02 * g * g;
    const double mh = om / (1 - std::pow(0.9, double(t)));
    const double vh = ov / (1 - std::pow(0.98, double(t)));
    ot -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
    EXPECT_NEAR(theta[0], ot, 1e-15);
  }
}

TEST(Adam, ZeroGradientFreshStateKeepsParams) {
  const auto params = init_params(oracle::tiny_head(), {3, 4});
  auto p = params;
  auto state = AdamState::for_params(p);
  adam_step(p, p.zeros_like(), state, TrainConfig{});
  EXPECT_TRUE(p == params);
  EXPECT_EQ(state.t, 1U);
}

TEST(Adam, Deterministic) {
  polos::Rng rng(3);
  auto a = init_params(oracle::tiny_head(), {3, 4});
  auto grads = a.zeros_like();
  oracle::randomize(grads, rng);
  auto b = a;
  auto sa = AdamState::for_params(a);
  auto sb = AdamState::for_params(b);
  adam_step(a, grads, sa, TrainConfig{});
  adam_step(b, grads, sb, TrainConfig{});
  EXPECT_TRUE(a == b);
  EXPECT_TRUE(sa.m == sb.m);
  EXPECT_TRUE(sa.v == sb.v);
}

TEST(Adam, NonFiniteGradientRejected) {
  auto p = init_params(oracle::tiny_head(), {3, 4});
  auto g = p.zeros_like();
  g.mlp1[0].weight(0, 0) = std::nan("");
  auto state = AdamState::for_params(p);
  EXPECT_THROW(adam_step(p, g, state, TrainConfig{}), NumericError);
}

TEST(TrainEpoch, ZeroLearningRateLeavesParamsAndReportsEvalLoss) {
  const auto data = small_bundle(20, 4);
  const auto cfg = oracle::tiny_head();
  auto params = init_params(cfg, data.dims);
  const auto before = params;
  TrainConfig tc;
  tc.learning_rate = 0.0;
  tc.batch_size = 6;
  auto state = AdamState::for_params(params);
  const double loss = train_epoch(data.samples, params, state, tc, cfg, 1);
  EXPECT_TRUE(params == before);
  EXPECT_NEAR(loss, evaluate_mse(data.samples, params, cfg), 1e-14);
}

TEST(TrainEpoch, MissingScoreRejected) {
  auto data = small_bundle(5, 4);
  data.samples[2].score.reset();
  const auto cfg = oracle::tiny_head();
  auto params = init_params(cfg, data.dims);
  auto state = AdamState::for_params(params);
  EXPECT_THROW(train_epoch(data.samples, params, state, TrainConfig{}, cfg, 1), DataError);
}

TEST(Fit, EarlyStopTrace) {
  const auto r = fit_with_taus({0.2, 0.3, 0.3, 0.3, 0.3, 0.3, 0.3}, 5);
  EXPECT_EQ(r.log.epochs.size(), 7U);
  EXPECT_EQ(r.log.best_epoch, 2U);
  EXPECT_DOUBLE_EQ(*r.log.best_tau, 0.3);
}

TEST(Fit, ReturnsBestEpochSnapshot) {
  // Capture the parameters the validator sees at each epoch.
  const auto train = small_bundle(8, 1);
  const auto valid = small_bundle(4, 2, "val");
  std::vector<HeadParams> seen;
  const std::vector<double> taus{0.1, 0.5, 0.4, 0.2, 0.3};
  TrainConfig tc;
  tc.patience = 3;
  tc.learning_rate = 1e-2;
  tc.batch_size = 4;
  FitOptions opts;
  opts.validate = [&](const HeadParams& p, std::size_t epoch) -> std::optional<double> {
    seen.push_back(p);
    return taus[epoch - 1];
  };
  const auto r = fit(train.samples, valid.samples, oracle::tiny_head(), tc, opts);
  EXPECT_EQ(r.log.best_epoch, 2U);
  EXPECT_EQ(r.log.epochs.size(), 5U);
  EXPECT_TRUE(r.params == seen[1]);
  EXPECT_FALSE(r.params == seen[4]);
}

TEST(Fit, MaxEpochsOne) {
  const auto r = fit_with_taus({0.1}, 5, 1);
  EXPECT_EQ(r.log.epochs.size(), 1U);
  EXPECT_EQ(r.log.best_epoch, 1U);
}

TEST(Fit, StrictlyImprovingRunsToMax) {
  std::vector<std::optional<double>> taus;
  for (int k = 0; k < 12; ++k) taus.emplace_back(0.01 * k);
  const auto r = fit_with_taus(taus, 2, 12);
  EXPECT_EQ(r.log.epochs.size(), 12U);
  EXPECT_EQ(r.log.best_epoch, 12U);
}

TEST(Fit, UndefinedTauNeverImproves) {
  const auto r = fit_with_taus({std::nullopt, 0.1, std::nullopt, std::nullopt}, 2);
  EXPECT_EQ(r.log.best_epoch, 2U);
  EXPECT_EQ(r.log.epochs.size(), 4U);
}

TEST(Fit, PatienceBoundsEpochsAfterBest) {
  polos::Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<std::optional<double>> taus;
    for (int k = 0; k < 40; ++k) taus.emplace_back(std::round(rng.uniform() * 4) / 4);
    const std::size_t patience = 1 + rng.below(4);
    const auto r = fit_with_taus(taus, patience, 40);
    EXPECT_LE(r.log.epochs.size() - r.log.best_epoch, patience);
    double best = -2;
    std::size_t best_epoch = 0;
    for (const auto& e : r.log.epochs) {
      if (*e.valid_tau > best) {
        best = *e.valid_tau;
        best_epoch = e.epoch;
      }
    }
    EXPECT_EQ(r.log.best_epoch, best_epoch);
    EXPECT_EQ(*r.log.best_tau, best);
  }
}

TEST(Fit, EmptySetsRejected) {
  const auto data = small_bundle(4, 1);
  std::vector<EmbeddingSample> none;
  EXPECT_THROW(fit(none, data.samples, oracle::tiny_head(), TrainConfig{}), DataError);
  EXPECT_THROW(fit(data.samples, none, oracle::tiny_head(), TrainConfig{}), DataError);
}

TEST(Fit, RepeatRunsAreBitwiseIdentical) {
  const auto train = small_bundle(40, 1);
  const auto valid = small_bundle(12, 2, "val");
  TrainConfig tc;
  tc.learning_rate = 1e-3;
  tc.batch_size = 8;
  tc.max_epochs = 6;
  tc.seed = 9;
  const auto a = fit(train.samples, valid.samples, oracle::tiny_head(9), tc);
  const auto b = fit(train.samples, valid.samples, oracle::tiny_head(9), tc);
  EXPECT_TRUE(a.params == b.params);
  EXPECT_EQ(train_log_to_jsonl(a.log), train_log_to_jsonl(b.log));
}

TEST(Config, TrainValidation) {
  TrainConfig tc;
  tc.beta1 = 1.0;
  EXPECT_THROW(tc.validate(), ConfigError);
  tc = {};
  tc.patience = 0;
  EXPECT_THROW(tc.validate(), ConfigError);
}
