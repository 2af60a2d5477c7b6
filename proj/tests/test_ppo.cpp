#include <gtest/gtest.h>

#include <numeric>

#include "rlvlm/ppo.hpp"

using namespace rlvlm;

namespace {

std::vector<double> random_input(Rng& rng, std::size_t d) {
  std::vector<double> x(d);
  for (double& v : x) v = rng.normal();
  return x;
}

// Samples whose old log-probabilities equal the current policy's, shifted by
// `jitter` in log space.
std::vector<PpoSample> make_samples(const ActorCritic& p, Rng& rng, std::size_t n, double jitter) {
  std::vector<PpoSample> out;
  for (std::size_t i = 0; i < n; ++i) {
    PpoSample s;
    s.input = random_input(rng, p.actor().input_dim());
    s.action = rng.uniform_index(kActionCount);
    const auto o = p.evaluate(s.input);
    s.old_log_prob = o.log_probs[s.action] + rng.uniform(-jitter, jitter);
    s.old_value = o.value;
    s.advantage = rng.normal();
    s.ret = rng.normal();
    out.push_back(s);
  }
  return out;
}

std::vector<std::size_t> all(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

}  // namespace

TEST(Gae, SingleTerminalStep) {
  const auto g = gae(std::vector<double>{1.0}, std::vector<double>{0.0, 5.0}, std::vector<double>{1.0}, 0.99, 0.95);
  EXPECT_EQ(g.advantages[0], 1.0);
  EXPECT_EQ(g.returns[0], 1.0);
}

TEST(Gae, LambdaZeroIsTdError) {
  Rng rng(1);
  std::vector<double> r(20), v(21), d(20);
  for (auto& x : r) x = rng.normal();
  for (auto& x : v) x = rng.normal();
  for (auto& x : d) x = rng.bernoulli(0.2);
  const auto g = gae(r, v, d, 0.9, 0.0);
  for (std::size_t t = 0; t < 20; ++t) EXPECT_EQ(g.advantages[t], r[t] + 0.9 * v[t + 1] * (1 - d[t]) - v[t]);
}

TEST(Gae, LambdaOneIsMonteCarloReturnMinusValue) {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> r(50), v(51), d(50, 0.0);
    for (auto& x : r) x = rng.normal();
    for (auto& x : v) x = rng.normal();
    const double gamma = rng.uniform(0.8, 1.0);
    const auto g = gae(r, v, d, gamma, 1.0);
    for (std::size_t t = 0; t < 50; ++t) {
      double ret = 0.0, disc = 1.0;
      for (std::size_t k = t; k < 50; ++k, disc *= gamma) ret += disc * r[k];
      ret += disc * v[50];
      ASSERT_NEAR(g.advantages[t], ret - v[t], 1e-10);
    }
  }
}

TEST(Gae, LengthMismatch) {
  EXPECT_THROW(gae(std::vector<double>{1, 2}, std::vector<double>{0, 0}, std::vector<double>{0, 0}, 0.9, 0.9),
               DomainError);
  EXPECT_THROW(gae(std::vector<double>{1, 2}, std::vector<double>{0, 0, 0}, std::vector<double>{0}, 0.9, 0.9),
               DomainError);
}

TEST(PpoObjective, IdentityRatioGivesMeanAdvantage) {
  Rng rng(3);
  const ActorCritic p(6, 8, Rng(4));
  const auto samples = make_samples(p, rng, 20, 0.0);
  const auto r = ppo_objective(p, samples, all(20), PpoConfig{});
  double m = 0.0;
  for (const auto& s : samples) m += s.advantage / 20;
  EXPECT_NEAR(r.surrogate, m, 1e-14);
  EXPECT_EQ(r.max_ratio_deviation, 0.0);
}

TEST(PpoObjective, ZeroAdvantageHasNoPolicyGradient) {
  Rng rng(5);
  const ActorCritic p(6, 8, Rng(6));
  auto samples = make_samples(p, rng, 10, 0.1);
  for (auto& s : samples) s.advantage = 0.0;
  PpoConfig cfg;
  cfg.entropy_coef = 0.0;
  for (double g : ppo_objective(p, samples, all(10), cfg).actor_grad) EXPECT_EQ(g, 0.0);
}

TEST(PpoObjective, ClipActiveKillsRatioGradient) {
  Rng rng(7);
  ActorCritic p(6, 8, Rng(8));
  PpoConfig cfg;
  cfg.entropy_coef = 0.0;
  cfg.value_coef = 0.0;
  auto samples = make_samples(p, rng, 8, 0.0);
  for (auto& s : samples) {
    s.advantage = std::abs(s.advantage) + 0.1;
    s.old_log_prob -= std::log(1.0 + 2.0 * cfg.clip_epsilon);
  }
  const auto r = ppo_objective(p, samples, all(8), cfg);
  EXPECT_EQ(r.clip_fraction, 1.0);
  for (double g : r.actor_grad) EXPECT_EQ(g, 0.0);
  // and numerically: nudging parameters leaves the objective unchanged
  auto& params = p.actor().parameters();
  for (std::size_t i = 0; i < params.size(); i += 37) {
    const double keep = params[i];
    params[i] = keep + 1e-5;
    const double up = ppo_objective(p, samples, all(8), cfg).objective;
    params[i] = keep - 1e-5;
    const double dn = ppo_objective(p, samples, all(8), cfg).objective;
    params[i] = keep;
    EXPECT_NEAR((up - dn) / 2e-5, 0.0, 1e-9);
  }
}

TEST(PpoObjective, FiniteDifference) {
  Rng rng(9);
  for (int t = 0; t < 10; ++t) {
    ActorCritic p(5, 6, rng.substream(static_cast<std::uint64_t>(t)));
    PpoConfig cfg;
    cfg.clip_epsilon = 0.2;
    cfg.entropy_coef = 0.05;
    auto samples = make_samples(p, rng, 12, 0.4);
    const auto r = ppo_objective(p, samples, all(12), cfg);
    auto check = [&](std::vector<double>& params, const std::vector<double>& grad) {
      for (std::size_t i = 0; i < params.size(); ++i) {
        const double keep = params[i];
        params[i] = keep + 1e-6;
        const double up = ppo_objective(p, samples, all(12), cfg).objective;
        params[i] = keep - 1e-6;
        const double dn = ppo_objective(p, samples, all(12), cfg).objective;
        params[i] = keep;
        const double fd = (up - dn) / 2e-6;
        ASSERT_LT(std::abs(fd - grad[i]) / std::max(1e-4, std::abs(fd) + std::abs(grad[i])), 1e-4) << "param " << i;
      }
    };
    check(p.actor().parameters(), r.actor_grad);
    check(p.critic().parameters(), r.critic_grad);
  }
}

TEST(PpoUpdate, FirstMinibatchRatioIsExactlyOne) {
  Rng rng(10);
  ActorCritic p(6, 8, Rng(11));
  const auto samples = make_samples(p, rng, 64, 0.0);
  PpoOptimizer opt(p);
  PpoConfig cfg;
  Rng update(12);
  const PpoStats s = ppo_update(samples, p, opt, cfg, update);
  EXPECT_EQ(s.first_minibatch_ratio_deviation, 0.0);
  EXPECT_EQ(s.gradient_steps, cfg.epochs * cfg.minibatches);
}

TEST(PpoUpdate, NonFiniteObjectiveAborts) {
  Rng rng(13);
  ActorCritic p(6, 8, Rng(14));
  auto samples = make_samples(p, rng, 8, 0.0);
  samples[3].ret = NAN;
  PpoOptimizer opt(p);
  Rng update(1);
  EXPECT_THROW(ppo_update(samples, p, opt, PpoConfig{}, update), NumericalError);
}

TEST(PpoUpdate, NormalizesAdvantages) {
  std::vector<PpoSample> s(4);
  const double a[4] = {1, 2, 3, 10};
  for (int i = 0; i < 4; ++i) s[i].advantage = a[i];
  normalize_advantages(s);
  double m = 0, v = 0;
  for (const auto& x : s) m += x.advantage / 4;
  for (const auto& x : s) v += (x.advantage - m) * (x.advantage - m) / 4;
  EXPECT_NEAR(m, 0.0, 1e-12);
  EXPECT_NEAR(v, 1.0, 1e-6);
}

TEST(PpoConfig, DefaultsAndValidation) {
  const PpoConfig c;
  EXPECT_EQ(c.gamma, 0.99);
  EXPECT_EQ(c.gae_lambda, 0.95);
  EXPECT_EQ(c.clip_epsilon, 0.02);
  EXPECT_EQ(c.entropy_coef, 0.005);
  EXPECT_EQ(c.epochs, 8u);
  EXPECT_EQ(c.minibatches, 4u);
  EXPECT_EQ(c.steps, 1000u);
  EXPECT_EQ(c.envs, 4u);
  EXPECT_EQ(c.max_grad_norm, 10.0);
  PpoConfig bad;
  bad.clip_epsilon = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = {};
  bad.gae_lambda = 1.5;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(TrainRl, ShapedSourceNeedsModel) {
  RlRunConfig cfg;
  cfg.source = RewardSource::clip4mc_style;
  EXPECT_THROW(train_rl(cfg, nullptr, 0), ConfigError);
  EXPECT_THROW(parse_reward_source("dense"), ConfigError);
  EXPECT_EQ(parse_reward_source("mineclip"), RewardSource::mineclip_style);
}

TEST(TrainRl, UntrainedPolicyFloor) {
  RlRunConfig cfg;
  cfg.total_steps = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const RlRunResult r = train_rl(cfg, nullptr, seed);
    ASSERT_EQ(r.curve.size(), 1u);
    EXPECT_LT(r.curve[0].success_rate, 0.10) << "seed " << seed;
  }
}

TEST(TrainRl, TinyGridIsSolved) {
  RlRunConfig cfg;
  cfg.env.grid_size = 3;
  cfg.env.spawn_radius = 1;
  cfg.total_steps = 50000;
  const RlRunResult r = train_rl(cfg, nullptr, 0);
  double best = 0.0;
  for (const auto& p : r.curve) best = std::max(best, p.success_rate);
  EXPECT_GT(best, 0.9);
}

TEST(TrainRl, Deterministic) {
  RlRunConfig cfg;
  cfg.total_steps = 8000;
  cfg.eval_interval = 4000;
  cfg.eval_episodes = 5;
  const RlRunResult a = train_rl(cfg, nullptr, 3), b = train_rl(cfg, nullptr, 3);
  ASSERT_EQ(a.curve.size(), 3u);
  for (std::size_t i = 0; i < a.curve.size(); ++i) {
    EXPECT_EQ(a.curve[i].step, b.curve[i].step);
    EXPECT_EQ(a.curve[i].success_rate, b.curve[i].success_rate);
    EXPECT_EQ(a.curve[i].mean_r_env, b.curve[i].mean_r_env);
  }
  EXPECT_EQ(a.policy.actor().parameters(), b.policy.actor().parameters());
}
