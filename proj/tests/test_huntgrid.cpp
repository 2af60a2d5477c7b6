#include <gtest/gtest.h>

#include <map>

#include "rlvlm/huntgrid.hpp"
#include "rlvlm/ppo.hpp"

using namespace rlvlm;

namespace {

// Places the target `forward` cells straight ahead of an agent facing east.
WorldState facing_target(int forward) {
  WorldState s = env_reset(1).state;
  s.heading = 1;
  s.target_x = s.agent_x + forward;
  s.target_y = s.agent_y;
  return s;
}

}  // namespace

TEST(EnvReset, Deterministic) {
  for (std::uint64_t seed : {0ull, 7ull, 123456789ull}) {
    const ResetResult a = env_reset(seed), b = env_reset(seed);
    EXPECT_TRUE(a.state == b.state);
    EXPECT_EQ(a.observation.grid, b.observation.grid);
  }
}

TEST(EnvReset, AgentCenteredTargetInAnnulus) {
  const HuntConfig cfg;
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    const WorldState s = env_reset(seed, cfg).state;
    EXPECT_EQ(s.agent_x, 7);
    EXPECT_EQ(s.agent_y, 7);
    const int d = chebyshev(s.agent_x, s.agent_y, s.target_x, s.target_y);
    EXPECT_GE(d, cfg.min_spawn_radius());
    EXPECT_LE(d, cfg.spawn_radius);
    EXPECT_EQ(s.health, 3);
  }
}

TEST(EnvReset, RadiusOneIsAdjacent) {
  HuntConfig cfg;
  cfg.spawn_radius = 1;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const WorldState s = env_reset(seed, cfg).state;
    EXPECT_EQ(chebyshev(s.agent_x, s.agent_y, s.target_x, s.target_y), 1);
  }
}

TEST(EnvReset, SpawnUniformOverAnnulusChiSquare) {
  const HuntConfig cfg;
  std::map<std::pair<int, int>, int> hits;
  const int n = 10000;
  for (int seed = 0; seed < n; ++seed) {
    const WorldState s = env_reset(static_cast<std::uint64_t>(seed), cfg).state;
    ++hits[{s.target_x, s.target_y}];
  }
  // Distance histogram against ring sizes 8d; 3 degrees of freedom.
  std::map<int, int> by_d;
  for (const auto& [cell, k] : hits) by_d[chebyshev(cell.first, cell.second, 7, 7)] += k;
  int cells = 0;
  for (int d = cfg.min_spawn_radius(); d <= cfg.spawn_radius; ++d) cells += 8 * d;
  double chi2 = 0.0;
  for (int d = cfg.min_spawn_radius(); d <= cfg.spawn_radius; ++d) {
    const double expect = n * 8.0 * d / cells;
    chi2 += (by_d[d] - expect) * (by_d[d] - expect) / expect;
  }
  EXPECT_LT(chi2, 11.345);  // chi-square 0.99 quantile, 3 dof
  EXPECT_EQ(static_cast<int>(hits.size()), cells);
}

TEST(EnvStep, AttackOutOfRangeDoesNothing) {
  const HuntConfig cfg;
  const StepResult r = env_step(cfg, facing_target(5), kAttack);
  EXPECT_EQ(r.state.health, 3);
  EXPECT_EQ(r.r_env, 0.0);
  EXPECT_FALSE(r.state.fleeing);
}

TEST(EnvStep, ThreeHitsKill) {
  HuntConfig cfg;
  cfg.flee = false;
  WorldState s = facing_target(1);
  for (int i = 0; i < 2; ++i) {
    const StepResult r = env_step(cfg, s, kAttack);
    EXPECT_FALSE(r.done);
    EXPECT_EQ(r.r_env, 0.0);
    s = r.state;
  }
  const StepResult r = env_step(cfg, s, kAttack);
  EXPECT_TRUE(r.done);
  EXPECT_EQ(r.r_env, 100.0);
  EXPECT_THROW(env_step(cfg, r.state, kNoop), DomainError);
}

TEST(EnvStep, FirstHitTriggersFlee) {
  const HuntConfig cfg;
  const StepResult r = env_step(cfg, facing_target(1), kAttack);
  EXPECT_TRUE(r.state.fleeing);
  EXPECT_EQ(r.state.health, 2);
}

TEST(EnvStep, FleeRateMatchesProbability) {
  const HuntConfig cfg;
  int moved = 0, n = 4000;
  WorldState s = facing_target(3);
  s.fleeing = true;
  for (int i = 0; i < n; ++i) {
    s.rng = Rng(static_cast<std::uint64_t>(i));
    const StepResult r = env_step(cfg, s, kNoop);
    const int d = chebyshev(r.state.agent_x, r.state.agent_y, r.state.target_x, r.state.target_y);
    moved += d != 3 || r.state.target_y != s.target_y;
  }
  EXPECT_NEAR(moved / static_cast<double>(n), 0.8, 0.03);
}

TEST(EnvStep, WallBlocksButStepAdvances) {
  const HuntConfig cfg;
  WorldState s = env_reset(2, cfg).state;
  s.agent_x = 0;
  s.agent_y = 3;
  s.heading = 3;
  const StepResult r = env_step(cfg, s, kForward);
  EXPECT_EQ(r.state.agent_x, 0);
  EXPECT_EQ(r.state.agent_y, 3);
  EXPECT_EQ(r.state.step, s.step + 1);
}

TEST(EnvStep, IllegalAction) {
  EXPECT_THROW(env_step(HuntConfig{}, env_reset(0).state, kActionCount), DomainError);
}

TEST(EnvStep, StepLimitEndsEpisode) {
  HuntConfig cfg;
  cfg.max_steps = 5;
  WorldState s = env_reset(0, cfg).state;
  for (int i = 0; i < 4; ++i) s = env_step(cfg, s, kNoop).state;
  EXPECT_FALSE(s.done);
  EXPECT_TRUE(env_step(cfg, s, kNoop).done);
}

TEST(Observation, ApparentSizeNonIncreasingInDistance) {
  const HuntConfig cfg;
  double prev = 1.0;
  for (int d = 1; d <= 7; ++d) {
    const Observation o = observe(cfg, facing_target(d));
    EXPECT_TRUE(o.visible);
    EXPECT_EQ(o.distance, d);
    EXPECT_LE(o.apparent_size, prev);
    EXPECT_GT(o.apparent_size, 0.0);
    prev = o.apparent_size;
  }
  EXPECT_DOUBLE_EQ(observe(cfg, facing_target(1)).apparent_size, 16.0 / 160.0);
}

TEST(Observation, BehindAgentIsInvisible) {
  const HuntConfig cfg;
  WorldState s = facing_target(2);
  s.heading = 3;
  const Observation o = observe(cfg, s);
  EXPECT_FALSE(o.visible);
  EXPECT_EQ(o.apparent_size, 0.0);
  for (double g : o.grid) EXPECT_EQ(g, 0.0);
}

TEST(EnvStep, ReplayIsBitExact) {
  const HuntConfig cfg;
  Rng policy(5);
  std::vector<std::size_t> actions;
  std::vector<WorldState> states;
  WorldState s = env_reset(77, cfg).state;
  while (!s.done && actions.size() < 300) {
    actions.push_back(policy.bernoulli(0.6) ? scripted_chaser_action(cfg, s) : policy.uniform_index(kActionCount));
    s = env_step(cfg, s, actions.back()).state;
    states.push_back(s);
  }
  WorldState r = env_reset(77, cfg).state;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    r = env_step(cfg, r, actions[i]).state;
    ASSERT_TRUE(r == states[i]) << "step " << i;
  }
}

TEST(HuntConfig, Validation) {
  HuntConfig c;
  c.spawn_radius = 8;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.flee_prob = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.spawn_min_radius = 9;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(FrameStack, InputLayout) {
  const HuntConfig cfg;
  FrameStack st(cfg.frame_stack);
  const ResetResult rr = env_reset(3, cfg);
  st.reset(rr.observation);
  const auto x = st.input();
  ASSERT_EQ(x.size(), FrameStack::input_dim(cfg));
  EXPECT_EQ(x.size(), 645u);
  EXPECT_EQ(x[640 + kNoop], 1.0);
}

TEST(EvaluateSuccess, Baselines) {
  const HuntConfig cfg;
  const HuntPolicy attack = [](const WorldState&, const std::vector<double>&) { return std::size_t{kAttack}; };
  EXPECT_EQ(evaluate_success(attack, cfg, 50, 0), 0.0);
  const HuntPolicy chaser = [&](const WorldState& s, const std::vector<double>&) { return scripted_chaser_action(cfg, s); };
  EXPECT_GE(evaluate_success(chaser, cfg, 200, 0), 0.95);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const double r = evaluate_success(chaser, cfg, 1, seed);
    EXPECT_TRUE(r == 0.0 || r == 1.0);
  }
  EXPECT_THROW(evaluate_success(chaser, cfg, 0, 0), DomainError);
}
