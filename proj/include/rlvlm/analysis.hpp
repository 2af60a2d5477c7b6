#pragma once

// Reward-versus-size correlation on HuntGrid trajectories and aggregation of
// RL learning curves across seeds.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "rlvlm/huntgrid.hpp"
#include "rlvlm/numerics.hpp"
#include "rlvlm/ppo.hpp"
#include "rlvlm/rewardgen.hpp"

namespace rlvlm {

// f(x) = ln(x + e^-2): stretches the small-size end where most steps live.
inline double size_transform(double size) { return std::log(size + std::exp(-2.0)); }

struct TrajectoryStep {
  double size = 0.0;    // max apparent size over the snippet window
  double reward = 0.0;  // intrinsic reward of the snippet
};

struct SizeRewardRow {
  std::size_t step = 0;
  double size = 0.0;
  double f_size = 0.0;
  double reward = 0.0;
};

struct SizeRewardAnalysis {
  std::vector<SizeRewardRow> rows;
  std::optional<double> pearson_r;
  std::string error;  // set when the correlation is undefined
};

inline SizeRewardAnalysis analyze_size_reward(const std::vector<TrajectoryStep>& steps) {
  SizeRewardAnalysis out;
  std::vector<double> f, r;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (steps[i].size < 0.0) throw DomainError("analyze_size_reward: negative size at step " + std::to_string(i));
    const double fx = size_transform(steps[i].size);
    out.rows.push_back({i, steps[i].size, fx, steps[i].reward});
    f.push_back(fx);
    r.push_back(steps[i].reward);
  }
  try {
    out.pearson_r = pearson(f, r);
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  return out;
}

// Turns toward the target half the time and acts uniformly otherwise; never
// attacks, so episodes run to the step limit and sizes cover the full range.
inline std::size_t exploration_action(const HuntConfig& cfg, const WorldState& s, Rng& rng) {
  if (rng.bernoulli(0.5)) return scripted_chaser_action(cfg, s, false);
  return rng.uniform_index(kAttack);  // noop, forward or a turn
}

// Rolls the exploration policy for `steps` steps and scores every snippet.
inline std::vector<TrajectoryStep> exploration_trajectory(const HuntConfig& cfg, const RewardModel& model,
                                                          std::size_t steps, std::uint64_t seed) {
  const Rng root(seed);
  Rng policy_rng = root.substream("policy");
  Rng episode_rng = root.substream("episodes");
  FrameEmbeddingCache frames(cfg);
  const std::size_t window = model.config().snippet_length;
  std::vector<TrajectoryStep> out;
  out.reserve(steps);

  ResetResult rr = env_reset(episode_rng.next_u64(), cfg);
  WorldState state = rr.state;
  std::deque<Vector> snippet{frames.get(rr.observation)};
  std::deque<double> sizes{rr.observation.apparent_size};
  while (out.size() < steps) {
    StepResult st = env_step(cfg, state, exploration_action(cfg, state, policy_rng));
    snippet.push_back(frames.get(st.observation));
    sizes.push_back(st.observation.apparent_size);
    if (snippet.size() > window) {
      snippet.pop_front();
      sizes.pop_front();
    }
    const std::vector<Vector> snip(snippet.begin(), snippet.end());
    out.push_back({*std::max_element(sizes.begin(), sizes.end()), model.reward(snip)});
    if (st.done) {
      rr = env_reset(episode_rng.next_u64(), cfg);
      state = rr.state;
      snippet.assign(1, frames.get(rr.observation));
      sizes.assign(1, rr.observation.apparent_size);
    } else {
      state = std::move(st.state);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Learning-curve aggregation

struct NamedCurve {
  std::string name;
  std::vector<RlCurvePoint> curve;
};

struct AblationRow {
  std::size_t step = 0;
  double mean = 0.0;
  double standard_error = 0.0;
  std::size_t n = 0;
};

struct AblationSummary {
  std::vector<AblationRow> rows;
  std::vector<std::string> warnings;
};

// Mean and standard error (sample std / sqrt(n)) of success rate per step.
inline AblationSummary compare_ablations(const std::vector<NamedCurve>& runs) {
  if (runs.empty()) throw DataError("compare_ablations: no runs");
  AblationSummary out;
  const auto& ref = runs.front().curve;
  std::string mismatched;
  for (const NamedCurve& r : runs) {
    bool same = r.curve.size() == ref.size();
    for (std::size_t i = 0; same && i < ref.size(); ++i) same = r.curve[i].step == ref[i].step;
    if (!same) mismatched += (mismatched.empty() ? "" : ", ") + r.name;
  }
  if (!mismatched.empty())
    throw DataError("compare_ablations: step grid differs from '" + runs.front().name + "' in: " + mismatched);
  if (runs.size() < 2) out.warnings.push_back("single run: standard error reported as 0");
  for (std::size_t i = 0; i < ref.size(); ++i) {
    std::vector<double> xs;
    for (const NamedCurve& r : runs) xs.push_back(r.curve[i].success_rate);
    AblationRow row;
    row.step = ref[i].step;
    row.n = xs.size();
    row.mean = mean(xs);
    row.standard_error = xs.size() < 2 ? 0.0 : sample_stddev(xs) / std::sqrt(static_cast<double>(xs.size()));
    out.rows.push_back(row);
  }
  return out;
}

}  // namespace rlvlm
