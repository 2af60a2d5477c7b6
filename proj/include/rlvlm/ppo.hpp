#pragma once

// PPO with GAE on HuntGrid. Actor and critic are separate frame-stack MLPs.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rlvlm/huntgrid.hpp"
#include "rlvlm/numerics.hpp"
#include "rlvlm/rewardgen.hpp"
#include "rlvlm/world.hpp"

namespace rlvlm {

struct PpoConfig {
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_epsilon = 0.02;
  double entropy_coef = 0.005;
  double value_coef = 0.5;
  double learning_rate = 1e-3;  // 1e-4 barely moves in 200k steps here
  std::size_t epochs = 8;
  std::size_t minibatches = 4;
  std::size_t steps = 1000;  // per environment per rollout
  std::size_t envs = 4;
  double max_grad_norm = 10.0;
  std::size_t hidden = 64;

  void validate() const {
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("ppo: gamma must be in (0, 1]");
    if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) throw ConfigError("ppo: gae_lambda must be in [0, 1]");
    if (!(clip_epsilon > 0.0)) throw ConfigError("ppo: clip_epsilon must be > 0");
    if (!(learning_rate > 0.0)) throw ConfigError("ppo: learning_rate must be > 0");
    if (epochs < 1 || minibatches < 1 || steps < 1 || envs < 1)
      throw ConfigError("ppo: epochs, minibatches, steps and envs must be >= 1");
    if (!(max_grad_norm > 0.0)) throw ConfigError("ppo: max_grad_norm must be > 0");
  }
};

// ---------------------------------------------------------------------------
// GAE

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

// `values` has one more entry than `rewards`: the last is the bootstrap value
// of the state after the final step (ignored if that step is terminal).
inline GaeResult gae(std::span<const double> rewards, std::span<const double> values,
                     std::span<const double> dones, double gamma, double lambda) {
  const std::size_t T = rewards.size();
  if (values.size() != T + 1 || dones.size() != T)
    throw DomainError("gae: expected |values| = |rewards| + 1 and |dones| = |rewards|");
  GaeResult out;
  out.advantages.assign(T, 0.0);
  out.returns.assign(T, 0.0);
  double next = 0.0;
  for (std::size_t t = T; t-- > 0;) {
    const double live = 1.0 - dones[t];
    const double delta = rewards[t] + gamma * values[t + 1] * live - values[t];
    next = delta + gamma * lambda * live * next;
    out.advantages[t] = next;
    out.returns[t] = next + values[t];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Policy

// Separate actor and critic MLPs. Sharing a trunk lets the value loss of a
// +100 terminal reward swamp the policy gradient after norm clipping.
class ActorCritic {
 public:
  ActorCritic() = default;
  ActorCritic(std::size_t input_dim, std::size_t hidden, Rng rng) {
    Rng a = rng.substream("actor"), c = rng.substream("critic");
    actor_ = Mlp::random({input_dim, hidden, hidden, kActionCount}, false, a, 1.0, 0.01);
    critic_ = Mlp::random({input_dim, hidden, hidden, 1}, false, c, 1.0, 1.0);
  }
  ActorCritic(Mlp actor, Mlp critic) : actor_(std::move(actor)), critic_(std::move(critic)) {
    if (actor_.output_dim() != kActionCount || critic_.output_dim() != 1 ||
        actor_.input_dim() != critic_.input_dim())
      throw DomainError("ActorCritic: network shapes do not fit the action set");
  }

  struct Output {
    std::vector<double> log_probs;
    std::vector<double> probs;
    double value = 0.0;
  };

  struct Cache {
    Mlp::Cache actor, critic;
  };

  Output evaluate(std::span<const double> input, Cache* cache = nullptr) const {
    Cache local;
    Cache& c = cache ? *cache : local;
    Output o;
    o.log_probs = log_probs(input, c.actor);
    for (double lp : o.log_probs) o.probs.push_back(std::exp(lp));
    o.value = critic_.forward(input, c.critic)[0];
    return o;
  }

  double value(std::span<const double> input) const { return critic_.forward(input)[0]; }

  std::size_t greedy(std::span<const double> input) const {
    Mlp::Cache c;
    const auto lp = log_probs(input, c);
    return static_cast<std::size_t>(std::max_element(lp.begin(), lp.end()) - lp.begin());
  }

  Mlp& actor() { return actor_; }
  const Mlp& actor() const { return actor_; }
  Mlp& critic() { return critic_; }
  const Mlp& critic() const { return critic_; }

 private:
  std::vector<double> log_probs(std::span<const double> input, Mlp::Cache& c) const {
    const Vector logits = actor_.forward(input, c);
    const double lse = log_sum_exp(logits.span());
    std::vector<double> out;
    for (double l : logits.values()) out.push_back(l - lse);
    return out;
  }

  Mlp actor_, critic_;
};

struct PpoSample {
  std::vector<double> input;
  std::size_t action = 0;
  double old_log_prob = 0.0;
  double old_value = 0.0;
  double advantage = 0.0;
  double ret = 0.0;
};

struct ObjectiveResult {
  double objective = 0.0;   // mean clipped surrogate + entropy bonus - value loss
  double surrogate = 0.0;   // mean clipped surrogate alone
  double entropy = 0.0;
  double value_loss = 0.0;
  double max_ratio_deviation = 0.0;  // max |ratio - 1|
  double clip_fraction = 0.0;
  std::vector<double> actor_grad;   // d(objective)/d(actor params)
  std::vector<double> critic_grad;  // d(objective)/d(critic params)
};

// Clipped PPO objective over a set of samples, with its exact gradient.
inline ObjectiveResult ppo_objective(const ActorCritic& policy, std::span<const PpoSample> samples,
                                     std::span<const std::size_t> indices, const PpoConfig& cfg) {
  ObjectiveResult r;
  r.actor_grad.assign(policy.actor().parameter_count(), 0.0);
  r.critic_grad.assign(policy.critic().parameter_count(), 0.0);
  if (indices.empty()) return r;
  const double inv_n = 1.0 / static_cast<double>(indices.size());
  const double lo = 1.0 - cfg.clip_epsilon, hi = 1.0 + cfg.clip_epsilon;
  ActorCritic::Cache cache;
  std::vector<double> upstream(kActionCount);
  double value_upstream = 0.0;
  std::size_t clipped = 0;
  for (std::size_t idx : indices) {
    const PpoSample& s = samples[idx];
    const ActorCritic::Output o = policy.evaluate(s.input, &cache);
    const double ratio = std::exp(o.log_probs[s.action] - s.old_log_prob);
    const double unclipped = ratio * s.advantage;
    const double clipped_ratio = std::clamp(ratio, lo, hi);
    const double surr = std::min(unclipped, clipped_ratio * s.advantage);
    // The unclipped branch carries the gradient unless the clipped one is
    // strictly smaller, which happens only outside [lo, hi].
    const bool through_ratio = unclipped <= clipped_ratio * s.advantage;
    clipped += through_ratio ? 0 : 1;
    double entropy = 0.0;
    for (std::size_t a = 0; a < kActionCount; ++a) entropy -= o.probs[a] * o.log_probs[a];
    const double verr = o.value - s.ret;

    r.surrogate += surr * inv_n;
    r.entropy += entropy * inv_n;
    r.value_loss += 0.5 * verr * verr * inv_n;
    r.max_ratio_deviation = std::max(r.max_ratio_deviation, std::abs(ratio - 1.0));

    const double dsurr_dlogp = through_ratio ? unclipped : 0.0;
    for (std::size_t a = 0; a < kActionCount; ++a) {
      const double onehot = a == s.action ? 1.0 : 0.0;
      const double d_logp = dsurr_dlogp * (onehot - o.probs[a]);
      const double d_ent = -o.probs[a] * (o.log_probs[a] + entropy);
      upstream[a] = (d_logp + cfg.entropy_coef * d_ent) * inv_n;
    }
    value_upstream = -cfg.value_coef * verr * inv_n;
    policy.actor().backward(cache.actor, upstream, r.actor_grad);
    policy.critic().backward(cache.critic, std::span<const double>(&value_upstream, 1), r.critic_grad);
  }
  r.objective = r.surrogate + cfg.entropy_coef * r.entropy - cfg.value_coef * r.value_loss;
  r.clip_fraction = static_cast<double>(clipped) * inv_n;
  return r;
}

struct PpoStats {
  double surrogate = 0.0;
  double entropy = 0.0;
  double value_loss = 0.0;
  double clip_fraction = 0.0;
  double first_minibatch_ratio_deviation = 0.0;
  std::size_t gradient_steps = 0;
};

inline void normalize_advantages(std::vector<PpoSample>& samples) {
  if (samples.size() < 2) return;
  double m = 0.0;
  for (const auto& s : samples) m += s.advantage;
  m /= static_cast<double>(samples.size());
  double v = 0.0;
  for (const auto& s : samples) v += (s.advantage - m) * (s.advantage - m);
  const double sd = std::sqrt(v / static_cast<double>(samples.size()));
  for (auto& s : samples) s.advantage = (s.advantage - m) / (sd + 1e-8);
}

struct PpoOptimizer {
  Adam actor, critic;
  explicit PpoOptimizer(const ActorCritic& p)
      : actor(p.actor().parameter_count()), critic(p.critic().parameter_count()) {}
};

// Epochs of shuffled minibatch ascent on the clipped objective. Advantages
// are normalized over the whole batch first.
inline PpoStats ppo_update(std::vector<PpoSample> samples, ActorCritic& policy, PpoOptimizer& optimizer,
                           const PpoConfig& cfg, Rng& rng) {
  cfg.validate();
  PpoStats stats;
  if (samples.empty()) return stats;
  normalize_advantages(samples);
  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const std::size_t mb = std::max<std::size_t>(1, samples.size() / cfg.minibatches);
  std::size_t count = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t b = 0; b < cfg.minibatches; ++b) {
      const std::size_t begin = b * mb;
      const std::size_t end = (b + 1 == cfg.minibatches) ? samples.size() : std::min(samples.size(), begin + mb);
      if (begin >= end) continue;
      ObjectiveResult r = ppo_objective(policy, samples,
                                        std::span<const std::size_t>(order).subspan(begin, end - begin), cfg);
      if (!std::isfinite(r.objective))
        throw NumericalError("ppo_update: non-finite objective (epoch " + std::to_string(epoch) + ")");
      if (count == 0) stats.first_minibatch_ratio_deviation = r.max_ratio_deviation;
      // ascent: negate before handing to the minimizer
      for (double& g : r.actor_grad) g = -g;
      for (double& g : r.critic_grad) g = -g;
      clip_grad_norm(r.actor_grad, cfg.max_grad_norm);
      clip_grad_norm(r.critic_grad, cfg.max_grad_norm);
      optimizer.actor.step(policy.actor().parameters(), r.actor_grad, cfg.learning_rate);
      optimizer.critic.step(policy.critic().parameters(), r.critic_grad, cfg.learning_rate);
      stats.surrogate += r.surrogate;
      stats.entropy += r.entropy;
      stats.value_loss += r.value_loss;
      stats.clip_fraction += r.clip_fraction;
      ++count;
    }
  }
  const double inv = 1.0 / static_cast<double>(count);
  stats.surrogate *= inv;
  stats.entropy *= inv;
  stats.value_loss *= inv;
  stats.clip_fraction *= inv;
  stats.gradient_steps = count;
  return stats;
}

// ---------------------------------------------------------------------------
// Evaluation

// Maps (state, policy input) to an action.
using HuntPolicy = std::function<std::size_t(const WorldState&, const std::vector<double>&)>;

inline std::uint64_t evaluation_seed(std::uint64_t seed, std::size_t episode) {
  return Rng(seed).substream("eval").substream(episode).next_u64();
}

// Fraction of episodes that end in a kill before the step limit.
inline double evaluate_success(const HuntPolicy& act, const HuntConfig& cfg, std::size_t episodes,
                               std::uint64_t seed) {
  if (episodes < 1) throw DomainError("evaluate_success: need at least one episode");
  std::size_t wins = 0;
  for (std::size_t e = 0; e < episodes; ++e) {
    ResetResult rr = env_reset(evaluation_seed(seed, e), cfg);
    WorldState s = rr.state;
    FrameStack stack(cfg.frame_stack);
    stack.reset(rr.observation);
    while (!s.done) {
      StepResult st = env_step(cfg, s, act(s, stack.input()));
      s = std::move(st.state);
      stack.push(st.observation);
      if (st.r_env > 0.0) ++wins;
    }
  }
  return static_cast<double>(wins) / static_cast<double>(episodes);
}

inline HuntPolicy greedy_policy(const ActorCritic& policy) {
  return [&policy](const WorldState&, const std::vector<double>& x) { return policy.greedy(x); };
}

// ---------------------------------------------------------------------------
// Training driver

enum class RewardSource { sparse_only, mineclip_style, clip4mc_style };

inline const char* reward_source_name(RewardSource r) {
  switch (r) {
    case RewardSource::mineclip_style: return "mineclip";
    case RewardSource::clip4mc_style: return "clip4mc";
    default: return "sparse";
  }
}

inline RewardSource parse_reward_source(const std::string& s) {
  if (s == "sparse" || s == "sparse_only") return RewardSource::sparse_only;
  if (s == "mineclip" || s == "mineclip_style") return RewardSource::mineclip_style;
  if (s == "clip4mc" || s == "clip4mc_style") return RewardSource::clip4mc_style;
  throw ConfigError("unknown reward source '" + s + "'");
}

// Frame embeddings of HuntGrid views depend only on (visible, apparent
// size), so they are memoized.
class FrameEmbeddingCache {
 public:
  explicit FrameEmbeddingCache(const HuntConfig& cfg) : cfg_(cfg) {}
  const Vector& get(const Observation& o) {
    const double key = o.visible ? o.apparent_size : -1.0;
    auto it = cache_.find(key);
    if (it == cache_.end()) {
      it = cache_.emplace(key, FrozenFrameEncoder::standard().embed(frame_content(cfg_, o))).first;
    }
    return it->second;
  }

 private:
  HuntConfig cfg_;
  std::map<double, Vector> cache_;
};

// Intrinsic reward for the latest snippet of frames, tracking its own
// history.
class SnippetRewarder {
 public:
  SnippetRewarder(const RewardModel& model, const HuntConfig& cfg) : model_(model), frames_(cfg) {}

  void reset(const Observation& o) {
    history_.clear();
    push(o);
  }
  void push(const Observation& o) {
    history_.push_back(frames_.get(o));
    if (history_.size() > model_.config().snippet_length) history_.pop_front();
  }
  double reward() const {
    const std::vector<Vector> frames(history_.begin(), history_.end());
    return model_.reward(frames);
  }

 private:
  const RewardModel& model_;
  FrameEmbeddingCache frames_;
  std::deque<Vector> history_;
};

struct RlCurvePoint {
  std::size_t step = 0;
  double success_rate = 0.0;
  double mean_r_env = 0.0;  // per-step mean over rollouts since the previous point
  double mean_r_mc = 0.0;
};

struct RlRunConfig {
  HuntConfig env;
  PpoConfig ppo;
  RewardConfig reward;
  RewardSource source = RewardSource::sparse_only;
  std::size_t total_steps = 200000;
  std::size_t eval_interval = 10000;
  std::size_t eval_episodes = 50;
};

struct RlRunResult {
  std::vector<RlCurvePoint> curve;
  ActorCritic policy;
};

// Trains one seed. `reward_model` is required for the shaped sources.
inline RlRunResult train_rl(const RlRunConfig& cfg, const RewardModel* reward_model, std::uint64_t seed) {
  cfg.env.validate();
  cfg.ppo.validate();
  if (cfg.source != RewardSource::sparse_only && reward_model == nullptr)
    throw ConfigError(std::string("train_rl: reward source '") + reward_source_name(cfg.source) +
                      "' needs an encoder checkpoint");
  if (cfg.eval_interval == 0) throw ConfigError("train_rl: eval_interval must be > 0");
  const Rng root(seed);
  RlRunResult result;
  result.policy = ActorCritic(FrameStack::input_dim(cfg.env), cfg.ppo.hidden, root.substream("init"));
  ActorCritic& policy = result.policy;
  PpoOptimizer optimizer(policy);
  Rng action_rng = root.substream("action");
  Rng update_rng = root.substream("update");
  Rng episode_rng = root.substream("episodes");
  const std::uint64_t eval_seed = root.substream("evaluation").next_u64();
  const double c = cfg.source == RewardSource::sparse_only ? 0.0 : cfg.reward.mix;

  struct EnvSlot {
    WorldState state;
    FrameStack stack;
    std::optional<SnippetRewarder> rewarder;
  };
  std::vector<EnvSlot> envs;
  for (std::size_t e = 0; e < cfg.ppo.envs; ++e) {
    ResetResult rr = env_reset(episode_rng.next_u64(), cfg.env);
    EnvSlot slot{rr.state, FrameStack(cfg.env.frame_stack), std::nullopt};
    slot.stack.reset(rr.observation);
    if (reward_model && c > 0.0) {
      slot.rewarder.emplace(*reward_model, cfg.env);
      slot.rewarder->reset(rr.observation);
    }
    envs.push_back(std::move(slot));
  }

  auto evaluate = [&](std::size_t step, double r_env_sum, double r_mc_sum, std::size_t n) {
    RlCurvePoint p;
    p.step = step;
    p.success_rate = evaluate_success(greedy_policy(policy), cfg.env, cfg.eval_episodes, eval_seed);
    p.mean_r_env = n ? r_env_sum / static_cast<double>(n) : 0.0;
    p.mean_r_mc = n ? r_mc_sum / static_cast<double>(n) : 0.0;
    result.curve.push_back(p);
  };

  evaluate(0, 0.0, 0.0, 0);
  std::size_t step = 0, next_eval = cfg.eval_interval;
  double r_env_sum = 0.0, r_mc_sum = 0.0;
  std::size_t r_count = 0;
  const std::size_t T = cfg.ppo.steps, E = cfg.ppo.envs;
  while (step < cfg.total_steps) {
    const std::size_t horizon = std::min(T, (cfg.total_steps - step + E - 1) / E);
    std::vector<std::vector<PpoSample>> per_env(E);
    std::vector<std::vector<double>> rewards(E), values(E), dones(E);
    for (std::size_t t = 0; t < horizon; ++t) {
      for (std::size_t e = 0; e < E; ++e) {
        EnvSlot& slot = envs[e];
        PpoSample s;
        s.input = slot.stack.input();
        const ActorCritic::Output o = policy.evaluate(s.input);
        double u = action_rng.uniform(), acc = 0.0;
        std::size_t a = kActionCount - 1;
        for (std::size_t k = 0; k < kActionCount; ++k) {
          acc += o.probs[k];
          if (u < acc) {
            a = k;
            break;
          }
        }
        s.action = a;
        s.old_log_prob = o.log_probs[a];
        s.old_value = o.value;
        StepResult st = env_step(cfg.env, slot.state, a);
        double r_mc = 0.0;
        if (slot.rewarder) {
          slot.rewarder->push(st.observation);
          r_mc = slot.rewarder->reward();
        }
        r_env_sum += st.r_env;
        r_mc_sum += r_mc;
        ++r_count;
        rewards[e].push_back(shaped_reward(st.r_env, r_mc, c));
        values[e].push_back(o.value);
        dones[e].push_back(st.done ? 1.0 : 0.0);
        per_env[e].push_back(std::move(s));
        if (st.done) {
          ResetResult rr = env_reset(episode_rng.next_u64(), cfg.env);
          slot.state = rr.state;
          slot.stack.reset(rr.observation);
          if (slot.rewarder) slot.rewarder->reset(rr.observation);
        } else {
          slot.state = std::move(st.state);
          slot.stack.push(st.observation);
        }
      }
    }
    std::vector<PpoSample> batch;
    for (std::size_t e = 0; e < E; ++e) {
      values[e].push_back(policy.value(envs[e].stack.input()));
      const GaeResult g = gae(rewards[e], values[e], dones[e], cfg.ppo.gamma, cfg.ppo.gae_lambda);
      for (std::size_t t = 0; t < per_env[e].size(); ++t) {
        per_env[e][t].advantage = g.advantages[t];
        per_env[e][t].ret = g.returns[t];
        batch.push_back(std::move(per_env[e][t]));
      }
    }
    ppo_update(std::move(batch), policy, optimizer, cfg.ppo, update_rng);
    step += horizon * E;
    while (step >= next_eval) {
      evaluate(next_eval, r_env_sum, r_mc_sum, r_count);
      r_env_sum = r_mc_sum = 0.0;
      r_count = 0;
      next_eval += cfg.eval_interval;
    }
  }
  return result;
}

}  // namespace rlvlm
