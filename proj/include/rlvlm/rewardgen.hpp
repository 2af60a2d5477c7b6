#pragma once

// Intrinsic reward from a trained dual encoder: the softmax probability of
// the goal prompt among N prompts, floored at the uniform baseline.

#include <algorithm>
#include <cstddef>
#include <deque>
#include <span>
#include <string>
#include <vector>

#include "rlvlm/contrastive.hpp"
#include "rlvlm/numerics.hpp"
#include "rlvlm/world.hpp"

namespace rlvlm {

inline constexpr const char* kHuntPromptTemplate = "hunt a {E} in plains with a diamond sword";

struct PromptSet {
  std::vector<std::string> names;
  std::vector<std::string> templates;  // rendered prompt text
  std::vector<Vector> embeddings;
  std::size_t task_index = 0;

  std::size_t size() const { return embeddings.size(); }

  void validate() const {
    if (embeddings.size() < 2) throw DomainError("PromptSet: need at least two prompts");
    if (names.size() != embeddings.size() || templates.size() != embeddings.size())
      throw DomainError("PromptSet: misaligned fields");
    if (task_index >= embeddings.size()) throw DomainError("PromptSet: task_index out of range");
    for (const Vector& e : embeddings) {
      if (std::abs(norm(e) - 1.0) > 1e-6) throw DomainError("PromptSet: embeddings must be unit norm");
    }
  }
};

inline std::string render_prompt(const std::string& tmpl, const std::string& entity) {
  std::string out = tmpl;
  const auto pos = out.find("{E}");
  if (pos != std::string::npos) out.replace(pos, 3, entity);
  return out;
}

// Goal prompt first, then one templated prompt per non-goal entity.
inline PromptSet build_prompt_set(const TextEncoder& text, const std::string& goal_entity,
                                  std::size_t prompt_count = 16,
                                  const std::string& tmpl = kHuntPromptTemplate) {
  const WorldVocab& w = WorldVocab::standard();
  std::vector<std::string> order{goal_entity};
  for (const auto& e : w.entity_names()) {
    if (e != goal_entity && order.size() < prompt_count) order.push_back(e);
  }
  if (order.size() < prompt_count) throw ConfigError("build_prompt_set: not enough entities for the requested prompt count");
  PromptSet p;
  for (const auto& e : order) {
    p.names.push_back(e);
    p.templates.push_back(render_prompt(tmpl, e));
    p.embeddings.push_back(text.encode(split_words(p.templates.back())));
  }
  p.task_index = 0;
  p.validate();
  return p;
}

struct RewardConfig {
  double temperature = kDefaultTemperature;
  double mix = 0.1;  // c in r_env + c * r_mc
  std::size_t snippet_length = 16;

  void validate() const {
    if (!(temperature > 0.0)) throw ConfigError("reward: temperature must be > 0");
    if (mix < 0.0) throw ConfigError("reward: mix coefficient must be >= 0");
    if (snippet_length < 1) throw ConfigError("reward: snippet_length must be >= 1");
  }
};

inline Vector prompt_probabilities(const Vector& video_emb, const PromptSet& prompts, double lambda) {
  std::vector<double> logits;
  for (const Vector& p : prompts.embeddings) {
    if (p.dim() != video_emb.dim()) throw DomainError("prompt_probability: dimension mismatch");
    logits.push_back(cosine_similarity(video_emb, p));
  }
  return softmax(logits, lambda);
}

inline double prompt_probability(const Vector& video_emb, const PromptSet& prompts, double lambda) {
  return prompt_probabilities(video_emb, prompts, lambda)[prompts.task_index];
}

// max(P_G - 1/N, 0)
inline double intrinsic_reward(double p_goal, std::size_t prompt_count) {
  if (prompt_count < 2) throw DomainError("intrinsic_reward: need N >= 2");
  return std::max(p_goal - 1.0 / static_cast<double>(prompt_count), 0.0);
}

inline double shaped_reward(double r_env, double r_mc, double c) { return r_env + c * r_mc; }

// Video snippet embedding from the most recent frames. Short histories are
// front-padded with their first frame.
inline Vector snippet_embedding(const EncoderPair& enc, std::span<const Vector> recent_frames,
                                std::size_t snippet_length) {
  if (recent_frames.empty()) throw DomainError("snippet_embedding: no frames");
  const std::size_t n = std::min(recent_frames.size(), snippet_length);
  const auto tail = recent_frames.subspan(recent_frames.size() - n, n);
  Vector sum(tail.front().dim());
  for (std::size_t i = n; i < snippet_length; ++i) sum += tail.front();
  for (const Vector& f : tail) sum += f;
  sum *= 1.0 / static_cast<double>(snippet_length);
  return enc.encode_video(sum);
}

class RewardModel {
 public:
  RewardModel(EncoderPair encoders, PromptSet prompts, RewardConfig cfg)
      : enc_(std::move(encoders)), prompts_(std::move(prompts)), cfg_(cfg) {
    prompts_.validate();
    cfg_.validate();
  }

  double goal_probability(std::span<const Vector> recent_frames) const {
    return prompt_probability(snippet_embedding(enc_, recent_frames, cfg_.snippet_length), prompts_,
                              cfg_.temperature);
  }
  double reward(std::span<const Vector> recent_frames) const {
    return intrinsic_reward(goal_probability(recent_frames), prompts_.size());
  }

  const RewardConfig& config() const { return cfg_; }
  const PromptSet& prompts() const { return prompts_; }
  const EncoderPair& encoders() const { return enc_; }

 private:
  EncoderPair enc_;
  PromptSet prompts_;
  RewardConfig cfg_;
};

}  // namespace rlvlm
