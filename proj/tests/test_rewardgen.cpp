#include <gtest/gtest.h>

#include "rlvlm/rewardgen.hpp"

using namespace rlvlm;

namespace {

PromptSet basis_prompts(std::size_t N, std::size_t d) {
  PromptSet p;
  for (std::size_t i = 0; i < N; ++i) {
    Vector e(d);
    e[i] = 1.0;
    p.embeddings.push_back(e);
    p.names.push_back("e" + std::to_string(i));
    p.templates.push_back("t" + std::to_string(i));
  }
  return p;
}

}  // namespace

TEST(PromptProbability, Examples) {
  const PromptSet p16 = basis_prompts(16, 17);
  Vector equi(17, 0.0);
  for (std::size_t i = 0; i < 16; ++i) equi[i] = 1.0;
  EXPECT_NEAR(prompt_probability(equi, p16, 0.07), 1.0 / 16, 1e-12);
  Vector goal(17);
  goal[0] = 1.0;
  EXPECT_GE(prompt_probability(goal, p16, 0.07), 0.999);

  const PromptSet p2 = basis_prompts(2, 3);
  EXPECT_NEAR(prompt_probability(Vector{0, 0, 1}, p2, 0.07), 0.5, 1e-15);
  EXPECT_THROW(prompt_probability(Vector{0, 1}, p2, 0.07), DomainError);
}

TEST(PromptProbability, SumsToOneAndIgnoresNegativeOrder) {
  Rng rng(1);
  PromptSet p;
  for (int i = 0; i < 8; ++i) {
    Vector e(6);
    for (double& x : e) x = rng.normal();
    p.embeddings.push_back(normalized(e));
    p.names.push_back("n");
    p.templates.push_back("t");
  }
  for (int t = 0; t < 50; ++t) {
    Vector v(6);
    for (double& x : v) x = rng.normal();
    const Vector probs = prompt_probabilities(v, p, 0.07);
    double s = 0.0;
    for (double x : probs) s += x;
    EXPECT_NEAR(s, 1.0, 1e-12);
    PromptSet q = p;
    std::vector<Vector> neg(q.embeddings.begin() + 1, q.embeddings.end());
    rng.shuffle(neg);
    std::copy(neg.begin(), neg.end(), q.embeddings.begin() + 1);
    EXPECT_NEAR(prompt_probability(v, q, 0.07), probs[0], 1e-14);
  }
}

TEST(IntrinsicReward, Examples) {
  EXPECT_EQ(intrinsic_reward(1.0 / 16, 16), 0.0);
  EXPECT_EQ(intrinsic_reward(1.0, 16), 0.9375);
  EXPECT_EQ(intrinsic_reward(0.01, 16), 0.0);
  EXPECT_THROW(intrinsic_reward(0.5, 1), DomainError);
}

TEST(IntrinsicReward, NonNegativeAndIncreasingAboveFloor) {
  Rng rng(2);
  for (int t = 0; t < 100000; ++t) {
    const std::size_t n = 2 + rng.uniform_index(30);
    const double p = rng.uniform();
    const double r = intrinsic_reward(p, n);
    ASSERT_GE(r, 0.0);
    const double q = p + rng.uniform(1e-6, 0.1);
    if (p > 1.0 / n) ASSERT_GT(intrinsic_reward(q, n), r);
  }
}

TEST(ShapedReward, Examples) {
  EXPECT_DOUBLE_EQ(shaped_reward(100, 0.5, 0.1), 100.05);
  EXPECT_EQ(shaped_reward(100, 0.5, 0.0), 100.0);
  EXPECT_DOUBLE_EQ(shaped_reward(0, 0.9375, 0.1), 0.09375);
}

TEST(SnippetEmbedding, PadsShortHistoryWithFirstFrame) {
  const EncoderPair enc = EncoderPair::initialize(Rng(3));
  Rng rng(4);
  std::vector<Vector> frames;
  for (int i = 0; i < 3; ++i) {
    Vector f(kEmbeddingDim);
    for (double& x : f) x = rng.normal();
    frames.push_back(f);
  }
  std::vector<Vector> padded(14, frames[0]);
  padded.push_back(frames[1]);
  padded.push_back(frames[2]);
  const Vector a = snippet_embedding(enc, frames, 16);
  const Vector b = enc.encode_video(mean_of(padded));
  for (std::size_t k = 0; k < a.dim(); ++k) EXPECT_NEAR(a[k], b[k], 1e-14);
  EXPECT_THROW(snippet_embedding(enc, std::vector<Vector>{}, 16), DomainError);
}

TEST(SnippetEmbedding, UsesOnlyTheLastFrames) {
  const EncoderPair enc = EncoderPair::initialize(Rng(5));
  std::vector<Vector> frames;
  for (int i = 0; i < 20; ++i) frames.push_back(Vector(kEmbeddingDim, 0.1 * i + 0.05));
  const std::vector<Vector> tail(frames.end() - 16, frames.end());
  EXPECT_EQ(snippet_embedding(enc, frames, 16), snippet_embedding(enc, tail, 16));
}

TEST(PromptSet, BuildAndValidate) {
  const EncoderPair enc = EncoderPair::initialize(Rng(6));
  const PromptSet p = build_prompt_set(enc.text, "cow");
  EXPECT_EQ(p.size(), 16u);
  EXPECT_EQ(p.names[0], "cow");
  EXPECT_EQ(p.templates[0], "hunt a cow in plains with a diamond sword");
  EXPECT_THROW(build_prompt_set(enc.text, "cow", 40), ConfigError);
  PromptSet bad = p;
  bad.task_index = 16;
  EXPECT_THROW(bad.validate(), DomainError);
}

TEST(RewardConfig, Validation) {
  RewardConfig c;
  c.mix = -1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.snippet_length = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}
