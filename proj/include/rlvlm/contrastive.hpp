#pragma once

// Symmetric InfoNCE training of a toy video/text dual encoder with the
// size-conditioned positive swap, plus R@K retrieval evaluation.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rlvlm/numerics.hpp"
#include "rlvlm/pipeline.hpp"
#include "rlvlm/world.hpp"

namespace rlvlm {

inline constexpr double kDefaultTemperature = 0.07;

struct PairBatch {
  std::vector<Vector> video_embeddings;
  std::vector<Vector> text_embeddings;
  std::vector<double> sizes;
  std::vector<std::size_t> ids;
  // positive_video[i] is the video labelled as text i's positive. Empty
  // means the diagonal; a swap moves the label and leaves the videos alone.
  std::vector<std::size_t> positive_video;

  std::size_t size() const { return video_embeddings.size(); }
  std::size_t positive(std::size_t i) const { return positive_video.empty() ? i : positive_video[i]; }

  void validate() const {
    const std::size_t b = video_embeddings.size();
    if (text_embeddings.size() != b || sizes.size() != b || ids.size() != b)
      throw DomainError("PairBatch: misaligned field lengths");
    if (!positive_video.empty()) {
      if (positive_video.size() != b) throw DomainError("PairBatch: misaligned positive labels");
      for (std::size_t p : positive_video) {
        if (p >= b) throw DomainError("PairBatch: positive label out of range");
      }
    }
    for (double s : sizes) {
      if (!(s >= 0.0 && s <= 1.0)) throw DomainError("PairBatch: sizes must lie in [0, 1]");
    }
  }
};

struct SwapConfig {
  double p_max = 0.5;
  double tau = 0.02;

  void validate() const {
    if (!(p_max >= 0.0 && p_max <= 1.0)) throw ConfigError("swap: p_max must be in [0, 1]");
    if (!(tau > 0.0)) throw ConfigError("swap: tau must be > 0");
  }
};

// exp(a.p / lambda) / sum over {p} U negatives of exp(a.z / lambda).
inline double nce(const Vector& anchor, const Vector& positive, std::span<const Vector> negatives,
                  double lambda) {
  if (!(lambda > 0.0)) throw DomainError("nce: temperature must be > 0");
  std::vector<double> logits;
  logits.reserve(negatives.size() + 1);
  logits.push_back(dot(anchor, positive) / lambda);
  for (const Vector& z : negatives) logits.push_back(dot(anchor, z) / lambda);
  return std::exp(logits.front() - log_sum_exp(logits));
}

struct LossResult {
  double loss = 0.0;
  std::vector<Vector> grad_video;
  std::vector<Vector> grad_text;
};

// L = -sum_i [log NCE(v_p(i) -> t_i) + log NCE(t_i -> v_p(i))] over in-batch
// negatives, p(i) = batch.positive(i), with analytic gradients w.r.t. every
// embedding.
inline LossResult symmetric_loss(const PairBatch& batch, double lambda) {
  const std::size_t B = batch.size();
  if (B == 0) throw DomainError("symmetric_loss: empty batch");
  if (!(lambda > 0.0)) throw DomainError("symmetric_loss: temperature must be > 0");
  if (batch.text_embeddings.size() != B) throw DomainError("symmetric_loss: misaligned batch");
  if (!batch.positive_video.empty() && batch.positive_video.size() != B)
    throw DomainError("symmetric_loss: misaligned positive labels");
  const std::size_t d = batch.video_embeddings.front().dim();

  Matrix s(B, B);  // s(a, b) = v_a . t_b / lambda
  for (std::size_t a = 0; a < B; ++a) {
    for (std::size_t b = 0; b < B; ++b) {
      s(a, b) = dot(batch.video_embeddings[a], batch.text_embeddings[b]) / lambda;
    }
  }
  // Each directional term adds (softmax - onehot) to dL/dS.
  Matrix g(B, B);
  LossResult out;
  std::vector<double> buf(B);
  for (std::size_t i = 0; i < B; ++i) {
    const std::size_t p = batch.positive(i);
    if (p >= B) throw DomainError("symmetric_loss: positive label out of range");
    // video p -> texts
    for (std::size_t b = 0; b < B; ++b) buf[b] = s(p, b);
    double lse = log_sum_exp(buf);
    out.loss += lse - s(p, i);
    for (std::size_t b = 0; b < B; ++b) g(p, b) += std::exp(s(p, b) - lse);
    g(p, i) -= 1.0;
    // text i -> videos
    for (std::size_t a = 0; a < B; ++a) buf[a] = s(a, i);
    lse = log_sum_exp(buf);
    out.loss += lse - s(p, i);
    for (std::size_t a = 0; a < B; ++a) g(a, i) += std::exp(s(a, i) - lse);
    g(p, i) -= 1.0;
  }
  out.grad_video.assign(B, Vector(d));
  out.grad_text.assign(B, Vector(d));
  for (std::size_t a = 0; a < B; ++a) {
    for (std::size_t b = 0; b < B; ++b) {
      const double w = g(a, b) / lambda;
      if (w == 0.0) continue;
      const Vector& v = batch.video_embeddings[a];
      const Vector& t = batch.text_embeddings[b];
      for (std::size_t k = 0; k < d; ++k) {
        out.grad_video[a][k] += w * t[k];
        out.grad_text[b][k] += w * v[k];
      }
    }
  }
  return out;
}

// P_max * max(0, 1 - size / tau), size already normalized by the frame area.
inline double swap_probability(double size, const SwapConfig& cfg) {
  if (size < 0.0) throw DomainError("swap_probability: negative size");
  return cfg.p_max * std::max(0.0, 1.0 - size / cfg.tau);
}

struct SwapEvent {
  std::size_t item = 0;    // text whose positive label moved
  std::size_t source = 0;  // video that now carries the label
  bool operator==(const SwapEvent&) const = default;
};

struct SwapLog {
  std::vector<SwapEvent> events;
  std::vector<std::string> warnings;
};

// Independent Bernoulli per item; the replacement is uniform over the other
// positions. A single-item batch has nothing to swap with.
inline SwapLog draw_swaps(std::span<const double> sizes, const SwapConfig& cfg, Rng& rng) {
  SwapLog log;
  const std::size_t B = sizes.size();
  for (std::size_t i = 0; i < B; ++i) {
    const double p = swap_probability(sizes[i], cfg);
    if (p <= 0.0) continue;
    if (B < 2) {
      log.warnings.push_back("swap skipped: batch of one has no negative to swap in");
      continue;
    }
    if (rng.bernoulli(p)) {
      log.events.push_back({i, (i + 1 + rng.uniform_index(B - 1)) % B});
    }
  }
  return log;
}

// Moves the positive label of each drawn item to another in-batch video. The
// original video stays in the batch, now as a negative for its own text.
inline std::pair<PairBatch, SwapLog> apply_swaps(const PairBatch& batch, const SwapConfig& cfg,
                                                 Rng& rng) {
  batch.validate();
  SwapLog log = draw_swaps(batch.sizes, cfg, rng);
  PairBatch out = batch;
  if (out.positive_video.empty()) {
    out.positive_video.resize(out.size());
    for (std::size_t i = 0; i < out.size(); ++i) out.positive_video[i] = i;
  }
  for (const SwapEvent& e : log.events) out.positive_video[e.item] = batch.positive(e.source);
  return {std::move(out), std::move(log)};
}

// ---------------------------------------------------------------------------
// Encoders

// Bag-of-tokens text encoder: normalized mean of per-token embedding rows.
// Keyword surface forms share their canonical row; unknown tokens are skipped.
class TextEncoder {
 public:
  struct Cache {
    std::vector<std::size_t> ids;
    Vector raw;
    double norm = 1.0;
  };

  TextEncoder() = default;
  TextEncoder(std::vector<std::string> vocabulary, std::size_t dim)
      : vocab_(std::move(vocabulary)), dim_(dim), table_(vocab_.size() * dim, 0.0) {
    for (std::size_t i = 0; i < vocab_.size(); ++i) index_[vocab_[i]] = i;
  }

  static TextEncoder random(std::vector<std::string> vocabulary, std::size_t dim, Rng& rng) {
    TextEncoder t(std::move(vocabulary), dim);
    for (double& x : t.table_) x = rng.normal(0.0, 1.0 / std::sqrt(static_cast<double>(dim)));
    return t;
  }

  std::size_t dim() const { return dim_; }
  const std::vector<std::string>& vocabulary() const { return vocab_; }
  std::vector<double>& parameters() { return table_; }
  const std::vector<double>& parameters() const { return table_; }

  std::vector<std::size_t> token_ids(const std::vector<std::string>& tokens) const {
    const KeywordRegistry& reg = WorldVocab::standard().registry();
    std::vector<std::size_t> ids;
    for (const std::string& t : tokens) {
      const auto canonical = reg.match(t);
      auto it = index_.find(canonical ? *canonical : t);
      if (it != index_.end()) ids.push_back(it->second);
    }
    return ids;
  }

  Vector encode_ids(const std::vector<std::size_t>& ids, Cache* cache = nullptr) const {
    if (ids.empty()) throw DomainError("TextEncoder: no known tokens");
    Vector raw(dim_);
    for (std::size_t id : ids) {
      const double* row = table_.data() + id * dim_;
      for (std::size_t k = 0; k < dim_; ++k) raw[k] += row[k];
    }
    raw *= 1.0 / static_cast<double>(ids.size());
    const double n = norm(raw);
    if (!(n > 0.0)) throw NumericalError("TextEncoder: zero embedding");
    if (cache) *cache = {ids, raw, n};
    return raw * (1.0 / n);
  }

  Vector encode(const std::vector<std::string>& tokens) const { return encode_ids(token_ids(tokens)); }

  void backward(const Cache& cache, const Vector& upstream, std::span<double> grad) const {
    const double n = cache.norm;
    double uy = 0.0;
    for (std::size_t k = 0; k < dim_; ++k) uy += upstream[k] * cache.raw[k] / n;
    const double scale = 1.0 / (n * static_cast<double>(cache.ids.size()));
    for (std::size_t id : cache.ids) {
      double* row = grad.data() + id * dim_;
      for (std::size_t k = 0; k < dim_; ++k) {
        row[k] += (upstream[k] - uy * cache.raw[k] / n) * scale;
      }
    }
  }

 private:
  std::vector<std::string> vocab_;
  std::map<std::string, std::size_t> index_;
  std::size_t dim_ = 0;
  std::vector<double> table_;
};

// Video side: mean frame embedding -> 2-layer adapter -> unit vector.
// Text side: bag-of-tokens -> identity adapter.
struct EncoderPair {
  TextEncoder text;
  Mlp video;
  double temperature = kDefaultTemperature;

  static EncoderPair initialize(Rng rng, std::size_t hidden = kFrameEncoderHidden,
                                double temperature = kDefaultTemperature) {
    EncoderPair p;
    Rng text_rng = rng.substream("text");
    Rng video_rng = rng.substream("video");
    p.text = TextEncoder::random(WorldVocab::standard().tokens(), kEmbeddingDim, text_rng);
    p.video = Mlp::random({kEmbeddingDim, hidden, kEmbeddingDim}, true, video_rng);
    p.temperature = temperature;
    return p;
  }

  Vector encode_video(const Vector& mean_frame_embedding) const {
    return video.forward(mean_frame_embedding);
  }
  Vector encode_video(std::span<const Vector> frame_embeddings) const {
    return video.forward(mean_of(frame_embeddings));
  }
  Vector encode_text(const std::vector<std::string>& tokens) const { return text.encode(tokens); }
};

// ---------------------------------------------------------------------------
// Retrieval

struct RecallAtK {
  double video_to_text = 0.0;
  double text_to_video = 0.0;
};

// Rows are videos, columns texts; item i's match is (i, i). A competitor
// scoring equal to the diagonal counts as ranked ahead of it.
inline RecallAtK retrieval_recall(const Matrix& similarity, std::size_t K) {
  const std::size_t B = similarity.rows();
  if (similarity.cols() != B) throw DomainError("retrieval_recall: matrix must be square");
  if (K == 0) throw DomainError("retrieval_recall: K must be positive");
  if (K > B) throw DomainError("retrieval_recall: K exceeds batch size");
  std::size_t row_hits = 0, col_hits = 0;
  for (std::size_t i = 0; i < B; ++i) {
    const double diag = similarity(i, i);
    std::size_t ahead_row = 0, ahead_col = 0;
    for (std::size_t j = 0; j < B; ++j) {
      if (j == i) continue;
      if (similarity(i, j) >= diag) ++ahead_row;
      if (similarity(j, i) >= diag) ++ahead_col;
    }
    row_hits += ahead_row < K;
    col_hits += ahead_col < K;
  }
  return {static_cast<double>(row_hits) / static_cast<double>(B),
          static_cast<double>(col_hits) / static_cast<double>(B)};
}

inline Matrix similarity_matrix(const EncoderPair& enc, const std::vector<ClipRecord>& records) {
  const std::size_t B = records.size();
  std::vector<Vector> v, t;
  for (const ClipRecord& r : records) {
    v.push_back(enc.encode_video(r.segment_mean()));
    t.push_back(enc.encode_text(r.transcript.sentence));
  }
  Matrix m(B, B);
  for (std::size_t i = 0; i < B; ++i) {
    for (std::size_t j = 0; j < B; ++j) m(i, j) = dot(v[i], t[j]);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  double temperature = kDefaultTemperature;
  std::size_t batch_size = 32;
  std::size_t epochs = 20;
  std::size_t steps_per_epoch = 100;
  double learning_rate = 3e-3;
  std::size_t warmup_steps = 100;
  double weight_decay = 0.0;
  std::size_t hidden = kFrameEncoderHidden;
  bool swap = true;
  std::uint64_t seed = 0;

  std::size_t total_steps() const { return epochs * steps_per_epoch; }

  void validate() const {
    if (!(temperature > 0.0)) throw ConfigError("train: temperature must be > 0");
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("train: learning_rate must be > 0");
    if (steps_per_epoch < 1) throw ConfigError("train: steps_per_epoch must be >= 1");
    if (hidden < 1) throw ConfigError("train: hidden must be >= 1");
  }
};

struct EpochMetrics {
  std::size_t epoch = 0;
  std::size_t step = 0;
  double train_loss = 0.0;
  double eval_loss = 0.0;
  RecallAtK r1, r5, r10;
  std::size_t swaps = 0;
};

struct TrainResult {
  EncoderPair encoders;
  std::vector<EpochMetrics> metrics;
};

namespace detail {

struct TrainingExample {
  Vector video_input;
  std::vector<std::size_t> token_ids;
  double size = 0.0;
  std::size_t id = 0;
};

inline std::vector<TrainingExample> prepare_examples(const EncoderPair& enc,
                                                     const std::vector<ClipRecord>& records) {
  std::vector<TrainingExample> out;
  out.reserve(records.size());
  for (const ClipRecord& r : records) {
    out.push_back({r.segment_mean(), enc.text.token_ids(r.transcript.sentence),
                   std::clamp(r.segment_size(), 0.0, 1.0), r.id});
    if (out.back().token_ids.empty()) throw DataError("train: record has no known tokens");
  }
  return out;
}

struct StepGradients {
  double loss = 0.0;
  std::vector<double> video;
  std::vector<double> text;
};

// Loss and parameter gradients for one batch; `video_source[i]` is the batch
// position of the video labelled positive for text i.
inline StepGradients batch_gradients(const EncoderPair& enc,
                                     const std::vector<TrainingExample>& examples,
                                     const std::vector<std::size_t>& items,
                                     const std::vector<std::size_t>& video_source) {
  const std::size_t B = items.size();
  PairBatch batch;
  std::vector<Mlp::Cache> vcache(B);
  std::vector<TextEncoder::Cache> tcache(B);
  for (std::size_t i = 0; i < B; ++i) {
    const TrainingExample& ex = examples[items[i]];
    batch.video_embeddings.push_back(enc.video.forward(ex.video_input.span(), vcache[i]));
    batch.text_embeddings.push_back(enc.text.encode_ids(ex.token_ids, &tcache[i]));
  }
  batch.positive_video = video_source;
  const LossResult lr = symmetric_loss(batch, enc.temperature);
  StepGradients g;
  g.loss = lr.loss;
  g.video.assign(enc.video.parameter_count(), 0.0);
  g.text.assign(enc.text.parameters().size(), 0.0);
  for (std::size_t i = 0; i < B; ++i) {
    enc.video.backward(vcache[i], lr.grad_video[i].span(), g.video);
    enc.text.backward(tcache[i], lr.grad_text[i], g.text);
  }
  return g;
}

}  // namespace detail

// Minibatch Adam on symmetric InfoNCE with per-step swap draws. Deterministic
// in cfg.seed: substreams "init", "data", "swap".
inline TrainResult train(const std::vector<ClipRecord>& records,
                         const std::vector<ClipRecord>& validation, const TrainConfig& cfg,
                         const SwapConfig& swap_cfg) {
  cfg.validate();
  swap_cfg.validate();
  if (records.empty()) throw DataError("train: no training records");
  const Rng root(cfg.seed);
  TrainResult result;
  result.encoders = EncoderPair::initialize(root.substream("init"), cfg.hidden, cfg.temperature);
  EncoderPair& enc = result.encoders;
  Rng data_rng = root.substream("data");
  Rng swap_rng = root.substream("swap");

  const auto examples = detail::prepare_examples(enc, records);
  const auto& eval_records = validation.empty() ? records : validation;
  const auto eval_examples = detail::prepare_examples(enc, eval_records);
  std::vector<std::size_t> eval_items(std::min(cfg.batch_size, eval_examples.size()));
  std::iota(eval_items.begin(), eval_items.end(), 0);
  const std::size_t B = std::min(cfg.batch_size, examples.size());

  Adam::Options opt;
  opt.weight_decay = cfg.weight_decay;
  Adam video_opt(enc.video.parameter_count(), opt);
  Adam text_opt(enc.text.parameters().size(), opt);

  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::size_t> identity(B), items(B), source(B);
  std::iota(identity.begin(), identity.end(), 0);
  std::vector<double> sizes(B);
  const std::size_t total = cfg.total_steps();
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t swaps = 0;
    for (std::size_t s = 0; s < cfg.steps_per_epoch; ++s, ++step) {
      for (std::size_t i = 0; i < B; ++i) {
        std::swap(order[i], order[i + data_rng.uniform_index(order.size() - i)]);
        items[i] = order[i];
        sizes[i] = examples[items[i]].size;
      }
      source = identity;
      if (cfg.swap) {
        for (const SwapEvent& e : draw_swaps(sizes, swap_cfg, swap_rng).events) {
          source[e.item] = e.source;
          ++swaps;
        }
      }
      const auto g = detail::batch_gradients(enc, examples, items, source);
      if (!std::isfinite(g.loss))
        throw NumericalError("train: non-finite loss at step " + std::to_string(step));
      loss_sum += g.loss;
      const double lr = warmup_cosine_lr(cfg.learning_rate, step, cfg.warmup_steps, total);
      video_opt.step(enc.video.parameters(), g.video, lr);
      text_opt.step(enc.text.parameters(), g.text, lr);
    }
    EpochMetrics m;
    m.epoch = epoch + 1;
    m.step = step;
    m.train_loss = loss_sum / static_cast<double>(cfg.steps_per_epoch);
    // eval_items is 0..n-1, so it doubles as the unswapped source map
    m.eval_loss = detail::batch_gradients(enc, eval_examples, eval_items, eval_items).loss;
    m.swaps = swaps;
    if (!validation.empty()) {
      const Matrix sim = similarity_matrix(enc, validation);
      const std::size_t n = validation.size();
      m.r1 = retrieval_recall(sim, std::min<std::size_t>(1, n));
      m.r5 = retrieval_recall(sim, std::min<std::size_t>(5, n));
      m.r10 = retrieval_recall(sim, std::min<std::size_t>(10, n));
    }
    result.metrics.push_back(m);
  }
  return result;
}

}  // namespace rlvlm
