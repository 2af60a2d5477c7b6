#pragma once

// Synthetic stand-in for a video/transcript database. Each video is a
// sequence of scenes (entity, biome, time of day, tool, camera path); the
// transcript narrates the scenes, and a configurable fraction of narrated
// sentences names the wrong entity. The generator runs the full
// construction pipeline and returns candidate records plus ground truth.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "rlvlm/entitysize.hpp"
#include "rlvlm/numerics.hpp"
#include "rlvlm/pipeline.hpp"
#include "rlvlm/world.hpp"

namespace rlvlm {

struct CorpusConfig {
  PipelineConfig pipeline;
  double misaligned_fraction = 0.25;
  double frame_noise = 0.05;     // std of raw frame feature noise
  double heatmap_noise = 0.015;  // std of per-patch score noise
  std::size_t grid_height = 10;  // patch grid of a 160x256 frame at 16 px
  std::size_t grid_width = 16;
  double visible_prob = 0.9;
  double keyword_sentence_prob = 0.45;
  double min_distance = 0.8;
  double max_distance = 6.0;
  double heatmap_background = 0.22;
  double heatmap_entity = 0.34;

  void validate() const {
    pipeline.validate();
    if (misaligned_fraction < 0.0 || misaligned_fraction > 1.0)
      throw ConfigError("corpus: misaligned_fraction must be in [0, 1]");
    if (frame_noise < 0.0 || heatmap_noise < 0.0) throw ConfigError("corpus: noise must be >= 0");
    if (grid_height == 0 || grid_width == 0) throw ConfigError("corpus: empty patch grid");
    if (visible_prob < 0.0 || visible_prob > 1.0) throw ConfigError("corpus: visible_prob must be in [0, 1]");
    if (!(min_distance > 0.0 && max_distance >= min_distance))
      throw ConfigError("corpus: need 0 < min_distance <= max_distance");
  }
};

struct Scene {
  double begin = 0.0, end = 0.0;
  std::size_t entity = 0, biome = 0, time_of_day = 0, tool = 0;
  double start_distance = 1.0;
  double velocity = 0.0;  // distance change per second
  double scale = 4.0;     // apparent side in patches at distance 1
  double aspect = 1.0;
};

struct SyntheticVideo {
  std::string id;
  double duration = 0.0;
  std::vector<Scene> scenes;
  Transcript transcript;

  const Scene& scene_at(double t) const {
    for (const Scene& s : scenes) {
      if (t < s.end) return s;
    }
    return scenes.back();
  }
};

struct FrameTruth {
  FrameContent content;
  std::optional<BoundingBox> box;
};

struct RecordOracle {
  std::size_t id = 0;
  bool aligned = false;
  std::string true_entity;       // scene entity at the clip center
  std::vector<double> true_sizes;  // ground-truth normalized size of the keyword entity
};

struct Corpus {
  std::vector<ClipRecord> train;  // M candidates, unfiltered
  std::vector<ClipRecord> test;   // M' held-out pairs
  std::vector<RecordOracle> oracle;  // indexed by record id
};

inline SyntheticVideo generate_video(const CorpusConfig& cfg, std::size_t index, Rng rng) {
  const WorldVocab& w = WorldVocab::standard();
  SyntheticVideo v;
  v.id = "vid" + std::to_string(index);
  v.duration = rng.uniform(45.0, 120.0);
  for (double t = 0.0; t < v.duration;) {
    Scene s;
    s.begin = t;
    s.end = std::min(v.duration, t + rng.uniform(12.0, 40.0));
    s.entity = rng.uniform_index(w.entity_count());
    s.biome = rng.uniform_index(w.biomes().size());
    s.time_of_day = rng.uniform_index(w.times().size());
    s.tool = rng.uniform_index(w.tools().size());
    s.start_distance = rng.uniform(cfg.min_distance + 0.2, cfg.max_distance);
    s.velocity = rng.uniform(-0.4, 0.4);
    s.scale = rng.uniform(3.0, 6.0);
    s.aspect = rng.uniform(0.8, 1.6);
    v.scenes.push_back(s);
    t = s.end;
  }
  v.scenes.back().end = v.duration;

  v.transcript.source_id = v.id;
  const auto& templates = keyword_sentence_templates();
  const auto& fillers = filler_sentences();
  double t = rng.uniform(0.2, 2.0);
  while (true) {
    std::vector<std::string> words;
    if (rng.bernoulli(cfg.keyword_sentence_prob)) {
      const std::vector<std::string> tmpl = split_words(templates[rng.uniform_index(templates.size())]);
      std::size_t n = 0;
      for (const auto& x : tmpl) n += (x == "{W}") ? 2 : 1;
      const Scene& sc = v.scene_at(t + 0.2 * static_cast<double>(n));
      std::size_t entity = sc.entity;
      if (rng.bernoulli(cfg.misaligned_fraction)) {
        entity = (sc.entity + 1 + rng.uniform_index(w.entity_count() - 1)) % w.entity_count();
      }
      const EntityInfo& e = w.entities()[entity];
      const std::string& surface = rng.bernoulli(0.2) ? e.surface_forms.back() : e.name;
      for (const auto& x : tmpl) {
        if (x == "{E}") words.push_back(surface);
        else if (x == "{B}") words.push_back(w.biomes()[sc.biome]);
        else if (x == "{T}") words.push_back(w.times()[sc.time_of_day]);
        else if (x == "{W}") {
          words.push_back(w.tools()[sc.tool][0]);
          words.push_back(w.tools()[sc.tool][1]);
        } else {
          words.push_back(x);
        }
      }
    } else {
      words = split_words(fillers[rng.uniform_index(fillers.size())]);
    }
    Sentence s;
    double tt = t;
    for (const auto& word : words) {
      const double dur = rng.uniform(0.3, 0.5);
      s.tokens.push_back({word, tt, tt + dur});
      tt += dur;
    }
    if (tt > v.duration - 0.5) break;
    v.transcript.sentences.push_back(std::move(s));
    t = tt + rng.uniform(0.2, 1.0);
  }
  return v;
}

// Camera path and visibility for one frame; box placement is random inside
// the grid.
inline FrameTruth render_frame(const CorpusConfig& cfg, const SyntheticVideo& v, double t, Rng& rng) {
  const Scene& s = v.scene_at(t);
  FrameTruth f;
  f.content.biome = s.biome;
  f.content.time_of_day = s.time_of_day;
  f.content.tool = s.tool;
  const bool visible = rng.bernoulli(cfg.visible_prob);
  const double d = std::clamp(s.start_distance + s.velocity * (t - s.begin), cfg.min_distance,
                              cfg.max_distance);
  const auto side = [](double x, std::size_t cap) {
    return std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(x)), 1, cap);
  };
  const std::size_t h = side(s.scale / d, cfg.grid_height);
  const std::size_t wd = side(s.scale * s.aspect / d, cfg.grid_width);
  const std::size_t r0 = rng.uniform_index(cfg.grid_height - h + 1);
  const std::size_t c0 = rng.uniform_index(cfg.grid_width - wd + 1);
  if (visible) {
    f.content.entity = s.entity;
    f.box = BoundingBox{r0, r0 + h - 1, c0, c0 + wd - 1, cfg.grid_height, cfg.grid_width};
    f.content.size = f.box->normalized_area();
  }
  return f;
}

// Per-keyword patch similarity grid for a rendered frame.
inline PatchHeatmap render_heatmap(const CorpusConfig& cfg, const FrameTruth& f, Rng& rng) {
  const WorldVocab& w = WorldVocab::standard();
  PatchHeatmap hm(cfg.grid_height, cfg.grid_width, cfg.pipeline.keywords);
  std::optional<std::size_t> key;
  if (f.content.entity) {
    const std::string& name = w.entities()[*f.content.entity].name;
    auto it = std::find(hm.keywords.begin(), hm.keywords.end(), name);
    if (it != hm.keywords.end()) key = static_cast<std::size_t>(it - hm.keywords.begin());
  }
  for (std::size_t r = 0; r < hm.height; ++r) {
    for (std::size_t c = 0; c < hm.width; ++c) {
      const bool inside = f.box && r >= f.box->row_min && r <= f.box->row_max &&
                          c >= f.box->col_min && c <= f.box->col_max;
      for (std::size_t k = 0; k < hm.keyword_count(); ++k) {
        const double mu = (inside && key && *key == k) ? cfg.heatmap_entity : cfg.heatmap_background;
        const double noise = cfg.heatmap_noise > 0.0 ? rng.normal(0.0, cfg.heatmap_noise) : 0.0;
        hm.at(r, c, k) = std::clamp(mu + noise, -1.0, 1.0);
      }
    }
  }
  return hm;
}

struct BuiltRecord {
  ClipRecord record;
  RecordOracle oracle;
  std::vector<PatchHeatmap> heatmaps;
};

// Runs window -> frames -> embeddings/heatmaps -> partition/select -> scores
// for one extracted clip. Returns nothing when the clip cannot be windowed.
inline std::optional<BuiltRecord> build_record(const CorpusConfig& cfg, const SyntheticVideo& v,
                                               const TranscriptClip& clip, std::size_t id,
                                               Rng rng, bool keep_heatmaps = false) {
  const WorldVocab& w = WorldVocab::standard();
  const PipelineConfig& pc = cfg.pipeline;
  TimeWindow win;
  try {
    win = clip_window(clip, pc.clip_duration, v.duration);
  } catch (const DataError&) {
    return std::nullopt;
  }
  const auto key_it = std::find(pc.keywords.begin(), pc.keywords.end(), clip.keyword);
  if (key_it == pc.keywords.end()) return std::nullopt;
  const std::size_t key_index = static_cast<std::size_t>(key_it - pc.keywords.begin());

  BuiltRecord out;
  ClipRecord& rec = out.record;
  rec.id = id;
  rec.transcript = clip;
  rec.t_begin = win.begin;
  rec.t_end = win.end;
  out.oracle.id = id;
  out.oracle.true_entity = w.entities()[v.scene_at(clip.center()).entity].name;
  out.oracle.aligned = out.oracle.true_entity == clip.keyword;

  Rng frame_rng = rng.substream("frames");
  Rng noise_rng = rng.substream("noise");
  Rng heat_rng = rng.substream("heatmap");
  for (double t : sample_frame_times(win, pc.frames_per_clip)) {
    const FrameTruth f = render_frame(cfg, v, t, frame_rng);
    rec.frame_embeddings.push_back(FrozenFrameEncoder::standard().embed(
        w.frame_feature(f.content, cfg.frame_noise, &noise_rng)));
    const PatchHeatmap hm = render_heatmap(cfg, f, heat_rng);
    rec.frame_sizes.push_back(estimate_entity_size(hm, key_index, pc.tau_patch));
    const bool keyword_visible = f.content.entity && w.entities()[*f.content.entity].name == clip.keyword;
    out.oracle.true_sizes.push_back(keyword_visible ? f.content.size : 0.0);
    if (keep_heatmaps) out.heatmaps.push_back(hm);
  }
  rec.local_score = clip_local_correlation(rec.frame_sizes);
  rec.text_embedding = reference_text_embedding(clip.sentence, clip.keyword);
  rec = partition_and_select(std::move(rec), pc.partitions);
  rec.global_score = cosine_similarity(rec.segment_mean(), rec.text_embedding);
  return out;
}

// First M records in corpus order become candidates, the next M' the test
// split. Everything is a function of (cfg, seed).
inline Corpus generate_synthetic_corpus(const CorpusConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const WorldVocab& w = WorldVocab::standard();
  const Rng root(seed);
  const Rng video_root = root.substream("video");
  const Rng record_root = root.substream("record");
  const std::size_t wanted = cfg.pipeline.candidate_count + cfg.pipeline.test_count;
  Corpus c;
  std::size_t id = 0;
  for (std::size_t vi = 0; id < wanted; ++vi) {
    const SyntheticVideo v = generate_video(cfg, vi, video_root.substream(vi));
    // test pairs come from held-out videos, one per video, so near-duplicate
    // clips of the same scene never compete at retrieval time
    const bool test_video = c.train.size() >= cfg.pipeline.candidate_count;
    for (const TranscriptClip& clip : extract_keyword_sentences(v.transcript, w.registry())) {
      if (id >= wanted) break;
      auto built = build_record(cfg, v, clip, id, record_root.substream(id));
      if (!built) continue;
      c.oracle.push_back(std::move(built->oracle));
      (test_video ? c.test : c.train).push_back(std::move(built->record));
      ++id;
      if (test_video || c.train.size() == cfg.pipeline.candidate_count) break;
    }
  }
  return c;
}

}  // namespace rlvlm
