#pragma once

// Dataset construction stages: keyword sentence extraction, clip windows,
// partition/selection of the best-matching segment, and two-tier
// correlation filtering.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rlvlm/entitysize.hpp"
#include "rlvlm/numerics.hpp"
#include "rlvlm/segmentation.hpp"
#include "rlvlm/world.hpp"

namespace rlvlm {

inline constexpr std::size_t kMinClipTokens = 10;
inline constexpr std::size_t kMaxClipTokens = 35;

struct TimedToken {
  std::string text;
  double start = 0.0;
  double end = 0.0;
};

struct Sentence {
  std::vector<TimedToken> tokens;
};

struct Transcript {
  std::string source_id;
  std::vector<Sentence> sentences;
};

struct TranscriptClip {
  std::vector<std::string> sentence;
  std::string keyword;                // canonical name of the first mention
  std::vector<std::string> keywords;  // all distinct canonical mentions, in order
  double start_time = 0.0;
  double end_time = 0.0;
  std::string source_id;

  double center() const { return 0.5 * (start_time + end_time); }
};

enum class Label { unlabeled, selected_local, selected_global, rejected };

inline const char* label_name(Label l) {
  switch (l) {
    case Label::selected_local: return "selected_local";
    case Label::selected_global: return "selected_global";
    case Label::rejected: return "rejected";
    default: return "unlabeled";
  }
}

inline Label parse_label(const std::string& s) {
  if (s == "selected_local") return Label::selected_local;
  if (s == "selected_global") return Label::selected_global;
  if (s == "rejected") return Label::rejected;
  if (s == "unlabeled") return Label::unlabeled;
  throw DataError("unknown label '" + s + "'");
}

inline bool is_selected(Label l) {
  return l == Label::selected_local || l == Label::selected_global;
}

struct ClipRecord {
  std::size_t id = 0;
  TranscriptClip transcript;
  double t_begin = 0.0;
  double t_end = 0.0;
  std::vector<Vector> frame_embeddings;
  std::size_t segment_begin = 0;  // selected segment, half-open frame range
  std::size_t segment_end = 0;
  Vector text_embedding;  // reference (frozen) text embedding
  double global_score = 0.0;
  std::vector<double> frame_sizes;  // normalized per-frame key-entity sizes
  double local_score = 0.0;
  Label label = Label::unlabeled;

  // Mean frame embedding over the selected segment: the video encoder input.
  Vector segment_mean() const {
    const std::size_t b = segment_begin, e = std::max(segment_end, segment_begin + 1);
    return mean_of(std::span<const Vector>(frame_embeddings).subspan(b, e - b));
  }

  // Entity size used by the swap rule: mean over the selected segment.
  double segment_size() const {
    if (frame_sizes.empty() || segment_end <= segment_begin) return 0.0;
    double s = 0.0;
    for (std::size_t i = segment_begin; i < segment_end; ++i) s += frame_sizes[i];
    return s / static_cast<double>(segment_end - segment_begin);
  }
};

struct PipelineConfig {
  double clip_duration = 16.0;  // D, seconds
  std::size_t partitions = 3;   // p
  double k_percent = 50.0;
  std::size_t candidate_count = 2048;  // M (desk scale)
  std::size_t test_count = 256;        // M'
  double tau_patch = kDefaultTauPatch;
  std::size_t frames_per_clip = 16;
  std::vector<std::string> keywords = WorldVocab::standard().entity_names();

  void validate() const {
    if (!(clip_duration > 0.0)) throw ConfigError("pipeline: D must be > 0");
    if (partitions < 1) throw ConfigError("pipeline: p must be >= 1");
    if (!(k_percent > 0.0 && k_percent <= 100.0)) throw ConfigError("pipeline: k_percent must be in (0, 100]");
    if (frames_per_clip < partitions) throw ConfigError("pipeline: frames_per_clip must be >= p");
    if (keywords.empty()) throw ConfigError("pipeline: keyword list is empty");
  }
};

// ---------------------------------------------------------------------------

inline std::size_t count_keywords(const Sentence& s, const KeywordRegistry& registry) {
  std::size_t n = 0;
  for (const TimedToken& t : s.tokens) n += registry.match(t.text) ? 1 : 0;
  return n;
}

// Greedy left-to-right scan. A window opens at the next unused sentence that
// mentions a keyword and extends over following sentences while it stays
// within 35 tokens; it ends after the shortest prefix reaching the maximal
// keyword count among prefixes of at least 10 tokens. Windows never overlap.
inline std::vector<TranscriptClip> extract_keyword_sentences(const Transcript& transcript,
                                                             const KeywordRegistry& registry) {
  std::vector<TranscriptClip> clips;
  const auto& ss = transcript.sentences;
  std::size_t i = 0;
  while (i < ss.size()) {
    if (ss[i].tokens.empty() || count_keywords(ss[i], registry) == 0) {
      ++i;
      continue;
    }
    std::size_t tokens = 0, keywords = 0, best_keywords = 0, best_end = 0;
    for (std::size_t e = i; e < ss.size(); ++e) {
      tokens += ss[e].tokens.size();
      if (tokens > kMaxClipTokens) break;
      keywords += count_keywords(ss[e], registry);
      if (tokens >= kMinClipTokens && keywords > best_keywords) {
        best_keywords = keywords;
        best_end = e + 1;
      }
    }
    if (best_end == 0) {
      ++i;
      continue;
    }
    TranscriptClip clip;
    clip.source_id = transcript.source_id;
    clip.start_time = ss[i].tokens.front().start;
    for (std::size_t e = i; e < best_end; ++e) {
      for (const TimedToken& t : ss[e].tokens) {
        clip.sentence.push_back(t.text);
        clip.end_time = std::max(clip.end_time, t.end);
        if (auto k = registry.match(t.text)) {
          if (clip.keyword.empty()) clip.keyword = *k;
          if (std::find(clip.keywords.begin(), clip.keywords.end(), *k) == clip.keywords.end())
            clip.keywords.push_back(*k);
        }
      }
    }
    clips.push_back(std::move(clip));
    i = best_end;
  }
  return clips;
}

struct TimeWindow {
  double begin = 0.0;
  double end = 0.0;
  bool operator==(const TimeWindow&) const = default;
};

// D-second window centered on the clip, shifted (not shrunk) to fit inside
// [0, video_duration].
inline TimeWindow clip_window(const TranscriptClip& clip, double D, double video_duration) {
  if (!(D > 0.0)) throw DomainError("clip_window: D must be > 0");
  if (video_duration < D)
    throw DataError("clip_window: video of " + std::to_string(video_duration) +
                    " s is shorter than D; record unusable");
  double b = clip.center() - 0.5 * D;
  if (b < 0.0) b = 0.0;
  if (b + D > video_duration) b = video_duration - D;
  return {b, b + D};
}

// Equidistant frame timestamps (segment midpoints) inside a window.
inline std::vector<double> sample_frame_times(const TimeWindow& w, std::size_t frames) {
  std::vector<double> t(frames);
  const double step = (w.end - w.begin) / static_cast<double>(frames);
  for (std::size_t i = 0; i < frames; ++i) t[i] = w.begin + (static_cast<double>(i) + 0.5) * step;
  return t;
}

inline ClipRecord partition_and_select(ClipRecord record, std::size_t p) {
  if (record.frame_embeddings.empty()) throw DomainError("partition_and_select: no frames");
  const SegmentationResult seg = k_segmentation(record.frame_embeddings, p);
  const std::size_t s = select_best_segment(seg, record.frame_embeddings, record.text_embedding);
  record.segment_begin = seg.boundaries[s];
  record.segment_end = seg.boundaries[s + 1];
  return record;
}

inline std::size_t selection_target(double k_percent, std::size_t n) {
  return static_cast<std::size_t>(std::floor(k_percent / 100.0 * static_cast<double>(n) + 1e-9));
}

// Two-tier top-k% selection. Records with a positive local score are taken
// first by descending local score; if they do not fill the quota the rest is
// filled by descending global score. Ties go to the smaller id. Output keeps
// input order.
inline std::vector<ClipRecord> correlation_filter(std::vector<ClipRecord> records,
                                                  double k_percent) {
  const std::size_t target = selection_target(k_percent, records.size());
  std::vector<std::size_t> local, rest;
  for (std::size_t i = 0; i < records.size(); ++i) {
    (records[i].local_score > 0.0 ? local : rest).push_back(i);
  }
  auto by = [&](auto key) {
    return [&records, key](std::size_t a, std::size_t b) {
      const double ka = key(records[a]), kb = key(records[b]);
      if (ka != kb) return ka > kb;
      return records[a].id < records[b].id;
    };
  };
  std::sort(local.begin(), local.end(), by([](const ClipRecord& r) { return r.local_score; }));
  for (ClipRecord& r : records) r.label = Label::rejected;
  const std::size_t from_local = std::min(target, local.size());
  for (std::size_t i = 0; i < from_local; ++i) records[local[i]].label = Label::selected_local;
  if (from_local < target) {
    std::sort(rest.begin(), rest.end(), by([](const ClipRecord& r) { return r.global_score; }));
    for (std::size_t i = 0; i < target - from_local && i < rest.size(); ++i) {
      records[rest[i]].label = Label::selected_global;
    }
  }
  return records;
}

}  // namespace rlvlm
