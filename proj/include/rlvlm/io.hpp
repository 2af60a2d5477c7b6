#pragma once

// JSON and JSON-lines (de)serialization for records, checkpoints and run
// manifests, plus delimiter-separated tables.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rlvlm/contrastive.hpp"
#include "rlvlm/corpus.hpp"
#include "rlvlm/entitysize.hpp"
#include "rlvlm/huntgrid.hpp"
#include "rlvlm/pipeline.hpp"
#include "rlvlm/ppo.hpp"
#include "rlvlm/rewardgen.hpp"

#ifndef RLVLM_VERSION
#define RLVLM_VERSION "0.1.0"
#endif

namespace rlvlm {

using json = nlohmann::json;

inline constexpr int kCheckpointVersion = 1;

// ---------------------------------------------------------------------------
// Files

inline std::string read_text_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot open '" + p.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::filesystem::path& p, const std::string& text) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + p.string() + "'");
  out << text;
  if (!out) throw DataError("write failed for '" + p.string() + "'");
}

inline json read_json_file(const std::filesystem::path& p) {
  try {
    return json::parse(read_text_file(p));
  } catch (const json::exception& e) {
    throw DataError("malformed JSON in '" + p.string() + "': " + e.what());
  }
}

inline void write_json_file(const std::filesystem::path& p, const json& j) {
  write_text_file(p, j.dump(2) + "\n");
}

inline std::vector<json> read_jsonl(const std::filesystem::path& p) {
  std::istringstream in(read_text_file(p));
  std::vector<json> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw DataError(p.string() + ":" + std::to_string(n) + ": malformed record: " + e.what());
    }
  }
  return out;
}

inline void write_jsonl(const std::filesystem::path& p, const std::vector<json>& rows) {
  std::string text;
  for (const json& r : rows) {
    text += r.dump();
    text += '\n';
  }
  write_text_file(p, text);
}

// Tab-separated table with a header row. Doubles use %.10g so that re-runs
// are byte-identical and the files stay readable.
class Table {
 public:
  explicit Table(std::vector<std::string> header) : header_(std::move(header)) {}

  Table& row(std::vector<std::string> cells) {
    if (cells.size() != header_.size()) throw DomainError("Table: row width does not match header");
    rows_.push_back(std::move(cells));
    return *this;
  }

  static std::string num(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", x);
    return buf;
  }
  static std::string num(std::size_t x) { return std::to_string(x); }

  std::string str() const {
    std::string s;
    auto line = [&s](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) s += '\t';
        s += cells[i];
      }
      s += '\n';
    };
    line(header_);
    for (const auto& r : rows_) line(r);
    return s;
  }

  void write(const std::filesystem::path& p) const { write_text_file(p, str()); }

  const std::vector<std::string>& header() const { return header_; }
  const std::vector<std::vector<std::string>>& rows() const { return rows_; }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

// Parses a table written by Table::write.
inline Table read_table(const std::filesystem::path& p) {
  std::istringstream in(read_text_file(p));
  std::string line;
  auto split = [](const std::string& l) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(l);
    while (std::getline(ls, cell, '\t')) cells.push_back(cell);
    return cells;
  };
  if (!std::getline(in, line)) throw DataError("empty table '" + p.string() + "'");
  Table t(split(line));
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() != t.header().size())
      throw DataError(p.string() + ":" + std::to_string(n) + ": expected " +
                      std::to_string(t.header().size()) + " columns");
    t.row(std::move(cells));
  }
  return t;
}

// ---------------------------------------------------------------------------
// Hashing

inline std::string hex64(std::uint64_t x) {
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << x;
  return ss.str();
}

// nlohmann objects keep keys sorted, so dump() is canonical.
inline std::string config_hash(const json& config) { return hex64(detail::fnv1a(config.dump())); }

// ---------------------------------------------------------------------------
// Vectors

inline json to_json(const Vector& v) { return json(v.values()); }

inline Vector vector_from_json(const json& j) {
  if (!j.is_array()) throw DataError("expected a numeric array");
  return Vector(j.get<std::vector<double>>());
}

// ---------------------------------------------------------------------------
// Records

inline json to_json(const TranscriptClip& c) {
  return {{"sentence", c.sentence}, {"keyword", c.keyword},      {"keywords", c.keywords},
          {"start", c.start_time},  {"end", c.end_time},         {"source", c.source_id}};
}

inline TranscriptClip clip_from_json(const json& j) {
  TranscriptClip c;
  c.sentence = j.at("sentence").get<std::vector<std::string>>();
  c.keyword = j.at("keyword").get<std::string>();
  c.keywords = j.at("keywords").get<std::vector<std::string>>();
  c.start_time = j.at("start").get<double>();
  c.end_time = j.at("end").get<double>();
  c.source_id = j.at("source").get<std::string>();
  return c;
}

inline json to_json(const ClipRecord& r) {
  json frames = json::array();
  for (const Vector& f : r.frame_embeddings) frames.push_back(to_json(f));
  return {{"id", r.id},
          {"transcript", to_json(r.transcript)},
          {"t_begin", r.t_begin},
          {"t_end", r.t_end},
          {"frames", frames},
          {"segment", {r.segment_begin, r.segment_end}},
          {"text_embedding", to_json(r.text_embedding)},
          {"global_score", r.global_score},
          {"frame_sizes", r.frame_sizes},
          {"local_score", r.local_score},
          {"label", label_name(r.label)}};
}

inline ClipRecord record_from_json(const json& j) {
  try {
    ClipRecord r;
    r.id = j.at("id").get<std::size_t>();
    r.transcript = clip_from_json(j.at("transcript"));
    r.t_begin = j.at("t_begin").get<double>();
    r.t_end = j.at("t_end").get<double>();
    for (const json& f : j.at("frames")) r.frame_embeddings.push_back(vector_from_json(f));
    r.segment_begin = j.at("segment").at(0).get<std::size_t>();
    r.segment_end = j.at("segment").at(1).get<std::size_t>();
    r.text_embedding = vector_from_json(j.at("text_embedding"));
    r.global_score = j.at("global_score").get<double>();
    r.frame_sizes = j.at("frame_sizes").get<std::vector<double>>();
    r.local_score = j.at("local_score").get<double>();
    r.label = parse_label(j.at("label").get<std::string>());
    if (r.segment_end > r.frame_embeddings.size() || r.segment_begin >= r.segment_end)
      throw DataError("record " + std::to_string(r.id) + ": segment outside the frame range");
    if (r.frame_sizes.size() != r.frame_embeddings.size())
      throw DataError("record " + std::to_string(r.id) + ": frame_sizes and frames differ in length");
    return r;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed clip record: ") + e.what());
  }
}

inline std::vector<ClipRecord> read_records(const std::filesystem::path& p) {
  std::vector<ClipRecord> out;
  for (const json& j : read_jsonl(p)) out.push_back(record_from_json(j));
  return out;
}

inline void write_records(const std::filesystem::path& p, const std::vector<ClipRecord>& records) {
  std::vector<json> rows;
  rows.reserve(records.size());
  for (const ClipRecord& r : records) rows.push_back(to_json(r));
  write_jsonl(p, rows);
}

inline json to_json(const RecordOracle& o) {
  return {{"id", o.id}, {"aligned", o.aligned}, {"true_entity", o.true_entity}, {"true_sizes", o.true_sizes}};
}

inline RecordOracle oracle_from_json(const json& j) {
  try {
    RecordOracle o;
    o.id = j.at("id").get<std::size_t>();
    o.aligned = j.at("aligned").get<bool>();
    o.true_entity = j.at("true_entity").get<std::string>();
    o.true_sizes = j.at("true_sizes").get<std::vector<double>>();
    return o;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed oracle record: ") + e.what());
  }
}

inline json to_json(const PatchHeatmap& h) {
  return {{"height", h.height}, {"width", h.width}, {"keywords", h.keywords}, {"scores", h.scores}};
}

inline PatchHeatmap heatmap_from_json(const json& j) {
  try {
    PatchHeatmap h;
    h.height = j.at("height").get<std::size_t>();
    h.width = j.at("width").get<std::size_t>();
    h.keywords = j.at("keywords").get<std::vector<std::string>>();
    h.scores = j.at("scores").get<std::vector<double>>();
    h.validate();
    return h;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed heatmap: ") + e.what());
  } catch (const DomainError& e) {
    throw DataError(e.what());
  }
}

// ---------------------------------------------------------------------------
// Models

inline json to_json(const Mlp& m) {
  return {{"widths", m.widths()}, {"normalize", m.normalizes_output()}, {"params", m.parameters()}};
}

inline Mlp mlp_from_json(const json& j) {
  Mlp m(j.at("widths").get<std::vector<std::size_t>>(), j.at("normalize").get<bool>());
  const auto p = j.at("params").get<std::vector<double>>();
  if (p.size() != m.parameter_count()) throw DataError("network parameter count does not match its widths");
  m.parameters() = p;
  return m;
}

inline json to_json(const EncoderPair& e) {
  return {{"temperature", e.temperature},
          {"text", {{"vocabulary", e.text.vocabulary()}, {"dim", e.text.dim()}, {"table", e.text.parameters()}}},
          {"video", to_json(e.video)}};
}

inline EncoderPair encoders_from_json(const json& j) {
  EncoderPair e;
  e.temperature = j.at("temperature").get<double>();
  const json& t = j.at("text");
  e.text = TextEncoder(t.at("vocabulary").get<std::vector<std::string>>(), t.at("dim").get<std::size_t>());
  const auto table = t.at("table").get<std::vector<double>>();
  if (table.size() != e.text.parameters().size()) throw DataError("text table size does not match vocabulary");
  e.text.parameters() = table;
  e.video = mlp_from_json(j.at("video"));
  return e;
}

struct Checkpoint {
  EncoderPair encoders;
  json config;
  std::string config_hash;
  Rng::State rng_state;
};

inline json to_json(const Checkpoint& c) {
  return {{"version", kCheckpointVersion},
          {"config", c.config},
          {"config_hash", c.config_hash},
          {"rng", {{"key", c.rng_state.key}, {"counter", c.rng_state.counter}}},
          {"encoders", to_json(c.encoders)}};
}

inline Checkpoint read_checkpoint(const std::filesystem::path& p) {
  if (!std::filesystem::exists(p)) throw ConfigError("checkpoint '" + p.string() + "' does not exist");
  const json j = read_json_file(p);
  try {
    if (j.at("version").get<int>() != kCheckpointVersion)
      throw DataError("unsupported checkpoint version in '" + p.string() + "'");
    Checkpoint c;
    c.config = j.at("config");
    c.config_hash = j.at("config_hash").get<std::string>();
    c.rng_state = {j.at("rng").at("key").get<std::uint64_t>(), j.at("rng").at("counter").get<std::uint64_t>()};
    c.encoders = encoders_from_json(j.at("encoders"));
    return c;
  } catch (const json::exception& e) {
    throw DataError("malformed checkpoint '" + p.string() + "': " + e.what());
  }
}

inline json to_json(const PromptSet& p) {
  json rows = json::array();
  for (std::size_t i = 0; i < p.size(); ++i) {
    rows.push_back({{"name", p.names[i]}, {"template", p.templates[i]}, {"embedding", to_json(p.embeddings[i])}});
  }
  return {{"task_index", p.task_index}, {"prompts", rows}};
}

inline PromptSet prompts_from_json(const json& j) {
  try {
    PromptSet p;
    p.task_index = j.at("task_index").get<std::size_t>();
    for (const json& r : j.at("prompts")) {
      p.names.push_back(r.at("name").get<std::string>());
      p.templates.push_back(r.at("template").get<std::string>());
      p.embeddings.push_back(vector_from_json(r.at("embedding")));
    }
    p.validate();
    return p;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed prompt set: ") + e.what());
  } catch (const DomainError& e) {
    throw DataError(e.what());
  }
}

inline json to_json(const ActorCritic& a) { return {{"actor", to_json(a.actor())}, {"critic", to_json(a.critic())}}; }

inline ActorCritic policy_from_json(const json& j) {
  try {
    return ActorCritic(mlp_from_json(j.at("actor")), mlp_from_json(j.at("critic")));
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed policy: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Configs

inline json to_json(const PipelineConfig& c) {
  return {{"clip_duration", c.clip_duration}, {"partitions", c.partitions},
          {"k_percent", c.k_percent},         {"candidate_count", c.candidate_count},
          {"test_count", c.test_count},       {"tau_patch", c.tau_patch},
          {"frames_per_clip", c.frames_per_clip}, {"keywords", c.keywords}};
}

inline json to_json(const CorpusConfig& c) {
  return {{"pipeline", to_json(c.pipeline)},
          {"misaligned_fraction", c.misaligned_fraction},
          {"frame_noise", c.frame_noise},
          {"heatmap_noise", c.heatmap_noise},
          {"grid", {c.grid_height, c.grid_width}},
          {"visible_prob", c.visible_prob},
          {"keyword_sentence_prob", c.keyword_sentence_prob},
          {"distance", {c.min_distance, c.max_distance}},
          {"heatmap_levels", {c.heatmap_background, c.heatmap_entity}}};
}

inline json to_json(const TrainConfig& c) {
  return {{"temperature", c.temperature}, {"batch_size", c.batch_size},
          {"epochs", c.epochs},           {"steps_per_epoch", c.steps_per_epoch},
          {"learning_rate", c.learning_rate}, {"warmup_steps", c.warmup_steps},
          {"weight_decay", c.weight_decay},   {"hidden", c.hidden},
          {"swap", c.swap},               {"seed", c.seed}};
}

inline json to_json(const SwapConfig& c) { return {{"p_max", c.p_max}, {"tau", c.tau}}; }

inline json to_json(const HuntConfig& c) {
  return {{"grid_size", c.grid_size},       {"spawn_radius", c.spawn_radius},
          {"spawn_min_radius", c.min_spawn_radius()}, {"max_steps", c.max_steps},
          {"target_health", c.target_health}, {"flee", c.flee},
          {"flee_prob", c.flee_prob},       {"attack_range", c.attack_range},
          {"view", {c.view_height, c.view_width}}, {"apparent_max", c.apparent_max},
          {"frame_stack", c.frame_stack},   {"success_reward", c.success_reward},
          {"target_entity", c.target_entity}, {"biome", c.biome},
          {"time_of_day", c.time_of_day},   {"tool", c.tool}};
}

inline json to_json(const PpoConfig& c) {
  return {{"gamma", c.gamma},           {"gae_lambda", c.gae_lambda},
          {"clip_epsilon", c.clip_epsilon}, {"entropy_coef", c.entropy_coef},
          {"value_coef", c.value_coef}, {"learning_rate", c.learning_rate},
          {"epochs", c.epochs},         {"minibatches", c.minibatches},
          {"steps", c.steps},           {"envs", c.envs},
          {"max_grad_norm", c.max_grad_norm}, {"hidden", c.hidden}};
}

inline json to_json(const RewardConfig& c) {
  return {{"temperature", c.temperature}, {"mix", c.mix}, {"snippet_length", c.snippet_length}};
}

// ---------------------------------------------------------------------------
// Manifest

struct RunManifest {
  std::string command;
  json config;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;  // file names inside the output directory
  std::string tool_version = RLVLM_VERSION;
  std::string wall_clock;
};

inline constexpr const char* kManifestName = "manifest.json";

inline json to_json(const RunManifest& m) {
  return {{"command", m.command},
          {"config", m.config},
          {"config_hash", config_hash(m.config)},
          {"seeds", m.seeds},
          {"inputs", m.inputs},
          {"outputs", m.outputs},
          {"tool_version", m.tool_version},
          {"wall_clock", m.wall_clock}};
}

inline void write_manifest(const std::filesystem::path& dir, const RunManifest& m) {
  write_json_file(dir / kManifestName, to_json(m));
}

}  // namespace rlvlm
