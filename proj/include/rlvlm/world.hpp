#pragma once

// The toy visual world shared by the synthetic corpus, the reward model and
// HuntGrid: a fixed entity/attribute vocabulary, the raw per-frame feature
// layout, and the frozen fixed-seed frame encoder that stands in for a
// pretrained image tower.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "rlvlm/numerics.hpp"

namespace rlvlm {

inline constexpr std::size_t kEmbeddingDim = 32;
inline constexpr std::size_t kFrameEncoderHidden = 64;
inline constexpr std::uint64_t kFrozenEncoderSeed = 0x4d43'4c49'5034'4d43ULL;

struct EntityInfo {
  std::string name;
  std::vector<std::string> surface_forms;  // includes name
};

// Maps every registered surface form to its canonical entity name.
class KeywordRegistry {
 public:
  KeywordRegistry() = default;
  explicit KeywordRegistry(const std::vector<EntityInfo>& entities) {
    for (const EntityInfo& e : entities) add(e.name, e.surface_forms);
  }

  void add(const std::string& canonical, const std::vector<std::string>& forms) {
    if (std::find(canonical_.begin(), canonical_.end(), canonical) == canonical_.end())
      canonical_.push_back(canonical);
    forms_[canonical] = canonical;
    for (const std::string& f : forms) forms_[f] = canonical;
  }

  std::optional<std::string> match(std::string_view token) const {
    auto it = forms_.find(std::string(token));
    if (it == forms_.end()) return std::nullopt;
    return it->second;
  }

  const std::vector<std::string>& canonical_names() const { return canonical_; }

 private:
  std::map<std::string, std::string> forms_;
  std::vector<std::string> canonical_;
};

// Latent content of one frame.
struct FrameContent {
  std::optional<std::size_t> entity;  // visible entity, if any
  std::size_t biome = 0;
  std::size_t time_of_day = 0;
  std::size_t tool = 0;
  double size = 0.0;  // normalized apparent size of the visible entity
};

class WorldVocab {
 public:
  static const WorldVocab& standard() {
    static const WorldVocab v;
    return v;
  }

  const std::vector<EntityInfo>& entities() const { return entities_; }
  const std::vector<std::string>& biomes() const { return biomes_; }
  const std::vector<std::string>& times() const { return times_; }
  // Two-token phrases, e.g. "diamond sword".
  const std::vector<std::vector<std::string>>& tools() const { return tools_; }
  const KeywordRegistry& registry() const { return registry_; }

  std::size_t entity_count() const { return entities_.size(); }
  std::vector<std::string> entity_names() const {
    std::vector<std::string> out;
    for (const auto& e : entities_) out.push_back(e.name);
    return out;
  }
  std::size_t entity_index(std::string_view name) const {
    for (std::size_t i = 0; i < entities_.size(); ++i) {
      if (entities_[i].name == name) return i;
    }
    throw DomainError("unknown entity '" + std::string(name) + "'");
  }
  std::size_t biome_index(std::string_view name) const { return index_of(biomes_, name, "biome"); }
  std::size_t time_index(std::string_view name) const { return index_of(times_, name, "time"); }
  std::size_t tool_index(std::string_view phrase) const {
    for (std::size_t i = 0; i < tools_.size(); ++i) {
      if (tools_[i][0] + " " + tools_[i][1] == phrase) return i;
    }
    throw DomainError("unknown tool '" + std::string(phrase) + "'");
  }

  // Every token the templates can produce, sorted. Fixes the text vocabulary.
  const std::vector<std::string>& tokens() const { return tokens_; }

  // Raw frame feature: [entity one-hot | biome | time | tool | size channel].
  std::size_t feature_dim() const {
    return entities_.size() + biomes_.size() + times_.size() + tools_.size() + 1;
  }

  Vector frame_feature(const FrameContent& f, double noise = 0.0, Rng* rng = nullptr) const {
    Vector x(feature_dim());
    std::size_t o = 0;
    if (f.entity) x[o + *f.entity] = 1.0;
    o += entities_.size();
    x[o + f.biome] = 1.0;
    o += biomes_.size();
    x[o + f.time_of_day] = 1.0;
    o += times_.size();
    x[o + f.tool] = 1.0;
    o += tools_.size();
    x[o] = f.entity ? size_channel(f.size) : 0.0;
    if (noise > 0.0 && rng != nullptr) {
      for (double& v : x) v += rng->normal(0.0, noise);
    }
    return x;
  }

  // sqrt compresses the size range so one-patch and full-frame entities are
  // both visible to a small network.
  static double size_channel(double size) { return 3.0 * std::sqrt(std::max(size, 0.0)); }

  // Parses a token sequence into frame content using the first mention of
  // each attribute; `entity` overrides the entity mention when given.
  FrameContent parse_mentions(const std::vector<std::string>& tokens,
                              std::optional<std::string> entity, double nominal_size) const {
    FrameContent f;
    f.size = nominal_size;
    bool biome = false, time = false, tool = false;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      const std::string& t = tokens[i];
      if (!f.entity && !entity) {
        if (auto e = registry_.match(t)) f.entity = entity_index(*e);
      }
      if (!biome) {
        if (auto it = std::find(biomes_.begin(), biomes_.end(), t); it != biomes_.end()) {
          f.biome = static_cast<std::size_t>(it - biomes_.begin());
          biome = true;
        }
      }
      if (!time) {
        if (auto it = std::find(times_.begin(), times_.end(), t); it != times_.end()) {
          f.time_of_day = static_cast<std::size_t>(it - times_.begin());
          time = true;
        }
      }
      if (!tool && i + 1 < tokens.size()) {
        for (std::size_t k = 0; k < tools_.size(); ++k) {
          if (tools_[k][0] == t && tools_[k][1] == tokens[i + 1]) {
            f.tool = k;
            tool = true;
          }
        }
      }
    }
    if (entity) f.entity = entity_index(*entity);
    return f;
  }

 private:
  WorldVocab() {
    const std::vector<std::pair<std::string, std::string>> ents = {
        {"cow", "cows"},         {"sheep", "sheeps"},       {"pig", "pigs"},
        {"chicken", "chickens"}, {"spider", "spiders"},     {"zombie", "zombies"},
        {"horse", "horses"},     {"wolf", "wolves"},        {"creeper", "creepers"},
        {"skeleton", "skeletons"}, {"villager", "villagers"}, {"llama", "llamas"},
        {"rabbit", "rabbits"},   {"fox", "foxes"},          {"bee", "bees"},
        {"goat", "goats"}};
    for (const auto& [n, plural] : ents) entities_.push_back({n, {n, plural}});
    biomes_ = {"plains", "forest", "desert", "jungle", "taiga", "savanna", "swamp", "mountains"};
    times_ = {"morning", "noon", "evening", "night"};
    tools_ = {{"diamond", "sword"}, {"iron", "axe"}, {"stone", "pickaxe"}, {"golden", "shovel"}};
    registry_ = KeywordRegistry(entities_);

    std::set<std::string> toks;
    for (const auto& e : entities_) toks.insert(e.name);
    for (const auto& b : biomes_) toks.insert(b);
    for (const auto& t : times_) toks.insert(t);
    for (const auto& t : tools_) toks.insert(t.begin(), t.end());
    for (std::string_view w : template_words()) toks.insert(std::string(w));
    tokens_.assign(toks.begin(), toks.end());
  }

  static std::size_t index_of(const std::vector<std::string>& xs, std::string_view name,
                              const char* what) {
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (xs[i] == name) return i;
    }
    throw DomainError(std::string("unknown ") + what + " '" + std::string(name) + "'");
  }

  static std::vector<std::string_view> template_words();

  std::vector<EntityInfo> entities_;
  std::vector<std::string> biomes_;
  std::vector<std::string> times_;
  std::vector<std::vector<std::string>> tools_;
  KeywordRegistry registry_;
  std::vector<std::string> tokens_;
};

// Sentence templates. Slots: {E} entity, {B} biome, {T} time, {W} tool phrase.
inline const std::vector<std::string>& keyword_sentence_templates() {
  static const std::vector<std::string> t = {
      "so now we are in the {B} at {T} and i am going to hunt this {E} with my {W} right here",
      "look at this {E} over there in the {B} i will get it with the {W} before {T} is over",
      "it is {T} in the {B} and there is a {E} so let me grab my {W} and go",
      "okay guys here in the {B} we found a {E} and it is {T} so i pull out the {W}",
      "with a {W} in hand i walk through the {B} this {T} looking for a {E} to hunt",
      "we spot a {E} near the edge of the {B} at {T} time to use the {W} on it",
      "this {T} we are chasing a {E} across the {B} and i have my {W} ready",
      "i think that {E} in the {B} is the one we need so {W} out and let us go this {T}"};
  return t;
}

inline const std::vector<std::string>& filler_sentences() {
  static const std::vector<std::string> t = {
      "okay guys welcome back to another episode",
      "let me check my inventory real quick",
      "make sure to like and subscribe if you enjoy this",
      "that was pretty cool right",
      "anyway so where were we",
      "i really need to find some food soon because i am starving",
      "hold on let me fix my settings",
      "if you are new here this series is all about survival",
      "that is going to be it for this part",
      "let me know in the comments what you think we should build next",
      "so yeah",
      "wait what was that noise"};
  return t;
}

inline std::vector<std::string_view> WorldVocab::template_words() {
  static std::vector<std::string> words;
  if (words.empty()) {
    auto add = [](const std::string& s) {
      std::size_t i = 0;
      while (i < s.size()) {
        while (i < s.size() && s[i] == ' ') ++i;
        std::size_t j = i;
        while (j < s.size() && s[j] != ' ') ++j;
        if (j > i) {
          std::string w = s.substr(i, j - i);
          if (w.front() != '{') words.push_back(w);
        }
        i = j;
      }
    };
    for (const auto& s : keyword_sentence_templates()) add(s);
    for (const auto& s : filler_sentences()) add(s);
    add("hunt a in plains with a");  // prompt template words
  }
  return {words.begin(), words.end()};
}

inline std::vector<std::string> split_words(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && s[i] == ' ') ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ') ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

// Fixed-seed frame encoder: raw frame feature -> unit embedding. Never trained.
class FrozenFrameEncoder {
 public:
  static const FrozenFrameEncoder& standard() {
    static const FrozenFrameEncoder e;
    return e;
  }

  Vector embed(const Vector& feature) const { return net_.forward(feature); }
  Vector embed(const FrameContent& f) const {
    return embed(WorldVocab::standard().frame_feature(f));
  }
  const Mlp& network() const { return net_; }

 private:
  FrozenFrameEncoder() {
    Rng rng(kFrozenEncoderSeed);
    net_ = Mlp::random({WorldVocab::standard().feature_dim(), kFrameEncoderHidden, kEmbeddingDim},
                       true, rng, 1.5);
  }
  Mlp net_;
};

// Reference ("frozen") text embedding: the prototype frame for the mentioned
// content, pushed through the frozen frame encoder. Used for global scores
// and for choosing the segment that matches a transcript.
inline constexpr double kReferenceNominalSize = 0.05;

inline Vector reference_text_embedding(const std::vector<std::string>& tokens,
                                       const std::string& keyword) {
  const WorldVocab& w = WorldVocab::standard();
  return FrozenFrameEncoder::standard().embed(
      w.parse_mentions(tokens, keyword, kReferenceNominalSize));
}

}  // namespace rlvlm
