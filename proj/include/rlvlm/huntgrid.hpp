#pragma once

// HuntGrid: a small partially observed hunting task. The agent sees an
// egocentric patch grid in which the target is drawn as a square whose side
// shrinks with distance; three hits in melee range kill it, and after the
// first hit it tries to flee.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include "rlvlm/numerics.hpp"
#include "rlvlm/world.hpp"

namespace rlvlm {

enum Action : std::size_t { kNoop = 0, kForward = 1, kTurnLeft = 2, kTurnRight = 3, kAttack = 4 };
inline constexpr std::size_t kActionCount = 5;

struct HuntConfig {
  int grid_size = 15;
  int spawn_radius = 7;
  int spawn_min_radius = 0;  // 0 selects ceil(spawn_radius / 2)
  int max_steps = 500;
  int target_health = 3;
  bool flee = true;
  double flee_prob = 0.8;
  int attack_range = 1;
  std::size_t view_height = 10;
  std::size_t view_width = 16;
  int apparent_max = 4;  // apparent side in patches at distance <= 1
  std::size_t frame_stack = 4;
  double success_reward = 100.0;
  std::string target_entity = "cow";
  std::string biome = "plains";
  std::string time_of_day = "noon";
  std::string tool = "diamond sword";

  int min_spawn_radius() const {
    return spawn_min_radius > 0 ? spawn_min_radius : std::max(1, (spawn_radius + 1) / 2);
  }

  void validate() const {
    if (grid_size < 3) throw ConfigError("huntgrid: grid_size must be >= 3");
    if (spawn_radius < 1) throw ConfigError("huntgrid: spawn_radius must be >= 1");
    if (min_spawn_radius() > spawn_radius) throw ConfigError("huntgrid: spawn_min_radius exceeds spawn_radius");
    if (spawn_radius > grid_size / 2) throw ConfigError("huntgrid: spawn_radius does not fit the grid");
    if (max_steps < 1) throw ConfigError("huntgrid: max_steps must be >= 1");
    if (target_health < 1) throw ConfigError("huntgrid: target_health must be >= 1");
    if (flee_prob < 0.0 || flee_prob > 1.0) throw ConfigError("huntgrid: flee_prob must be in [0, 1]");
    if (view_height == 0 || view_width == 0) throw ConfigError("huntgrid: empty view");
    if (apparent_max < 1) throw ConfigError("huntgrid: apparent_max must be >= 1");
    if (frame_stack < 1) throw ConfigError("huntgrid: frame_stack must be >= 1");
  }
};

struct WorldState {
  int agent_x = 0, agent_y = 0;
  int heading = 0;  // 0 north (-y), 1 east, 2 south, 3 west
  int target_x = 0, target_y = 0;
  int health = 0;
  bool fleeing = false;
  int step = 0;
  bool done = false;
  std::size_t prev_action = kNoop;
  Rng rng;

  bool operator==(const WorldState& o) const {
    return agent_x == o.agent_x && agent_y == o.agent_y && heading == o.heading &&
           target_x == o.target_x && target_y == o.target_y && health == o.health &&
           fleeing == o.fleeing && step == o.step && done == o.done &&
           prev_action == o.prev_action && rng.state() == o.rng.state();
  }
};

struct Observation {
  std::size_t height = 0, width = 0;
  std::vector<double> grid;  // 1 where the target is drawn
  std::size_t prev_action = kNoop;
  bool visible = false;
  int distance = 0;             // Chebyshev distance agent-target
  double apparent_size = 0.0;   // drawn cells / (height * width)
};

namespace detail {
inline constexpr std::array<int, 4> kDx = {0, 1, 0, -1};
inline constexpr std::array<int, 4> kDy = {-1, 0, 1, 0};
}  // namespace detail

inline int chebyshev(int ax, int ay, int bx, int by) {
  return std::max(std::abs(ax - bx), std::abs(ay - by));
}

// Target coordinates in the agent frame: forward and rightward offsets.
struct RelativePosition {
  int forward = 0;
  int lateral = 0;
};

inline RelativePosition relative_position(const WorldState& s) {
  const int dx = s.target_x - s.agent_x, dy = s.target_y - s.agent_y;
  const int h = s.heading, r = (s.heading + 1) % 4;
  return {dx * detail::kDx[h] + dy * detail::kDy[h], dx * detail::kDx[r] + dy * detail::kDy[r]};
}

// 90 degree field of view.
inline bool in_view(const RelativePosition& p) {
  return p.forward >= 1 && std::abs(p.lateral) <= p.forward;
}

// Side length in patches of the drawn target at Chebyshev distance d.
inline int apparent_side(const HuntConfig& cfg, int d) {
  const int denom = std::max(1, d);
  return (cfg.apparent_max + denom - 1) / denom;
}

inline Observation observe(const HuntConfig& cfg, const WorldState& s) {
  Observation o;
  o.height = cfg.view_height;
  o.width = cfg.view_width;
  o.grid.assign(o.height * o.width, 0.0);
  o.prev_action = s.prev_action;
  o.distance = chebyshev(s.agent_x, s.agent_y, s.target_x, s.target_y);
  const RelativePosition p = relative_position(s);
  if (s.health <= 0 || !in_view(p)) return o;
  o.visible = true;
  const int side = std::min<int>(apparent_side(cfg, o.distance),
                                 static_cast<int>(std::min(o.height, o.width)));
  const double rc = 0.5 * static_cast<double>(o.height - 1);
  const double cc = 0.5 * static_cast<double>(o.width - 1) *
                    (1.0 + static_cast<double>(p.lateral) / static_cast<double>(p.forward));
  const long r0 = std::lround(rc - 0.5 * (side - 1));
  const long c0 = std::lround(cc - 0.5 * (side - 1));
  std::size_t filled = 0;
  for (long r = r0; r < r0 + side; ++r) {
    for (long c = c0; c < c0 + side; ++c) {
      if (r < 0 || c < 0 || r >= static_cast<long>(o.height) || c >= static_cast<long>(o.width)) continue;
      o.grid[static_cast<std::size_t>(r) * o.width + static_cast<std::size_t>(c)] = 1.0;
      ++filled;
    }
  }
  o.apparent_size = static_cast<double>(filled) / static_cast<double>(o.height * o.width);
  return o;
}

struct ResetResult {
  WorldState state;
  Observation observation;
};

// Agent at the grid center with a random heading; target uniform over the
// cells whose Chebyshev distance lies in [min_spawn_radius, spawn_radius].
inline ResetResult env_reset(std::uint64_t seed, const HuntConfig& cfg = {}) {
  cfg.validate();
  WorldState s;
  s.rng = Rng(seed).substream("env");
  s.agent_x = s.agent_y = cfg.grid_size / 2;
  s.heading = static_cast<int>(s.rng.uniform_index(4));
  std::vector<std::pair<int, int>> cells;
  for (int y = 0; y < cfg.grid_size; ++y) {
    for (int x = 0; x < cfg.grid_size; ++x) {
      const int d = chebyshev(x, y, s.agent_x, s.agent_y);
      if (d >= cfg.min_spawn_radius() && d <= cfg.spawn_radius) cells.emplace_back(x, y);
    }
  }
  const auto [tx, ty] = cells[s.rng.uniform_index(cells.size())];
  s.target_x = tx;
  s.target_y = ty;
  s.health = cfg.target_health;
  return {s, observe(cfg, s)};
}

struct StepResult {
  WorldState state;
  Observation observation;
  double r_env = 0.0;
  bool done = false;
};

inline bool attack_hits(const HuntConfig& cfg, const WorldState& s) {
  return in_view(relative_position(s)) &&
         chebyshev(s.agent_x, s.agent_y, s.target_x, s.target_y) <= cfg.attack_range;
}

// Pure in (state, action): all randomness comes from the rng carried in the
// state. Walls and the target block movement; the step counter always
// advances.
inline StepResult env_step(const HuntConfig& cfg, WorldState s, std::size_t action) {
  if (action >= kActionCount) throw DomainError("env_step: illegal action index " + std::to_string(action));
  if (s.done) throw DomainError("env_step: episode already finished");
  StepResult out;
  switch (action) {
    case kForward: {
      const int nx = s.agent_x + detail::kDx[s.heading];
      const int ny = s.agent_y + detail::kDy[s.heading];
      const bool inside = nx >= 0 && ny >= 0 && nx < cfg.grid_size && ny < cfg.grid_size;
      if (inside && !(nx == s.target_x && ny == s.target_y)) {
        s.agent_x = nx;
        s.agent_y = ny;
      }
      break;
    }
    case kTurnLeft: s.heading = (s.heading + 3) % 4; break;
    case kTurnRight: s.heading = (s.heading + 1) % 4; break;
    case kAttack:
      if (attack_hits(cfg, s)) {
        --s.health;
        if (cfg.flee) s.fleeing = true;
        if (s.health <= 0) out.r_env = cfg.success_reward;
      }
      break;
    default: break;
  }
  s.prev_action = action;
  if (s.health > 0 && s.fleeing && s.rng.bernoulli(cfg.flee_prob)) {
    // Move to a neighbour that increases the squared distance the most.
    const auto dist2 = [&](int x, int y) {
      return (x - s.agent_x) * (x - s.agent_x) + (y - s.agent_y) * (y - s.agent_y);
    };
    int best = dist2(s.target_x, s.target_y);
    std::vector<int> moves;
    for (int m = 0; m < 4; ++m) {
      const int nx = s.target_x + detail::kDx[m], ny = s.target_y + detail::kDy[m];
      if (nx < 0 || ny < 0 || nx >= cfg.grid_size || ny >= cfg.grid_size) continue;
      const int d = dist2(nx, ny);
      if (d > best) {
        best = d;
        moves.assign(1, m);
      } else if (d == best && !moves.empty()) {
        moves.push_back(m);
      }
    }
    if (!moves.empty()) {
      const int m = moves[moves.size() == 1 ? 0 : s.rng.uniform_index(moves.size())];
      s.target_x += detail::kDx[m];
      s.target_y += detail::kDy[m];
    }
  }
  ++s.step;
  s.done = s.health <= 0 || s.step >= cfg.max_steps;
  out.done = s.done;
  out.observation = observe(cfg, s);
  out.state = std::move(s);
  return out;
}

// Content of the agent's current frame in the shared toy visual world.
inline FrameContent frame_content(const HuntConfig& cfg, const Observation& o) {
  const WorldVocab& w = WorldVocab::standard();
  FrameContent f;
  if (o.visible) f.entity = w.entity_index(cfg.target_entity);
  f.biome = w.biome_index(cfg.biome);
  f.time_of_day = w.time_index(cfg.time_of_day);
  f.tool = w.tool_index(cfg.tool);
  f.size = o.apparent_size;
  return f;
}

// Policy input: the last `frame_stack` grids (oldest first) followed by a
// one-hot of the previous action.
class FrameStack {
 public:
  explicit FrameStack(std::size_t depth = 4) : depth_(depth) {}

  void reset(const Observation& o) {
    frames_.assign(depth_, o.grid);
    prev_action_ = o.prev_action;
  }
  void push(const Observation& o) {
    frames_.pop_front();
    frames_.push_back(o.grid);
    prev_action_ = o.prev_action;
  }

  std::vector<double> input() const {
    std::vector<double> x;
    std::size_t n = kActionCount;
    for (const auto& f : frames_) n += f.size();
    x.reserve(n);
    for (const auto& f : frames_) x.insert(x.end(), f.begin(), f.end());
    for (std::size_t a = 0; a < kActionCount; ++a) x.push_back(a == prev_action_ ? 1.0 : 0.0);
    return x;
  }

  static std::size_t input_dim(const HuntConfig& cfg) {
    return cfg.frame_stack * cfg.view_height * cfg.view_width + kActionCount;
  }

 private:
  std::size_t depth_;
  std::deque<std::vector<double>> frames_;
  std::size_t prev_action_ = kNoop;
};

// Heads toward the target along the longer axis and attacks when it can.
inline std::size_t scripted_chaser_action(const HuntConfig& cfg, const WorldState& s,
                                          bool allow_attack = true) {
  if (attack_hits(cfg, s)) return allow_attack ? kAttack : kNoop;
  const int dx = s.target_x - s.agent_x, dy = s.target_y - s.agent_y;
  int desired;
  if (std::abs(dx) >= std::abs(dy)) desired = dx > 0 ? 1 : 3;
  else desired = dy > 0 ? 2 : 0;
  if (desired == s.heading) return kForward;
  return ((s.heading + 1) % 4 == desired) ? kTurnRight : kTurnLeft;
}

}  // namespace rlvlm
