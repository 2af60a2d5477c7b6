#pragma once

// Entity size from per-patch keyword similarity grids: filter the heatmap,
// keep the largest 4-connected region, and measure its bounding box.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rlvlm/numerics.hpp"

namespace rlvlm {

inline constexpr double kDefaultTauPatch = 0.295;

// Scores are stored row-major over cells with the keyword index innermost:
// scores[(r * width + c) * K + k].
struct PatchHeatmap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::string> keywords;
  std::vector<double> scores;

  PatchHeatmap() = default;
  PatchHeatmap(std::size_t h, std::size_t w, std::vector<std::string> keys)
      : height(h), width(w), keywords(std::move(keys)),
        scores(h * w * keywords.size(), 0.0) {
    validate();
  }

  std::size_t keyword_count() const { return keywords.size(); }
  double& at(std::size_t r, std::size_t c, std::size_t k) {
    return scores[(r * width + c) * keywords.size() + k];
  }
  double at(std::size_t r, std::size_t c, std::size_t k) const {
    return scores[(r * width + c) * keywords.size() + k];
  }

  void validate() const {
    if (height == 0 || width == 0) throw DomainError("PatchHeatmap: empty grid");
    if (keywords.empty()) throw DomainError("PatchHeatmap: no keywords");
    if (scores.size() != height * width * keywords.size())
      throw DomainError("PatchHeatmap: score array does not match H*W*K");
    for (double s : scores) {
      if (!std::isfinite(s) || s < -1.0 || s > 1.0)
        throw DomainError("PatchHeatmap: scores must be finite and in [-1, 1]");
    }
  }
};

struct Mask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> bits;

  Mask() = default;
  Mask(std::size_t h, std::size_t w) : height(h), width(w), bits(h * w, 0) {}

  bool at(std::size_t r, std::size_t c) const { return bits[r * width + c] != 0; }
  void set(std::size_t r, std::size_t c, bool v = true) { bits[r * width + c] = v ? 1 : 0; }
  std::size_t count() const {
    std::size_t n = 0;
    for (auto b : bits) n += b;
    return n;
  }
  bool empty() const { return count() == 0; }
  bool operator==(const Mask&) const = default;
};

struct BoundingBox {
  std::size_t row_min = 0, row_max = 0, col_min = 0, col_max = 0;
  std::size_t grid_height = 0, grid_width = 0;

  std::size_t height() const { return row_max - row_min + 1; }
  std::size_t width() const { return col_max - col_min + 1; }
  std::size_t area() const { return height() * width(); }
  double normalized_area() const {
    return static_cast<double>(area()) / static_cast<double>(grid_height * grid_width);
  }
  bool operator==(const BoundingBox&) const = default;
};

// A cell survives when the key's score strictly beats every other keyword
// there and reaches tau_patch. Ties on the argmax drop the cell.
inline Mask filter_heatmap(const PatchHeatmap& hm, std::size_t key_index,
                           double tau_patch = kDefaultTauPatch) {
  if (key_index >= hm.keyword_count())
    throw DomainError("filter_heatmap: key_index out of range");
  Mask m(hm.height, hm.width);
  const std::size_t K = hm.keyword_count();
  for (std::size_t r = 0; r < hm.height; ++r) {
    for (std::size_t c = 0; c < hm.width; ++c) {
      const double key = hm.at(r, c, key_index);
      if (key < tau_patch) continue;
      bool dominant = true;
      for (std::size_t k = 0; k < K && dominant; ++k) {
        if (k != key_index && hm.at(r, c, k) >= key) dominant = false;
      }
      if (dominant) m.set(r, c);
    }
  }
  return m;
}

// Largest 4-connected component. Components are discovered in row-major
// order of their first cell, which is their (row_min, col_min)-smallest
// cell, and only a strictly larger one replaces the incumbent.
inline Mask max_connected_region(const Mask& mask) {
  const std::size_t H = mask.height, W = mask.width;
  std::vector<int> label(H * W, -1);
  std::vector<std::size_t> best_cells;
  std::vector<std::size_t> stack, cells;
  int next = 0;
  for (std::size_t start = 0; start < H * W; ++start) {
    if (!mask.bits[start] || label[start] >= 0) continue;
    cells.clear();
    stack.assign(1, start);
    label[start] = next;
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      cells.push_back(p);
      const std::size_t r = p / W, c = p % W;
      auto visit = [&](std::size_t q) {
        if (mask.bits[q] && label[q] < 0) {
          label[q] = next;
          stack.push_back(q);
        }
      };
      if (r > 0) visit(p - W);
      if (r + 1 < H) visit(p + W);
      if (c > 0) visit(p - 1);
      if (c + 1 < W) visit(p + 1);
    }
    if (cells.size() > best_cells.size()) best_cells = cells;
    ++next;
  }
  Mask out(H, W);
  for (std::size_t p : best_cells) out.bits[p] = 1;
  return out;
}

inline std::optional<BoundingBox> bounding_box(const Mask& region) {
  std::optional<BoundingBox> box;
  for (std::size_t r = 0; r < region.height; ++r) {
    for (std::size_t c = 0; c < region.width; ++c) {
      if (!region.at(r, c)) continue;
      if (!box) {
        box = BoundingBox{r, r, c, c, region.height, region.width};
      } else {
        box->row_min = std::min(box->row_min, r);
        box->row_max = std::max(box->row_max, r);
        box->col_min = std::min(box->col_min, c);
        box->col_max = std::max(box->col_max, c);
      }
    }
  }
  return box;
}

enum class SizeUnit { normalized, raw };

// Size of the key entity in one frame: 0 when nothing survives filtering.
inline double estimate_entity_size(const PatchHeatmap& hm, std::size_t key_index,
                                   double tau_patch = kDefaultTauPatch,
                                   SizeUnit unit = SizeUnit::normalized) {
  const auto box = bounding_box(max_connected_region(filter_heatmap(hm, key_index, tau_patch)));
  if (!box) return 0.0;
  return unit == SizeUnit::normalized ? box->normalized_area()
                                      : static_cast<double>(box->area());
}

// Local correlation of a clip: the summed per-frame entity sizes.
inline double clip_local_correlation(std::span<const double> frame_sizes) {
  double s = 0.0;
  for (double x : frame_sizes) {
    if (x < 0.0) throw DomainError("clip_local_correlation: negative size");
    s += x;
  }
  return s;
}

}  // namespace rlvlm
