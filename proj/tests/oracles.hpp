#pragma once

// Independent reference implementations used by the unit and acceptance
// tests. Deliberately naive: no prefix sums, no clever traversal order.

#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "rlvlm/entitysize.hpp"
#include "rlvlm/numerics.hpp"

namespace oracle {

inline double sse(const std::vector<rlvlm::Vector>& pts, std::size_t b, std::size_t e) {
  const std::size_t d = pts[0].dim();
  std::vector<double> m(d, 0.0);
  for (std::size_t i = b; i < e; ++i)
    for (std::size_t j = 0; j < d; ++j) m[j] += pts[i][j];
  for (double& x : m) x /= static_cast<double>(e - b);
  double s = 0.0;
  for (std::size_t i = b; i < e; ++i)
    for (std::size_t j = 0; j < d; ++j) s += (pts[i][j] - m[j]) * (pts[i][j] - m[j]);
  return s;
}

struct Partition {
  std::vector<std::size_t> boundaries;
  double sse = std::numeric_limits<double>::infinity();
};

// Every composition of n into k positive parts, in lexicographic order of the
// boundary list; strict improvement keeps the earliest optimum.
inline Partition brute_force_segmentation(const std::vector<rlvlm::Vector>& pts, std::size_t k) {
  const std::size_t n = pts.size();
  Partition best;
  std::vector<std::size_t> b{0};
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t start, std::size_t left) {
    if (left == 1) {
      b.push_back(n);
      double s = 0.0;
      for (std::size_t i = 0; i + 1 < b.size(); ++i) s += sse(pts, b[i], b[i + 1]);
      if (s < best.sse) best = {b, s};
      b.pop_back();
      return;
    }
    for (std::size_t cut = start + 1; cut + left - 1 <= n; ++cut) {
      b.push_back(cut);
      rec(cut, left - 1);
      b.pop_back();
    }
  };
  rec(0, k);
  return best;
}

// Label components by repeated relaxation (each cell takes the minimum label
// of its 4-neighbours until nothing changes), then keep the biggest one.
inline rlvlm::Mask flood_fill_largest(const rlvlm::Mask& m) {
  const std::size_t H = m.height, W = m.width;
  std::vector<std::size_t> lab(H * W, SIZE_MAX);
  for (std::size_t p = 0; p < H * W; ++p)
    if (m.bits[p]) lab[p] = p;
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t r = 0; r < H; ++r)
      for (std::size_t c = 0; c < W; ++c) {
        const std::size_t p = r * W + c;
        if (!m.bits[p]) continue;
        std::size_t best = lab[p];
        if (r > 0 && m.bits[p - W]) best = std::min(best, lab[p - W]);
        if (r + 1 < H && m.bits[p + W]) best = std::min(best, lab[p + W]);
        if (c > 0 && m.bits[p - 1]) best = std::min(best, lab[p - 1]);
        if (c + 1 < W && m.bits[p + 1]) best = std::min(best, lab[p + 1]);
        if (best != lab[p]) {
          lab[p] = best;
          changed = true;
        }
      }
  }
  // Root label is the row-major first cell of the component, so scanning
  // roots in increasing order applies the (row_min, col_min) tie-break.
  std::vector<std::size_t> count(H * W, 0);
  for (std::size_t p = 0; p < H * W; ++p)
    if (m.bits[p]) ++count[lab[p]];
  std::size_t root = SIZE_MAX, size = 0;
  for (std::size_t p = 0; p < H * W; ++p)
    if (count[p] > size) {
      size = count[p];
      root = p;
    }
  rlvlm::Mask out(H, W);
  for (std::size_t p = 0; p < H * W; ++p)
    if (m.bits[p] && lab[p] == root) out.bits[p] = 1;
  return out;
}

inline rlvlm::Mask filter_cells(const rlvlm::PatchHeatmap& hm, std::size_t key, double tau) {
  rlvlm::Mask m(hm.height, hm.width);
  for (std::size_t r = 0; r < hm.height; ++r)
    for (std::size_t c = 0; c < hm.width; ++c) {
      double other = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < hm.keyword_count(); ++k)
        if (k != key) other = std::max(other, hm.at(r, c, k));
      const double s = hm.at(r, c, key);
      m.set(r, c, s > other && s >= tau);
    }
  return m;
}

struct Box {
  std::size_t r0, r1, c0, c1;
};

inline std::optional<Box> min_box(const rlvlm::Mask& m) {
  std::optional<Box> b;
  for (std::size_t r = 0; r < m.height; ++r)
    for (std::size_t c = 0; c < m.width; ++c) {
      if (!m.at(r, c)) continue;
      if (!b) b = Box{r, r, c, c};
      b->r0 = std::min(b->r0, r);
      b->r1 = std::max(b->r1, r);
      b->c0 = std::min(b->c0, c);
      b->c1 = std::max(b->c1, c);
    }
  return b;
}

// Random heatmap with a few blobby keyword regions so components of several
// sizes actually appear.
inline rlvlm::PatchHeatmap random_heatmap(rlvlm::Rng& rng, std::size_t H, std::size_t W, std::size_t K) {
  std::vector<std::string> keys;
  for (std::size_t k = 0; k < K; ++k) keys.push_back("k" + std::to_string(k));
  rlvlm::PatchHeatmap hm(H, W, keys);
  for (double& s : hm.scores) s = rng.uniform(-0.2, 0.35);
  const std::size_t blobs = 1 + rng.uniform_index(4);
  for (std::size_t b = 0; b < blobs; ++b) {
    const std::size_t k = rng.uniform_index(K);
    const double cr = rng.uniform(0, H), cc = rng.uniform(0, W);
    const double rad = rng.uniform(0.8, 4.0);
    for (std::size_t r = 0; r < H; ++r)
      for (std::size_t c = 0; c < W; ++c) {
        const double d2 = (r - cr) * (r - cr) + (c - cc) * (c - cc);
        if (d2 < rad * rad) hm.at(r, c, k) = std::min(1.0, hm.at(r, c, k) + rng.uniform(0.2, 0.6));
      }
  }
  return hm;
}

}  // namespace oracle
