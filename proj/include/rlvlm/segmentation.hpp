#pragma once

// Bellman k-segmentation of a vector sequence into piecewise-constant
// segments, and selection of the segment that best matches a query.

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "rlvlm/numerics.hpp"

namespace rlvlm {

struct SegmentationResult {
  std::vector<std::size_t> boundaries;  // b_0 = 0 < b_1 < ... < b_k = n
  double total_sse = 0.0;
  std::vector<Vector> segment_means;

  std::size_t segment_count() const { return boundaries.empty() ? 0 : boundaries.size() - 1; }
};

// Sum of squared deviations from the mean of points[begin, end), two-pass.
inline double segment_sse(std::span<const Vector> points, std::size_t begin, std::size_t end) {
  if (begin >= end || end > points.size()) throw DomainError("segment_sse: bad range");
  const Vector m = mean_of(points.subspan(begin, end - begin));
  double s = 0.0;
  for (std::size_t i = begin; i < end; ++i) {
    for (std::size_t d = 0; d < m.dim(); ++d) {
      const double r = points[i][d] - m[d];
      s += r * r;
    }
  }
  return s;
}

// Recomputes means and SSE for a boundary list. Throws if the boundaries do
// not describe a partition of `points`.
inline SegmentationResult segmentation_from_boundaries(std::span<const Vector> points,
                                                       std::vector<std::size_t> boundaries) {
  if (boundaries.size() < 2 || boundaries.front() != 0 || boundaries.back() != points.size())
    throw DomainError("segmentation: boundaries must run from 0 to n");
  SegmentationResult r;
  for (std::size_t s = 0; s + 1 < boundaries.size(); ++s) {
    const std::size_t b = boundaries[s], e = boundaries[s + 1];
    if (b >= e) throw DomainError("segmentation: boundaries must be strictly ascending");
    r.total_sse += segment_sse(points, b, e);
    r.segment_means.push_back(mean_of(points.subspan(b, e - b)));
  }
  r.boundaries = std::move(boundaries);
  return r;
}

// Globally optimal k-partition minimizing total within-segment SSE.
// Segment costs come from prefix sums of x and |x|^2; a suffix table is filled
// in O(k n^2) and the partition is read off front to back, so among
// (numerically) tied optima the lexicographically smallest boundary list wins.
inline SegmentationResult k_segmentation(std::span<const Vector> points, std::size_t k) {
  const std::size_t n = points.size();
  if (k == 0) throw DomainError("k_segmentation: k must be positive");
  if (k > n) throw DomainError("k_segmentation: k exceeds number of points");
  const std::size_t dim = points.front().dim();
  for (const Vector& p : points) {
    if (p.dim() != dim) throw DomainError("k_segmentation: points have different dimensions");
  }

  std::vector<double> sum((n + 1) * dim, 0.0);
  std::vector<double> sq(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < dim; ++d) {
      sum[(i + 1) * dim + d] = sum[i * dim + d] + points[i][d];
    }
    sq[i + 1] = sq[i] + squared_norm(points[i].span());
  }
  auto cost = [&](std::size_t a, std::size_t b) {
    double s2 = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      const double s = sum[b * dim + d] - sum[a * dim + d];
      s2 += s * s;
    }
    const double c = (sq[b] - sq[a]) - s2 / static_cast<double>(b - a);
    return c > 0.0 ? c : 0.0;
  };

  constexpr double inf = std::numeric_limits<double>::infinity();
  // tail[j][i]: best cost of splitting points[i, n) into j segments.
  std::vector<std::vector<double>> tail(k + 1, std::vector<double>(n + 1, inf));
  tail[0][n] = 0.0;
  for (std::size_t j = 1; j <= k; ++j) {
    for (std::size_t i = 0; i + j <= n; ++i) {
      double best = inf;
      for (std::size_t m = i + 1; m + (j - 1) <= n; ++m) {
        const double c = cost(i, m) + tail[j - 1][m];
        if (c < best) best = c;
      }
      tail[j][i] = best;
    }
  }

  std::vector<std::size_t> boundaries{0};
  std::size_t i = 0;
  for (std::size_t j = k; j >= 1; --j) {
    const double target = tail[j][i];
    const double slack = 1e-12 * (1.0 + target);
    std::size_t chosen = n;
    for (std::size_t m = i + 1; m + (j - 1) <= n; ++m) {
      if (cost(i, m) + tail[j - 1][m] <= target + slack) {
        chosen = m;
        break;
      }
    }
    boundaries.push_back(chosen);
    i = chosen;
  }
  return segmentation_from_boundaries(points, std::move(boundaries));
}

// Index of the segment whose mean is most cosine-similar to `query`; earliest
// segment wins ties. Zero-mean segments score -inf.
inline std::size_t select_best_segment(const SegmentationResult& result,
                                       std::span<const Vector> frame_embeddings,
                                       const Vector& query) {
  if (result.segment_count() == 0) throw DomainError("select_best_segment: empty segmentation");
  if (result.boundaries.back() != frame_embeddings.size())
    throw DomainError("select_best_segment: segmentation does not match frame count");
  std::size_t best_index = 0;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < result.segment_count(); ++s) {
    const std::size_t b = result.boundaries[s], e = result.boundaries[s + 1];
    const Vector m = mean_of(frame_embeddings.subspan(b, e - b));
    if (m.dim() != query.dim()) throw DomainError("select_best_segment: dimension mismatch");
    const double score = norm(m) > 0.0 ? cosine_similarity(m, query)
                                       : -std::numeric_limits<double>::infinity();
    if (score > best) {
      best = score;
      best_index = s;
    }
  }
  return best_index;
}

}  // namespace rlvlm
