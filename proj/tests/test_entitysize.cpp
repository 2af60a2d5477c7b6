#include <gtest/gtest.h>

#include "oracles.hpp"
#include "rlvlm/corpus.hpp"
#include "rlvlm/entitysize.hpp"

using namespace rlvlm;

namespace {

Mask mask_from(std::vector<std::string> rows) {
  Mask m(rows.size(), rows[0].size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) m.set(r, c, rows[r][c] == '#');
  return m;
}

}  // namespace

TEST(FilterHeatmap, AllBelowThresholdIsEmpty) {
  PatchHeatmap hm(3, 4, {"cow", "pig"});
  for (double& s : hm.scores) s = 0.2;
  hm.at(1, 1, 0) = 0.29;
  EXPECT_TRUE(filter_heatmap(hm, 0).empty());
}

TEST(FilterHeatmap, SingleKeywordFullMask) {
  PatchHeatmap hm(3, 5, {"cow"});
  for (double& s : hm.scores) s = 0.5;
  EXPECT_EQ(filter_heatmap(hm, 0, 0.295).count(), 15u);
}

TEST(FilterHeatmap, DominantBlock) {
  PatchHeatmap hm(4, 4, {"cow", "pig"});
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 4; ++c) {
      hm.at(r, c, 0) = 0.4;
      hm.at(r, c, 1) = 0.5;
    }
  for (std::size_t r = 1; r < 3; ++r)
    for (std::size_t c = 2; c < 4; ++c) hm.at(r, c, 0) = 0.6;
  const Mask m = filter_heatmap(hm, 0);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(m.at(r, c), r >= 1 && r < 3 && c >= 2) << r << "," << c;
}

TEST(FilterHeatmap, TieOnArgmaxExcludesCell) {
  PatchHeatmap hm(1, 2, {"cow", "pig"});
  hm.at(0, 0, 0) = hm.at(0, 0, 1) = 0.5;
  hm.at(0, 1, 0) = 0.295;
  hm.at(0, 1, 1) = 0.1;
  const Mask m = filter_heatmap(hm, 0, 0.295);
  EXPECT_FALSE(m.at(0, 0));
  EXPECT_TRUE(m.at(0, 1));
}

TEST(FilterHeatmap, BadKeyIndex) {
  PatchHeatmap hm(2, 2, {"cow"});
  EXPECT_THROW(filter_heatmap(hm, 1), DomainError);
}

TEST(FilterHeatmap, MonotoneInThreshold) {
  Rng rng(2);
  for (int t = 0; t < 50; ++t) {
    const PatchHeatmap hm = oracle::random_heatmap(rng, 10, 16, 3);
    const double lo = rng.uniform(0, 0.5), hi = lo + rng.uniform(0, 0.3);
    const Mask a = filter_heatmap(hm, 0, lo), b = filter_heatmap(hm, 0, hi);
    for (std::size_t i = 0; i < a.bits.size(); ++i) EXPECT_LE(b.bits[i], a.bits[i]);
  }
}

TEST(PatchHeatmap, ValidatesScores) {
  PatchHeatmap hm(2, 2, {"cow"});
  hm.scores[0] = 1.5;
  EXPECT_THROW(hm.validate(), DomainError);
  EXPECT_THROW(PatchHeatmap(0, 2, {"cow"}), DomainError);
  EXPECT_THROW(PatchHeatmap(2, 2, {}), DomainError);
}

TEST(MaxConnectedRegion, Examples) {
  EXPECT_TRUE(max_connected_region(Mask(3, 3)).empty());
  const Mask m = mask_from({"##...",
                            "#...#",
                            "....#",
                            "..###"});
  EXPECT_EQ(max_connected_region(m), mask_from({".....",
                                                "....#",
                                                "....#",
                                                "..###"}));
}

TEST(MaxConnectedRegion, DiagonalIsNotConnected) {
  const Mask m = mask_from({"#.", ".#"});
  EXPECT_EQ(max_connected_region(m), mask_from({"#.", ".."}));
}

TEST(MaxConnectedRegion, TieGoesToEarliestComponent) {
  const Mask m = mask_from({"...##", "##...", "....."});
  EXPECT_EQ(max_connected_region(m), mask_from({"...##", ".....", "....."}));
}

TEST(MaxConnectedRegion, MatchesFloodFillOracle) {
  Rng rng(50);
  for (int t = 0; t < 50; ++t) {
    Mask m(10, 16);
    const double p = rng.uniform(0.2, 0.7);
    for (auto& b : m.bits) b = rng.bernoulli(p);
    const Mask got = max_connected_region(m);
    EXPECT_EQ(got, oracle::flood_fill_largest(m)) << "mask " << t;
    for (std::size_t i = 0; i < m.bits.size(); ++i) EXPECT_LE(got.bits[i], m.bits[i]);
    // Output is a single component.
    EXPECT_EQ(max_connected_region(got), got);
  }
}

TEST(BoundingBox, Examples) {
  Mask one(5, 6);
  one.set(2, 3);
  const auto b = bounding_box(one);
  ASSERT_TRUE(b);
  EXPECT_EQ(b->row_min, 2u);
  EXPECT_EQ(b->row_max, 2u);
  EXPECT_EQ(b->col_min, 3u);
  EXPECT_EQ(b->col_max, 3u);
  EXPECT_EQ(b->area(), 1u);

  Mask full(4, 7);
  for (auto& x : full.bits) x = 1;
  EXPECT_EQ(bounding_box(full)->area(), 28u);
  EXPECT_DOUBLE_EQ(bounding_box(full)->normalized_area(), 1.0);

  const auto l = bounding_box(mask_from({"#.", "##"}));
  EXPECT_EQ(l->row_min, 0u);
  EXPECT_EQ(l->row_max, 1u);
  EXPECT_EQ(l->col_min, 0u);
  EXPECT_EQ(l->col_max, 1u);
  EXPECT_EQ(l->area(), 4u);

  EXPECT_FALSE(bounding_box(Mask(3, 3)));
}

TEST(BoundingBox, AreaBoundsCellCount) {
  Rng rng(7);
  for (int t = 0; t < 100; ++t) {
    Mask m(6, 6);
    for (auto& b : m.bits) b = rng.bernoulli(0.5);
    const Mask region = max_connected_region(m);
    const auto box = bounding_box(region);
    if (!box) continue;
    EXPECT_GE(box->area(), region.count());
    bool full = true;
    for (std::size_t r = box->row_min; r <= box->row_max; ++r)
      for (std::size_t c = box->col_min; c <= box->col_max; ++c) full = full && region.at(r, c);
    EXPECT_EQ(full, box->area() == region.count());
  }
}

TEST(EntitySize, MirrorInvariant) {
  Rng rng(13);
  for (int t = 0; t < 100; ++t) {
    const PatchHeatmap hm = oracle::random_heatmap(rng, 10, 16, 2);
    PatchHeatmap mirrored = hm;
    for (std::size_t r = 0; r < 10; ++r)
      for (std::size_t c = 0; c < 16; ++c)
        for (std::size_t k = 0; k < 2; ++k) mirrored.at(r, c, k) = hm.at(r, 15 - c, k);
    // a tie for largest component resolves by position, which mirroring moves
    const Mask cells = filter_heatmap(hm, 0);
    Mask rest = cells;
    const Mask first = oracle::flood_fill_largest(cells);
    for (std::size_t p = 0; p < rest.bits.size(); ++p) rest.bits[p] &= !first.bits[p];
    if (first.count() > 0 && oracle::flood_fill_largest(rest).count() == first.count()) continue;
    const auto a = bounding_box(max_connected_region(cells));
    const auto b = bounding_box(max_connected_region(filter_heatmap(mirrored, 0)));
    ASSERT_EQ(a.has_value(), b.has_value());
    if (!a) continue;
    EXPECT_EQ(a->area(), b->area());
    EXPECT_EQ(a->row_min, b->row_min);
    EXPECT_EQ(a->col_min, 15 - b->col_max);
  }
}

TEST(ClipLocalCorrelation, Examples) {
  EXPECT_EQ(clip_local_correlation(std::vector<double>{}), 0.0);
  EXPECT_NEAR(clip_local_correlation(std::vector<double>{0.1, 0.2, 0.3}), 0.6, 1e-15);
  EXPECT_THROW(clip_local_correlation(std::vector<double>{0.1, -0.2}), DomainError);
}

TEST(ClipLocalCorrelation, SyntheticScenesMatchGroundTruth) {
  CorpusConfig cfg;
  cfg.pipeline.candidate_count = 200;
  cfg.pipeline.test_count = 0;
  const Corpus c = generate_synthetic_corpus(cfg, 3);
  const double cell = 1.0 / static_cast<double>(cfg.grid_height * cfg.grid_width);
  std::size_t frames = 0;
  for (const ClipRecord& r : c.train) {
    const RecordOracle& o = c.oracle[r.id];
    ASSERT_EQ(o.true_sizes.size(), 16u);
    double truth = 0.0;
    for (std::size_t i = 0; i < 16; ++i) {
      EXPECT_LE(std::abs(r.frame_sizes[i] - o.true_sizes[i]), 2 * cell + 1e-12) << "record " << r.id << " frame " << i;
      truth += o.true_sizes[i];
      ++frames;
    }
    EXPECT_DOUBLE_EQ(r.local_score, clip_local_correlation(r.frame_sizes));
    EXPECT_LE(std::abs(r.local_score - truth), 16 * 2 * cell + 1e-12);
  }
  EXPECT_EQ(frames, 200u * 16u);
}
