#include <gtest/gtest.h>

#include <random>

#include "forge/ingest_tiling.hpp"
#include "support.hpp"

using namespace forge;

namespace {

SourceImage instance_source(int w, int h) {
  SourceImage s;
  s.id = "src";
  s.dataset = "dior";
  s.pixels = Image8(w, h, 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) s.pixels.at(x, y, c) = static_cast<std::uint8_t>((x + 2 * y + c) % 256);
  return s;
}

}  // namespace

TEST(WindowOffsets, Examples) {
  EXPECT_EQ(window_offsets(1024, 480, 384), (std::vector<int>{0, 384, 544}));
  EXPECT_EQ(window_offsets(480, 480, 384), (std::vector<int>{0}));
  EXPECT_EQ(window_offsets(800, 480, 384), (std::vector<int>{0, 320}));
  EXPECT_EQ(window_offsets(300, 480, 384), (std::vector<int>{0}));
  EXPECT_THROW(window_offsets(100, 0, 10), InputError);
}

TEST(WindowOffsets, CoverAxis) {
  for (int d = 480; d <= 3000; d += 7) {
    const auto offs = window_offsets(d, 480, 384);
    ASSERT_EQ(offs.front(), 0);
    ASSERT_EQ(offs.back() + 480, d) << d;
    for (std::size_t i = 1; i < offs.size(); ++i) {
      ASSERT_GT(offs[i], offs[i - 1]);
      ASSERT_LE(offs[i] - offs[i - 1], 384);
    }
  }
}

TEST(TileInstanceImage, GridOfTilesAndIds) {
  auto s = instance_source(1024, 1024);
  // one object in each region so every window is kept
  for (int k = 0; k < 9; ++k) {
    const int x = 100 + (k % 3) * 380, y = 100 + (k / 3) * 380;
    s.instances.push_back({std::to_string(k), "plane", test::box_mask(1024, 1024, x, y, x + 9, y + 9)});
  }
  const auto tiles = tile_instance_image(s);
  ASSERT_EQ(tiles.size(), 9u);
  std::set<std::string> ids;
  for (const auto& t : tiles) {
    ids.insert(t.id);
    EXPECT_EQ(t.pixels.width(), 480);
    EXPECT_EQ(t.pixels.height(), 480);
    EXPECT_EQ(t.pixels.at(0, 0, 1), s.pixels.at(t.origin_x, t.origin_y, 1));
    for (const auto& inst : t.instances) EXPECT_EQ(inst.mask.width(), 480);
  }
  EXPECT_TRUE(ids.contains("src_544_384"));
  EXPECT_TRUE(ids.contains("src_0_0"));
}

TEST(TileInstanceImage, ClipRuleKeepsTwentyPercent) {
  auto s = instance_source(800, 480);
  // windows at x=0 and x=320; 20 of 100 columns fall inside the first
  s.instances.push_back({"a", "ship", test::box_mask(800, 480, 460, 10, 559, 19)});
  // exactly 19 columns inside the 0-window: 19% < 20%, dropped there
  s.instances.push_back({"b", "ship", test::box_mask(800, 480, 461, 100, 560, 109)});
  const auto tiles = tile_instance_image(s);
  ASSERT_EQ(tiles.size(), 2u);
  const Tile& left = tiles[0];
  EXPECT_EQ(left.id, "src_0_0");
  ASSERT_EQ(left.instances.size(), 1u);
  EXPECT_EQ(left.instances[0].id, "a");
  EXPECT_EQ(left.instances[0].mask.area(), 200u);
  EXPECT_EQ(tiles[1].instances.size(), 2u);
}

TEST(TileInstanceImage, DropsEmptyWindowsAndPadsSmallSources) {
  auto s = instance_source(300, 200);
  s.instances.push_back({"a", "ship", test::box_mask(300, 200, 10, 10, 30, 30)});
  const auto tiles = tile_instance_image(s);
  ASSERT_EQ(tiles.size(), 1u);
  const Tile& t = tiles[0];
  EXPECT_EQ(t.pixels.width(), 480);
  // reflect padding: column 300 mirrors 298
  EXPECT_EQ(t.pixels.at(300, 5, 0), s.pixels.at(298, 5, 0));
  EXPECT_EQ(t.pixels.at(5, 250, 2), s.pixels.at(5, 148, 2));
  // padded region never becomes annotation
  EXPECT_EQ(t.instances[0].mask.area(), 21u * 21u);

  auto empty = instance_source(600, 600);
  EXPECT_TRUE(tile_instance_image(empty).empty());
}

TEST(TileInstanceImage, RejectsBadInput) {
  auto s = instance_source(500, 500);
  s.instances.push_back({"a", "ship", Mask(400, 400)});
  EXPECT_THROW(tile_instance_image(s), InputError);
  SourceImage gray;
  gray.id = "g";
  gray.pixels = Image8(10, 10, 1);
  EXPECT_THROW(tile_instance_image(gray), InputError);
}

namespace {

SourceImage semantic_source(const LabelRaster& lab, Legend legend) {
  SourceImage s;
  s.id = "sem";
  s.dataset = "loveda";
  s.pixels = Image8(lab.width(), lab.height(), 3, 90);
  s.labels = lab;
  s.legend = std::move(legend);
  return s;
}

}  // namespace

TEST(ResizeSemantic, UniformStaysUniform) {
  const auto t = resize_semantic_image(semantic_source(LabelRaster(1024, 1024, 1, 6), {{6, "forest"}}));
  EXPECT_EQ(t.id, "sem_0_0");
  ASSERT_TRUE(t.labels);
  for (auto v : t.labels->pixels()) ASSERT_EQ(v, 6);
}

TEST(ResizeSemantic, CheckerboardMatchesNearestOracle) {
  LabelRaster lab(1024, 1024, 1);
  for (int y = 0; y < 1024; ++y)
    for (int x = 0; x < 1024; ++x) lab.at(x, y) = ((x / 16 + y / 16) % 2) ? 4 : 6;
  const auto t = resize_semantic_image(semantic_source(lab, {{4, "water"}, {6, "forest"}}));
  std::size_t water = 0;
  for (int y = 0; y < 480; ++y)
    for (int x = 0; x < 480; ++x) {
      // nearest source pixel of the output pixel center
      const int sx = static_cast<int>(std::floor((x + 0.5) * 1024.0 / 480.0));
      const int sy = static_cast<int>(std::floor((y + 0.5) * 1024.0 / 480.0));
      ASSERT_EQ(t.labels->at(x, y), lab.at(sx, sy));
      water += t.labels->at(x, y) == 4;
    }
  const double share = static_cast<double>(water) / (480.0 * 480.0);
  EXPECT_NEAR(share, 0.5, 0.02);
}

TEST(ResizeSemantic, ClassSetClosedAndErrors) {
  std::mt19937_64 gen(3);
  LabelRaster lab(700, 700, 1);
  for (auto& v : lab.data()) v = gen() % 2 ? 4 : 6;
  const auto t = resize_semantic_image(semantic_source(lab, {{4, "water"}, {6, "forest"}}));
  for (auto v : t.labels->pixels()) ASSERT_TRUE(v == 4 || v == 6);

  auto bad = semantic_source(lab, {});
  bad.labels = LabelRaster(10, 10, 1);
  EXPECT_THROW(resize_semantic_image(bad), InputError);
  bad.labels.reset();
  EXPECT_THROW(resize_semantic_image(bad), InputError);
}

TEST(ResizeBilinear, ConstantAndRamp) {
  Image8 c(100, 50, 3, 77);
  const auto r = resize_bilinear(c, 37, 91);
  for (auto v : r.pixels()) ASSERT_EQ(v, 77);
  // 2x downsample of a horizontal ramp averages neighbouring columns
  Image8 ramp(8, 1, 1);
  for (int x = 0; x < 8; ++x) ramp.at(x, 0) = static_cast<std::uint8_t>(10 * x);
  const auto d = resize_bilinear(ramp, 4, 1);
  for (int x = 0; x < 4; ++x) EXPECT_EQ(d.at(x, 0), 20 * x + 5);
}

namespace {

Tile labelled_tile(const LabelRaster& lab) {
  Tile t;
  t.id = "t_0_0";
  t.pixels = Image8(lab.width(), lab.height(), 3);
  t.labels = lab;
  t.legend = {{1, "background"}, {2, "building"}, {4, "water"}, {6, "forest"}};
  return t;
}

}  // namespace

TEST(PseudoInstances, TwoBlobsAndThreshold) {
  LabelRaster lab(100, 100, 1, 1);
  for (int y = 10; y < 30; ++y)
    for (int x = 10; x < 35; ++x) lab.at(x, y) = 2;  // 500 px
  for (int y = 60; y < 80; ++y)
    for (int x = 50; x < 75; ++x) lab.at(x, y) = 2;  // 500 px
  for (int y = 90; y < 92; ++y)
    for (int x = 0; x < 5; ++x) lab.at(x, y) = 2;  // 10 px, below min area
  auto t = labelled_tile(lab);
  const auto ps = extract_pseudo_instances(t);
  ASSERT_EQ(ps.size(), 2u);
  EXPECT_EQ(ps[0].area, 500u);
  EXPECT_EQ(ps[1].area, 500u);
  EXPECT_EQ(ps[0].class_name, "building");

  promote_pseudo_instances(t);
  ASSERT_EQ(t.instances.size(), 2u);
  EXPECT_EQ(t.instances[0].id, "p2-0");
  EXPECT_EQ(t.instances[1].id, "p2-1");

  LabelRaster none(50, 50, 1, 6);
  EXPECT_TRUE(extract_pseudo_instances(labelled_tile(none)).empty());
}

TEST(PseudoInstances, MatchUnionFindOracle) {
  std::mt19937_64 gen(11);
  for (int round = 0; round < 20; ++round) {
    const Mask m = test::random_mask(gen, 60, 45, 0.45);
    LabelRaster lab(60, 45, 1, 6);
    for (int y = 0; y < 45; ++y)
      for (int x = 0; x < 60; ++x)
        if (m.get(x, y)) lab.at(x, y) = 4;
    PseudoInstanceOptions opt;
    opt.min_component_area = 1;
    const auto ps = extract_pseudo_instances(labelled_tile(lab), opt);
    const auto want = test::oracle_components(m, true);
    std::vector<std::set<int>> got;
    for (const auto& p : ps) got.push_back(test::pixel_set(p.mask));
    std::sort(got.begin(), got.end());
    ASSERT_EQ(got, want);

    const auto four = label_components(m, Connectivity::Four);
    std::vector<std::set<int>> got4;
    for (std::size_t k = 0; k < four.count(); ++k)
      got4.push_back(test::pixel_set(four.component(static_cast<std::int32_t>(k + 1))));
    std::sort(got4.begin(), got4.end());
    ASSERT_EQ(got4, test::oracle_components(m, false));
  }
}
