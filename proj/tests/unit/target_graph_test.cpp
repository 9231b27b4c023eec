#include <gtest/gtest.h>

#include <random>

#include "forge/target_graph.hpp"
#include "support.hpp"

using namespace forge;
using test::box_mask;

namespace {

Tile tile_with(std::vector<Instance> insts, int size = 480) {
  Tile t;
  t.id = "t_0_0";
  t.pixels = Image8(size, size, 3, 100);
  t.instances = std::move(insts);
  return t;
}

std::size_t count_kind(const std::vector<Target>& ts, TargetKind k) {
  return static_cast<std::size_t>(std::count_if(ts.begin(), ts.end(), [&](const Target& t) { return t.kind == k; }));
}

}  // namespace

TEST(EdgeDistance, Examples) {
  Mask a(20, 20), b(20, 20);
  a.set(0, 0);
  b.set(3, 4);
  EXPECT_DOUBLE_EQ(edge_distance(a, b), 5.0);
  EXPECT_DOUBLE_EQ(edge_distance(box_mask(40, 40, 0, 0, 9, 9), box_mask(40, 40, 5, 5, 15, 15)), 0.0);
  // 10x10 boxes with a 5 px gap between their facing edges
  EXPECT_DOUBLE_EQ(edge_distance(box_mask(40, 20, 0, 0, 9, 9), box_mask(40, 20, 14, 0, 23, 9)), 5.0);
  // side by side without sharing a pixel
  EXPECT_DOUBLE_EQ(edge_distance(box_mask(40, 20, 0, 0, 9, 9), box_mask(40, 20, 10, 0, 19, 9)), 1.0);
  EXPECT_THROW(edge_distance(a, Mask(20, 20)), InputError);
  EXPECT_THROW(edge_distance(a, box_mask(10, 10, 0, 0, 1, 1)), InputError);
}

TEST(EdgeDistance, MatchesBruteForceOverAllPixelPairs) {
  std::mt19937_64 gen(5);
  int checked = 0;
  for (int round = 0; round < 300; ++round) {
    const Mask a = test::random_mask(gen, 32, 24, 0.04 + 0.02 * (round % 5));
    const Mask b = test::random_mask(gen, 32, 24, 0.03);
    if (a.none() || b.none()) continue;
    ASSERT_NEAR(edge_distance(a, b), test::brute_edge_distance(a, b), 1e-12) << round;
    ++checked;
  }
  EXPECT_GT(checked, 250);
}

TEST(Dbscan, MatchesDensityReachabilityOracle) {
  std::mt19937_64 gen(9);
  std::uniform_real_distribution<double> coord(0.0, 100.0);
  for (int round = 0; round < 500; ++round) {
    const std::size_t n = 1 + gen() % 12;
    const std::size_t min_pts = 2 + gen() % 3;
    const double eps = 20.0;
    std::vector<std::pair<double, double>> pts(n);
    for (auto& p : pts) p = {coord(gen), coord(gen)};
    std::vector<std::vector<double>> dist(n, std::vector<double>(n));
    std::vector<std::vector<bool>> adj(n, std::vector<bool>(n));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        dist[i][j] = std::hypot(pts[i].first - pts[j].first, pts[i].second - pts[j].second);
        adj[i][j] = i != j && dist[i][j] <= eps;
      }
    // border points reachable from several clusters belong to the earliest one
    auto want = test::oracle_clusters_with_border(dist, eps, min_pts);
    std::set<std::size_t> taken;
    for (auto& c : want) {
      std::set<std::size_t> kept;
      for (auto p : c)
        if (taken.insert(p).second) kept.insert(p);
      c = kept;
    }
    const auto labels = dbscan(adj, min_pts);
    std::map<int, std::set<std::size_t>> got_map;
    for (std::size_t i = 0; i < n; ++i)
      if (labels[i] != kNoise) got_map[labels[i]].insert(i);
    std::vector<std::set<std::size_t>> got;
    for (auto& [_, c] : got_map) got.push_back(c);
    ASSERT_EQ(got, want) << "round " << round;
  }
}

TEST(BuildTargets, ThreeCloseBoxesFormOneCluster) {
  const int s = 480;
  auto tile = tile_with({{"1", "plane", box_mask(s, s, 100, 100, 109, 109)},
                         {"2", "plane", box_mask(s, s, 114, 100, 123, 109)},
                         {"3", "plane", box_mask(s, s, 128, 100, 137, 109)}});
  TargetOptions opt;
  opt.eps = 20;
  const auto ts = build_targets(tile, opt);
  ASSERT_EQ(ts.size(), 5u);
  EXPECT_EQ(count_kind(ts, TargetKind::Instance), 3u);
  EXPECT_EQ(count_kind(ts, TargetKind::Cluster), 1u);
  EXPECT_EQ(count_kind(ts, TargetKind::ClassGroup), 1u);
  EXPECT_EQ(ts[0].id, "t_0_0_i1");
  EXPECT_EQ(ts[3].id, "t_0_0_c0");
  EXPECT_EQ(ts[3].members, (std::vector<std::string>{"t_0_0_i1", "t_0_0_i2", "t_0_0_i3"}));
  EXPECT_EQ(ts[3].mask.area(), 300u);
  EXPECT_EQ(ts[4].id, "t_0_0_g0");
}

TEST(BuildTargets, SingleInstanceHasNoGroups) {
  const auto ts = build_targets(tile_with({{"1", "ship", box_mask(480, 480, 10, 10, 20, 20)}}));
  ASSERT_EQ(ts.size(), 1u);
  EXPECT_EQ(ts[0].kind, TargetKind::Instance);
}

TEST(BuildTargets, NineMemberClusterDiscarded) {
  std::vector<Instance> insts;
  for (int k = 0; k < 9; ++k) {
    const int x = 50 + (k % 3) * 20, y = 50 + (k / 3) * 20;
    insts.push_back({std::to_string(k), "vehicle", box_mask(480, 480, x, y, x + 9, y + 9)});
  }
  const auto ts = build_targets(tile_with(insts));
  EXPECT_EQ(count_kind(ts, TargetKind::Cluster), 0u);
  EXPECT_EQ(count_kind(ts, TargetKind::ClassGroup), 1u);
  insts.pop_back();
  EXPECT_EQ(count_kind(build_targets(tile_with(insts)), TargetKind::Cluster), 1u);
}

TEST(BuildTargets, SemanticRegionsSkipPromotedAndIgnored) {
  Tile t = tile_with({});
  LabelRaster lab(480, 480, 1, 6);
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 480; ++x) lab.at(x, y) = 1;
  for (int y = 100; y < 140; ++y)
    for (int x = 100; x < 140; ++x) lab.at(x, y) = 2;
  t.labels = lab;
  t.legend = {{1, "background"}, {2, "building"}, {6, "forest"}, {7, "agriculture"}};
  const auto ts = build_targets(t);
  ASSERT_EQ(ts.size(), 1u);
  EXPECT_EQ(ts[0].id, "t_0_0_s6");
  EXPECT_EQ(ts[0].kind, TargetKind::SemanticRegion);
  EXPECT_EQ(ts[0].category, "forest");
}

TEST(Cues, GridPosition) {
  auto at = [](int cx, int cy) { return BBox{cx, cy, cx, cy}; };
  EXPECT_EQ(grid_position(at(79, 79)), GridCell::TopLeft);
  EXPECT_EQ(grid_position(at(240, 240)), GridCell::Center);
  EXPECT_EQ(grid_position(at(470, 10)), GridCell::TopRight);
  EXPECT_EQ(grid_position(at(159, 479)), GridCell::BottomLeft);
  EXPECT_EQ(grid_position(at(160, 320)), GridCell::BottomCenter);
  EXPECT_EQ(to_string(GridCell::CenterRight), "center-right");
}

TEST(Cues, ExtremeFlags) {
  auto box = [](int cx, int cy) { return BBox{cx - 5, cy - 5, cx + 5, cy + 5}; };
  auto f = extreme_flags({box(100, 100), box(300, 300)});
  EXPECT_EQ(f[0], (std::vector<Extreme>{Extreme::Topmost, Extreme::Leftmost}));
  EXPECT_EQ(f[1], (std::vector<Extreme>{Extreme::Bottommost, Extreme::Rightmost}));
  EXPECT_TRUE(extreme_flags({box(10, 10)})[0].empty());
  f = extreme_flags({box(100, 50), box(300, 50)});
  EXPECT_EQ(f[0], (std::vector<Extreme>{Extreme::Leftmost}));
  EXPECT_EQ(f[1], (std::vector<Extreme>{Extreme::Rightmost}));
}

TEST(Cues, ColorClassify) {
  Image8 img(20, 10, 3);
  auto fill = [&](int x0, int x1, std::array<std::uint8_t, 3> c) {
    for (int y = 0; y < 10; ++y)
      for (int x = x0; x < x1; ++x)
        for (int k = 0; k < 3; ++k) img.at(x, y, k) = c[k];
  };
  const Mask all = box_mask(20, 10, 0, 0, 19, 9);
  fill(0, 20, {255, 0, 0});
  EXPECT_EQ(color_classify(img, all, "car"), "red");
  fill(0, 20, {240, 240, 235});
  EXPECT_EQ(color_classify(img, all, "car"), "light");
  fill(0, 20, {20, 20, 30});
  EXPECT_EQ(color_classify(img, all, "car"), "dark");
  fill(0, 10, {255, 0, 0});
  fill(10, 20, {0, 0, 255});
  EXPECT_EQ(color_classify(img, all, "car"), std::nullopt);
  // 12 of 20 columns blue is exactly 60% of the chromatic pixels
  fill(0, 8, {255, 0, 0});
  fill(8, 20, {0, 0, 255});
  EXPECT_EQ(color_classify(img, all, "car"), "blue");
  EXPECT_EQ(color_classify(img, Mask(20, 10), "car"), std::nullopt);
}

TEST(Cues, RgbToHsvPrimaries) {
  EXPECT_DOUBLE_EQ(rgb_to_hsv(0, 255, 0).h, 120.0);
  EXPECT_DOUBLE_EQ(rgb_to_hsv(0, 0, 255).h, 240.0);
  EXPECT_DOUBLE_EQ(rgb_to_hsv(255, 255, 0).h, 60.0);
  EXPECT_DOUBLE_EQ(rgb_to_hsv(128, 128, 128).s, 0.0);
  EXPECT_EQ(hue_name(350), "red");
  EXPECT_EQ(hue_name(30), "orange");
  EXPECT_EQ(hue_name(200), "blue");
  EXPECT_EQ(hue_name(300), "purple");
}

TEST(Cues, Directions) {
  EXPECT_EQ(direction_of(100, 0), Direction::Right);
  EXPECT_EQ(direction_of(70, -70), Direction::TopRight);
  EXPECT_EQ(direction_of(0, -5), Direction::Top);
  EXPECT_EQ(direction_of(-1, 1), Direction::BottomLeft);
  EXPECT_EQ(direction_of(0, 9), Direction::Bottom);
  EXPECT_EQ(direction_of(3, 3), Direction::BottomRight);
  // every angle maps to the sector whose center is nearest
  for (int deg = 0; deg < 360; ++deg) {
    if (deg % 45 == 22 || deg % 45 == 23) continue;
    const double a = deg * std::numbers::pi / 180.0;
    const int want = static_cast<int>(std::lround(deg / 45.0)) % 8;
    ASSERT_EQ(static_cast<int>(direction_of(std::cos(a), -std::sin(a))), want) << deg;
  }

  auto target = [](std::string id, int cx, int cy) {
    Target t;
    t.id = std::move(id);
    t.category = "plane";
    t.bbox = {cx - 2, cy - 2, cx + 2, cy + 2};
    return t;
  };
  const Target s = target("s", 200, 100), n1 = target("a", 100, 100), far = target("b", 200, 400);
  const auto rel = directional_relations(s, {&s, &n1, &far}, 200);
  ASSERT_EQ(rel.size(), 1u);
  EXPECT_EQ(rel[0].direction, Direction::Right);
  EXPECT_EQ(rel[0].neighbor_id, "a");
  const auto diag = directional_relations(target("s", 170, 30), {&n1}, 200);
  EXPECT_EQ(diag[0].direction, Direction::TopRight);
}

TEST(Cues, ExtractCuesMergesRepeatedRelations) {
  auto tile = tile_with({{"1", "plane", box_mask(480, 480, 400, 20, 420, 40)},
                         {"2", "ship", box_mask(480, 480, 300, 100, 310, 110)},
                         {"3", "ship", box_mask(480, 480, 280, 120, 290, 130)}});
  const auto ts = build_targets(tile);
  const auto cues = extract_cues(tile, ts);
  ASSERT_EQ(cues.size(), ts.size());
  EXPECT_EQ(cues[0].grid_cell, GridCell::TopRight);
  // the plane is to the top-right of both ships; one relation survives
  ASSERT_EQ(cues[0].relations.size(), 1u);
  EXPECT_EQ(cues[0].relations[0].direction, Direction::TopRight);
  EXPECT_EQ(cues[0].relations[0].neighbor_id, "t_0_0_i2");
  EXPECT_TRUE(cues[0].extremes.empty());
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (ts[i].kind == TargetKind::Instance) continue;
    EXPECT_TRUE(cues[i].relations.empty());
    EXPECT_TRUE(cues[i].extremes.empty());
    EXPECT_FALSE(cues[i].color);
  }
}
