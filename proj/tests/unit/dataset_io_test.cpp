#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "forge/dataset_io.hpp"
#include "support.hpp"

using namespace forge;

TEST(Rle, Examples) {
  Mask zero(2, 2);
  EXPECT_EQ(rle_encode(zero).counts, (std::vector<std::uint32_t>{4}));
  Mask one(2, 2);
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 2; ++x) one.set(x, y);
  EXPECT_EQ(rle_encode(one).counts, (std::vector<std::uint32_t>{0, 4}));
  Mask tl(2, 2);
  tl.set(0, 0);
  EXPECT_EQ(rle_encode(tl).counts, (std::vector<std::uint32_t>{0, 1, 3}));
  // column-major: (1,0) comes after the whole first column
  Mask tr(2, 2);
  tr.set(1, 0);
  EXPECT_EQ(rle_encode(tr).counts, (std::vector<std::uint32_t>{2, 1, 1}));
  const auto r = rle_encode(tr);
  EXPECT_EQ(r.height, 2);
  EXPECT_EQ(r.width, 2);
  EXPECT_EQ(rle_area(r), 1u);
}

TEST(Rle, RoundTripRandomMasks) {
  std::mt19937_64 gen(17);
  for (int round = 0; round < 200; ++round) {
    const int w = 1 + static_cast<int>(gen() % 120), h = 1 + static_cast<int>(gen() % 120);
    const Mask m = test::random_mask(gen, w, h, (gen() % 100) / 100.0);
    const RleMask r = rle_encode(m);
    ASSERT_EQ(rle_decode(r), m);
    ASSERT_EQ(rle_area(r), m.area());
    std::uint64_t sum = 0;
    for (auto c : r.counts) sum += c;
    ASSERT_EQ(sum, static_cast<std::uint64_t>(w) * h);
    for (std::size_t i = 1; i < r.counts.size(); ++i) ASSERT_GT(r.counts[i], 0u);
    ASSERT_EQ(coco_counts_from_string(coco_counts_to_string(r.counts)), r.counts);
  }
}

TEST(Rle, DecodeErrors) {
  EXPECT_THROW(rle_decode({2, 2, {1, 1}}), InputError);
  EXPECT_THROW(coco_counts_from_string("~"), InputError);
  EXPECT_EQ(coco_counts_to_string({0, 1, 3}), "013");
  EXPECT_EQ(coco_counts_to_string({5, 2, 10, 3}), "52:1");
  EXPECT_EQ(coco_counts_from_string("52:1"), (std::vector<std::uint32_t>{5, 2, 10, 3}));
}

namespace {

DatasetManifest small_manifest(int n_images) {
  DatasetManifest m;
  for (int i = 0; i < n_images; ++i) {
    const std::string id = "img" + std::to_string(i);
    m.images.push_back({id, "images/" + id + ".png", i % 3 == 0 ? "test" : "train", "dior", "src" + std::to_string(i / 2), {}});
    Mask mask(8, 6);
    mask.set(i % 8, i % 6);
    const std::string t = id + "_i1";
    m.targets.push_back({t, id, TargetKind::Instance, "plane", rle_encode(mask), mask.bbox(), {}});
    m.expressions.push_back({t + "_r0", "the plane " + std::to_string(i), t, ExpressionSource::Rule, std::nullopt});
    m.expressions.push_back({t + "_l0", "a plane " + std::to_string(i), t, ExpressionSource::LlmLanguage, t + "_r0"});
  }
  m.images[1].filter = {FilterKind::SepiaNoise, 42, "images/img1_sepia.png"};
  return m;
}

}  // namespace

TEST(Manifest, RoundTripAndSharding) {
  const auto dir = test::scratch_dir("manifest");
  const auto m = small_manifest(7);
  write_manifest(dir, m, 3);
  EXPECT_TRUE(std::filesystem::exists(dir / "manifest-00000.json"));
  EXPECT_TRUE(std::filesystem::exists(dir / "manifest-00002.json"));
  EXPECT_FALSE(std::filesystem::exists(dir / "manifest-00003.json"));
  EXPECT_FALSE(std::filesystem::exists(dir / "manifest.json.tmp"));
  const auto back = read_manifest(dir);
  EXPECT_EQ(back, m);
  EXPECT_EQ(read_manifest(dir / "manifest.json"), m);

  // a single shard file is also a valid manifest
  const auto first = read_manifest(dir / "manifest-00000.json");
  EXPECT_EQ(first.images.size(), 3u);
  EXPECT_EQ(first.targets.size(), 3u);
  EXPECT_EQ(first.expressions.size(), 6u);

  write_manifest(dir / "one", m);
  EXPECT_EQ(read_manifest(dir / "one"), m);
  EXPECT_THROW(write_manifest(dir / "zero", m, 0), ConfigError);
}

TEST(Manifest, ReadErrors) {
  const auto dir = test::scratch_dir("manifest-bad");
  EXPECT_THROW(read_manifest(dir / "nope.json"), InputError);
  std::ofstream(dir / "broken.json") << "{not json";
  EXPECT_THROW(read_manifest(dir / "broken.json"), InputError);
  std::ofstream(dir / "index.json") << R"({"schema_version":1,"shards":["missing.json"]})";
  EXPECT_THROW(read_manifest(dir / "index.json"), InputError);
}

TEST(Manifest, Integrity) {
  EXPECT_NO_THROW(validate_integrity(small_manifest(4)));
  auto m = small_manifest(4);
  m.targets[0].image_id = "ghost";
  EXPECT_THROW(validate_integrity(m), IntegrityError);
  m = small_manifest(4);
  m.expressions[0].target_id = "ghost";
  EXPECT_THROW(validate_integrity(m), IntegrityError);
  m = small_manifest(4);
  m.images.push_back(m.images[0]);
  EXPECT_THROW(validate_integrity(m), IntegrityError);
  m = small_manifest(4);
  m.images[0].split = "val";
  EXPECT_THROW(validate_integrity(m), IntegrityError);
  m = small_manifest(4);
  std::erase_if(m.expressions, [](const Expression& e) { return e.target_id == "img2_i1"; });
  EXPECT_THROW(validate_integrity(m), IntegrityError);
  m = small_manifest(4);
  m.expressions[1].text.clear();
  EXPECT_THROW(validate_integrity(m), IntegrityError);
  m = small_manifest(4);
  m.expressions[1].id = m.expressions[0].id;
  EXPECT_THROW(validate_integrity(m), IntegrityError);
}

TEST(Splits, PerSourceAndSeeded) {
  std::vector<std::string> sources;
  for (int i = 0; i < 200; ++i) sources.push_back("s" + std::to_string(i));
  sources.push_back("s5");  // duplicates collapse
  const auto a = assign_splits(sources, 0.265, 7);
  EXPECT_EQ(a.size(), 200u);
  const auto n_test = std::count_if(a.begin(), a.end(), [](const auto& kv) { return kv.second == "test"; });
  EXPECT_EQ(n_test, 53);
  EXPECT_EQ(assign_splits(sources, 0.265, 7), a);
  EXPECT_NE(assign_splits(sources, 0.265, 8), a);
  EXPECT_THROW(assign_splits(sources, 0.0, 1), ConfigError);
  EXPECT_THROW(assign_splits(sources, 1.0, 1), ConfigError);
}

// Expression-level test share over many sources of varying size. The reference
// dataset puts 404,729 of 1,522,523 expressions in test.
TEST(Splits, ExpressionShareTracksReference) {
  const double reference = 404729.0 / 1522523.0;
  for (std::uint64_t seed : {0u, 1u, 2u, 3u, 4u}) {
    std::mt19937_64 gen(100 + seed);
    std::vector<std::string> sources;
    std::map<std::string, std::size_t> exprs;
    for (int i = 0; i < 400; ++i) {
      const auto id = "src" + std::to_string(i);
      sources.push_back(id);
      exprs[id] = 1 + gen() % 40;
    }
    const auto splits = assign_splits(sources, 0.265, seed);
    std::size_t test = 0, total = 0;
    for (const auto& [id, n] : exprs) {
      total += n;
      if (splits.at(id) == "test") test += n;
    }
    EXPECT_NEAR(static_cast<double>(test) / total, reference, 0.03) << "seed " << seed;
  }
}

TEST(Stats, CountsAndDoubleEntry) {
  auto m = small_manifest(6);
  // one semantic target with a visual variation
  Mask mask(8, 6);
  mask.set(1, 1);
  m.targets.push_back({"img0_s6", "img0", TargetKind::SemanticRegion, "forest", rle_encode(mask), mask.bbox(), {}});
  m.expressions.push_back({"img0_s6_v0", "the dense forest", "img0_s6", ExpressionSource::LlmVisual, std::nullopt});
  const auto s = compute_stats(m);
  EXPECT_EQ(s.images, 6u);
  EXPECT_EQ(s.targets, 7u);
  EXPECT_EQ(s.by_source.at(ExpressionSource::Rule).total(), 6u);
  EXPECT_EQ(s.by_source.at(ExpressionSource::LlmLanguage).total(), 6u);
  EXPECT_EQ(s.by_source.at(ExpressionSource::LlmVisual).total(), 1u);
  EXPECT_EQ(s.semantic_level.total(), 1u);
  EXPECT_EQ(s.instance_level.total(), 12u);
  EXPECT_EQ(s.total.total(), 13u);
  // img0 and img3 are test images
  EXPECT_EQ(s.total.test, 5u);
  EXPECT_EQ(s.total.train, 8u);
  EXPECT_TRUE(double_entry_holds(s));
  EXPECT_EQ(s.targets_by_kind.at("semantic_region"), 1u);
  EXPECT_EQ(s.word_frequencies.front().first, "plane");

  const auto j = stats_to_json(s);
  EXPECT_TRUE(j.at("double_entry_ok").get<bool>());
  const auto text = stats_to_text(s);
  EXPECT_NE(text.find("Rule-Based Expressions"), std::string::npos);
  EXPECT_NE(text.find("Total Expressions"), std::string::npos);

  auto bad = s;
  bad.total.train += 1;
  EXPECT_FALSE(double_entry_holds(bad));
}

TEST(Stats, DoubleEntryHoldsOnRandomManifests) {
  std::mt19937_64 gen(2);
  for (int round = 0; round < 50; ++round) {
    DatasetManifest m;
    const int n = 1 + static_cast<int>(gen() % 6);
    for (int i = 0; i < n; ++i)
      m.images.push_back({"i" + std::to_string(i), "f", gen() % 2 ? "train" : "test", "d", "s", {}});
    Mask mask(4, 4);
    mask.set(0, 0);
    int k = 0;
    for (int i = 0; i < n; ++i)
      for (int t = 0; t < 3; ++t) {
        const std::string id = "i" + std::to_string(i) + "_t" + std::to_string(t);
        const auto kind = static_cast<TargetKind>(gen() % 4);
        m.targets.push_back({id, "i" + std::to_string(i), kind, "c", rle_encode(mask), mask.bbox(), {}});
        const int n_expr = 1 + static_cast<int>(gen() % 4);
        for (int e = 0; e < n_expr; ++e)
          m.expressions.push_back({"e" + std::to_string(k++), "x", id, static_cast<ExpressionSource>(gen() % 3), std::nullopt});
      }
    const auto s = compute_stats(m);
    ASSERT_TRUE(double_entry_holds(s));
    ASSERT_EQ(s.total.total(), m.expressions.size());
  }
}

TEST(Stats, ReferenceTotalsAddUp) {
  // rule + language + visual, and instance-level + semantic-level
  EXPECT_TRUE(double_entry_holds(506194, 496895, 519434, 1278453, 244070, 1522523));
  EXPECT_FALSE(double_entry_holds(506194, 496895, 519434, 1278453, 244071, 1522523));
}

TEST(Stats, WordsOf) {
  EXPECT_EQ(words_of("The top-right plane, 2 of them!"),
            (std::vector<std::string>{"the", "top-right", "plane", "of", "them"}));
}
