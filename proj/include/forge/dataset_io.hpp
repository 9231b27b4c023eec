#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "forge/error.hpp"
#include "forge/expression_engine.hpp"
#include "forge/historic_filters.hpp"
#include "forge/rle.hpp"
#include "forge/rng.hpp"
#include "forge/target_graph.hpp"

namespace forge {

namespace fs = std::filesystem;

inline constexpr int kManifestSchemaVersion = 1;
inline constexpr std::size_t kImagesPerShard = 10000;

struct FilterProvenance {
  FilterKind kind = FilterKind::None;
  std::uint64_t seed = 0;
  std::string file;  // variant image, empty for FilterKind::None

  friend bool operator==(const FilterProvenance&, const FilterProvenance&) = default;
};

struct ImageRecord {
  std::string id;
  std::string file;
  std::string split;
  std::string source_dataset;
  std::string source_id;
  FilterProvenance filter;

  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

struct TargetRecord {
  std::string id;
  std::string image_id;
  TargetKind kind = TargetKind::Instance;
  std::string category;
  RleMask mask;
  BBox bbox;
  std::vector<std::string> members;

  friend bool operator==(const TargetRecord&, const TargetRecord&) = default;
};

struct DatasetManifest {
  int schema_version = kManifestSchemaVersion;
  std::vector<ImageRecord> images;
  std::vector<TargetRecord> targets;
  std::vector<Expression> expressions;

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

// ---------------------------------------------------------------------------
// JSON mapping

inline void to_json(nlohmann::json& j, const RleMask& m) {
  j = {{"size", {m.height, m.width}}, {"counts", m.counts}};
}
inline void from_json(const nlohmann::json& j, RleMask& m) {
  m.height = j.at("size").at(0).get<int>();
  m.width = j.at("size").at(1).get<int>();
  m.counts = j.at("counts").get<std::vector<std::uint32_t>>();
}

inline void to_json(nlohmann::json& j, const BBox& b) { j = {b.x0, b.y0, b.x1, b.y1}; }
inline void from_json(const nlohmann::json& j, BBox& b) {
  b = {j.at(0).get<int>(), j.at(1).get<int>(), j.at(2).get<int>(), j.at(3).get<int>()};
}

inline void to_json(nlohmann::json& j, const ImageRecord& r) {
  j = {{"id", r.id},
       {"file", r.file},
       {"split", r.split},
       {"source_dataset", r.source_dataset},
       {"source_id", r.source_id},
       {"filter",
        {{"kind", to_string(r.filter.kind)}, {"seed", r.filter.seed}, {"file", r.filter.file}}}};
}
inline void from_json(const nlohmann::json& j, ImageRecord& r) {
  r.id = j.at("id").get<std::string>();
  r.file = j.at("file").get<std::string>();
  r.split = j.at("split").get<std::string>();
  r.source_dataset = j.value("source_dataset", std::string());
  r.source_id = j.value("source_id", std::string());
  r.filter = {};
  if (j.contains("filter")) {
    const auto& f = j.at("filter");
    r.filter.kind = parse_filter_kind(f.at("kind").get<std::string>());
    r.filter.seed = f.value("seed", std::uint64_t{0});
    r.filter.file = f.value("file", std::string());
  }
}

inline void to_json(nlohmann::json& j, const TargetRecord& t) {
  j = {{"id", t.id},         {"image_id", t.image_id}, {"kind", to_string(t.kind)},
       {"category", t.category}, {"mask", t.mask},     {"bbox", t.bbox},
       {"members", t.members}};
}
inline void from_json(const nlohmann::json& j, TargetRecord& t) {
  t.id = j.at("id").get<std::string>();
  t.image_id = j.at("image_id").get<std::string>();
  t.kind = parse_target_kind(j.at("kind").get<std::string>());
  t.category = j.at("category").get<std::string>();
  t.mask = j.at("mask").get<RleMask>();
  t.bbox = j.at("bbox").get<BBox>();
  t.members = j.value("members", std::vector<std::string>{});
}

inline void to_json(nlohmann::json& j, const Expression& e) {
  j = {{"id", e.id},
       {"target_id", e.target_id},
       {"text", e.text},
       {"source", to_string(e.source)}};
  if (e.parent_id) j["parent_id"] = *e.parent_id;
}
inline void from_json(const nlohmann::json& j, Expression& e) {
  e.id = j.at("id").get<std::string>();
  e.target_id = j.at("target_id").get<std::string>();
  e.text = j.at("text").get<std::string>();
  e.source = parse_expression_source(j.at("source").get<std::string>());
  e.parent_id.reset();
  if (j.contains("parent_id")) e.parent_id = j.at("parent_id").get<std::string>();
}

inline nlohmann::json manifest_body(const DatasetManifest& m) {
  return {{"schema_version", m.schema_version},
          {"images", m.images},
          {"targets", m.targets},
          {"expressions", m.expressions}};
}

inline void append_body(DatasetManifest& m, const nlohmann::json& j) {
  const int version = j.value("schema_version", kManifestSchemaVersion);
  if (version != kManifestSchemaVersion) {
    throw InputError("unsupported manifest schema version " + std::to_string(version));
  }
  for (const auto& x : j.at("images")) m.images.push_back(x.get<ImageRecord>());
  for (const auto& x : j.at("targets")) m.targets.push_back(x.get<TargetRecord>());
  for (const auto& x : j.at("expressions")) m.expressions.push_back(x.get<Expression>());
}

// ---------------------------------------------------------------------------
// Integrity

inline void validate_integrity(const DatasetManifest& m) {
  std::set<std::string> images, targets, expressions;
  for (const auto& im : m.images) {
    if (!images.insert(im.id).second) throw IntegrityError("duplicate image id '" + im.id + "'");
    if (im.split != "train" && im.split != "test") {
      throw IntegrityError("image '" + im.id + "' has invalid split '" + im.split + "'");
    }
  }
  for (const auto& t : m.targets) {
    if (!targets.insert(t.id).second) throw IntegrityError("duplicate target id '" + t.id + "'");
    if (!images.contains(t.image_id)) {
      throw IntegrityError("target '" + t.id + "' references missing image '" + t.image_id + "'");
    }
  }
  std::set<std::string> described;
  for (const auto& e : m.expressions) {
    if (!expressions.insert(e.id).second) {
      throw IntegrityError("duplicate expression id '" + e.id + "'");
    }
    if (!targets.contains(e.target_id)) {
      throw IntegrityError("expression '" + e.id + "' references missing target '" + e.target_id +
                           "'");
    }
    if (e.text.empty()) throw IntegrityError("expression '" + e.id + "' has empty text");
    described.insert(e.target_id);
  }
  for (const auto& t : m.targets) {
    if (!described.contains(t.id)) {
      throw IntegrityError("target '" + t.id + "' has no expressions");
    }
  }
}

// ---------------------------------------------------------------------------
// Files

/// Writes `text` through a temporary file and a rename so readers never see a
/// partial file.
inline void write_file_atomic(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out << text;
    if (!out) throw Error("short write to '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

inline std::string shard_name(std::size_t k) {
  std::ostringstream s;
  s << "manifest-" << std::setw(5) << std::setfill('0') << k << ".json";
  return s.str();
}

/// Writes `dir/manifest.json` (an index) plus one shard per `shard_size` images.
/// Targets and expressions travel with their image's shard.
inline void write_manifest(const fs::path& dir, const DatasetManifest& m,
                           std::size_t shard_size = kImagesPerShard) {
  if (shard_size == 0) throw ConfigError("shard size must be positive");
  std::map<std::string, std::size_t> image_shard;
  for (std::size_t i = 0; i < m.images.size(); ++i) image_shard[m.images[i].id] = i / shard_size;
  const std::size_t n_shards = std::max<std::size_t>(1, (m.images.size() + shard_size - 1) / shard_size);
  std::vector<DatasetManifest> shards(n_shards);
  std::map<std::string, std::size_t> target_shard;
  for (const auto& im : m.images) shards[image_shard.at(im.id)].images.push_back(im);
  for (const auto& t : m.targets) {
    auto it = image_shard.find(t.image_id);
    if (it == image_shard.end()) {
      throw IntegrityError("target '" + t.id + "' references missing image '" + t.image_id + "'");
    }
    target_shard[t.id] = it->second;
    shards[it->second].targets.push_back(t);
  }
  for (const auto& e : m.expressions) {
    auto it = target_shard.find(e.target_id);
    if (it == target_shard.end()) {
      throw IntegrityError("expression '" + e.id + "' references missing target '" + e.target_id +
                           "'");
    }
    shards[it->second].expressions.push_back(e);
  }
  nlohmann::json index = {{"schema_version", m.schema_version}, {"shards", nlohmann::json::array()}};
  for (std::size_t k = 0; k < n_shards; ++k) {
    write_file_atomic(dir / shard_name(k), manifest_body(shards[k]).dump() + "\n");
    index["shards"].push_back(shard_name(k));
  }
  write_file_atomic(dir / "manifest.json", index.dump(2) + "\n");
}

/// Reads a manifest index (or directory holding one) or a single-shard file.
inline DatasetManifest read_manifest(const fs::path& path) {
  const fs::path file = fs::is_directory(path) ? path / "manifest.json" : path;
  std::ifstream in(file);
  if (!in) throw InputError("cannot open manifest '" + file.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InputError("invalid manifest '" + file.string() + "': " + e.what());
  }
  DatasetManifest m;
  m.schema_version = j.value("schema_version", kManifestSchemaVersion);
  if (j.contains("shards")) {
    for (const auto& s : j.at("shards")) {
      const fs::path shard = file.parent_path() / s.get<std::string>();
      std::ifstream sin(shard);
      if (!sin) throw InputError("cannot open manifest shard '" + shard.string() + "'");
      append_body(m, nlohmann::json::parse(sin));
    }
  } else {
    append_body(m, j);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Splits

/// Split per source image so overlapping tiles of one source never straddle
/// train and test. round(test_fraction * n) sources go to test.
inline std::map<std::string, std::string> assign_splits(const std::vector<std::string>& source_ids,
                                                        double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ConfigError("test_fraction must be in (0,1)");
  }
  std::set<std::string> uniq(source_ids.begin(), source_ids.end());
  std::vector<std::string> order(uniq.begin(), uniq.end());
  Rng rng(seed);
  rng.shuffle(order);
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * order.size()));
  std::map<std::string, std::string> out;
  for (std::size_t i = 0; i < order.size(); ++i) out[order[i]] = i < n_test ? "test" : "train";
  return out;
}

// ---------------------------------------------------------------------------
// Statistics

struct SplitCounts {
  std::uint64_t train = 0;
  std::uint64_t test = 0;
  std::uint64_t total() const noexcept { return train + test; }
  void add(const std::string& split) { (split == "test" ? test : train) += 1; }
  friend bool operator==(const SplitCounts&, const SplitCounts&) = default;
};

struct DatasetStats {
  std::size_t images = 0;
  std::size_t targets = 0;
  std::map<std::string, std::size_t> targets_by_kind;
  std::map<ExpressionSource, SplitCounts> by_source;
  SplitCounts instance_level;  // instances, clusters, class groups
  SplitCounts semantic_level;  // semantic regions
  SplitCounts total;
  std::map<std::string, std::size_t> grouped_targets_by_category;
  std::map<std::string, std::size_t> instance_targets_by_category;
  std::map<std::string, std::size_t> expressions_by_category;
  std::vector<std::pair<std::string, std::size_t>> word_frequencies;
};

/// Both row families must add up to the grand total.
inline bool double_entry_holds(std::uint64_t rule, std::uint64_t language, std::uint64_t visual,
                               std::uint64_t instance_level, std::uint64_t semantic_level,
                               std::uint64_t total) {
  return rule + language + visual == total && instance_level + semantic_level == total;
}

inline bool double_entry_holds(const DatasetStats& s) {
  for (auto split : {&SplitCounts::train, &SplitCounts::test}) {
    std::uint64_t src = 0;
    for (const auto& [_, c] : s.by_source) src += c.*split;
    if (src != s.total.*split) return false;
    if (s.instance_level.*split + s.semantic_level.*split != s.total.*split) return false;
  }
  return double_entry_holds(s.by_source.at(ExpressionSource::Rule).total(),
                            s.by_source.at(ExpressionSource::LlmLanguage).total(),
                            s.by_source.at(ExpressionSource::LlmVisual).total(),
                            s.instance_level.total(), s.semantic_level.total(), s.total.total());
}

inline std::vector<std::string> words_of(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalpha(c) || (ch == '-' && !cur.empty())) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  for (auto& w : out)
    while (!w.empty() && w.back() == '-') w.pop_back();
  std::erase_if(out, [](const std::string& w) { return w.empty(); });
  return out;
}

inline DatasetStats compute_stats(const DatasetManifest& m) {
  validate_integrity(m);
  DatasetStats s;
  s.images = m.images.size();
  s.targets = m.targets.size();
  for (auto src : {ExpressionSource::Rule, ExpressionSource::LlmLanguage, ExpressionSource::LlmVisual})
    s.by_source[src] = {};

  std::map<std::string, const ImageRecord*> images;
  for (const auto& im : m.images) images[im.id] = &im;
  std::map<std::string, const TargetRecord*> targets;
  for (const auto& t : m.targets) {
    targets[t.id] = &t;
    ++s.targets_by_kind[std::string(to_string(t.kind))];
    if (t.kind == TargetKind::Instance) ++s.instance_targets_by_category[t.category];
    else ++s.grouped_targets_by_category[t.category];
  }
  std::map<std::string, std::size_t> words;
  for (const auto& e : m.expressions) {
    const TargetRecord& t = *targets.at(e.target_id);
    const std::string& split = images.at(t.image_id)->split;
    s.by_source[e.source].add(split);
    (t.kind == TargetKind::SemanticRegion ? s.semantic_level : s.instance_level).add(split);
    s.total.add(split);
    ++s.expressions_by_category[t.category];
    for (auto& w : words_of(e.text)) ++words[w];
  }
  s.word_frequencies.assign(words.begin(), words.end());
  std::stable_sort(s.word_frequencies.begin(), s.word_frequencies.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  return s;
}

inline nlohmann::json stats_to_json(const DatasetStats& s) {
  auto row = [](const SplitCounts& c) {
    return nlohmann::json{{"train", c.train}, {"test", c.test}, {"total", c.total()}};
  };
  nlohmann::json j;
  j["images"] = s.images;
  j["targets"] = s.targets;
  j["targets_by_kind"] = s.targets_by_kind;
  for (const auto& [src, c] : s.by_source) j["expressions_by_source"][to_string(src)] = row(c);
  j["expressions_by_level"]["instance"] = row(s.instance_level);
  j["expressions_by_level"]["semantic"] = row(s.semantic_level);
  j["expressions_total"] = row(s.total);
  j["grouped_targets_by_category"] = s.grouped_targets_by_category;
  j["instance_targets_by_category"] = s.instance_targets_by_category;
  j["expressions_by_category"] = s.expressions_by_category;
  j["word_frequencies"] = nlohmann::json::array();
  for (const auto& [w, n] : s.word_frequencies) j["word_frequencies"].push_back({w, n});
  j["double_entry_ok"] = double_entry_holds(s);
  return j;
}

inline std::string stats_to_text(const DatasetStats& s, std::size_t top_words = 20) {
  std::ostringstream o;
  auto line = [&](const std::string& name, const SplitCounts& c) {
    o << std::left << std::setw(26) << name << std::right << std::setw(12) << c.train
      << std::setw(12) << c.test << std::setw(12) << c.total() << "\n";
  };
  o << std::left << std::setw(26) << "Expression Source" << std::right << std::setw(12) << "Train"
    << std::setw(12) << "Test" << std::setw(12) << "Total" << "\n";
  line("Rule-Based Expressions", s.by_source.at(ExpressionSource::Rule));
  line("LLM Language Variations", s.by_source.at(ExpressionSource::LlmLanguage));
  line("LLM Visual Variations", s.by_source.at(ExpressionSource::LlmVisual));
  line("Instances", s.instance_level);
  line("Semantic Classes", s.semantic_level);
  line("Total Expressions", s.total);
  o << "\nimages " << s.images << ", targets " << s.targets << "\n";
  for (const auto& [k, n] : s.targets_by_kind) o << "  " << k << ": " << n << "\n";
  o << "\nexpressions by category\n";
  for (const auto& [c, n] : s.expressions_by_category) o << "  " << c << ": " << n << "\n";
  o << "\ntop words\n";
  for (std::size_t i = 0; i < std::min(top_words, s.word_frequencies.size()); ++i) {
    o << "  " << s.word_frequencies[i].first << " " << s.word_frequencies[i].second << "\n";
  }
  return o.str();
}

}  // namespace forge
