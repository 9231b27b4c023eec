#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <exception>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "forge/config.hpp"
#include "forge/dataset_io.hpp"
#include "forge/digest.hpp"
#include "forge/error.hpp"
#include "forge/eval_metrics.hpp"
#include "forge/expression_engine.hpp"
#include "forge/historic_filters.hpp"
#include "forge/ingest_tiling.hpp"
#include "forge/llm_enhancer.hpp"
#include "forge/png_io.hpp"
#include "forge/rle.hpp"
#include "forge/source_manifest.hpp"
#include "forge/target_graph.hpp"

namespace forge {

// ---------------------------------------------------------------------------
// Logging

/// JSON-lines event log. Thread-safe; a null stream discards everything.
class Logger {
 public:
  explicit Logger(std::ostream* out = &std::cerr) : out_(out) {}

  void event(const std::string& stage, const std::string& what, nlohmann::json fields = {}) {
    if (!out_) return;
    nlohmann::json j = {{"ts", timestamp()}, {"stage", stage}, {"event", what}};
    if (fields.is_object()) j.update(fields);
    std::lock_guard lock(mu_);
    *out_ << j.dump() << "\n";
    out_->flush();
  }

 private:
  static std::string timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()) % 1000;
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream o;
    o << std::put_time(&tm, "%Y-%m-%dT%H:%M:%S") << '.' << std::setw(3) << std::setfill('0')
      << ms.count() << 'Z';
    return o.str();
  }

  std::ostream* out_;
  std::mutex mu_;
};

// ---------------------------------------------------------------------------
// Worker pool

/// Runs f(i) for i in [0, n) on `workers` threads and returns the results in
/// index order. A failure is reported for the lowest failing index, wrapped in
/// a StageError naming `stage` and the item.
template <typename F>
auto parallel_map(std::size_t n, int workers, const std::string& stage,
                  const std::function<std::string(std::size_t)>& item_name, F&& f)
    -> std::vector<decltype(f(std::size_t{}))> {
  using R = decltype(f(std::size_t{}));
  std::vector<std::optional<R>> slots(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  auto worker = [&] {
    for (std::size_t i = next++; i < n && !failed.load(); i = next++) {
      try {
        slots[i].emplace(f(i));
      } catch (...) {
        errors[i] = std::current_exception();
        failed = true;
      }
    }
  };
  const int threads = std::max(1, std::min<int>(workers, static_cast<int>(n)));
  {
    std::vector<std::jthread> pool;
    for (int k = 1; k < threads; ++k) pool.emplace_back(worker);
    worker();
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(stage, item_name(i), e.what());
    }
  }
  std::vector<R> out;
  out.reserve(n);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

// ---------------------------------------------------------------------------
// Work directory records

namespace fs = std::filesystem;

struct TileRecord {
  std::string id;
  std::string source_id;
  std::string dataset;
  int origin_x = 0;
  int origin_y = 0;
  std::string image;   // relative to the work dir
  std::string labels;  // empty for instance tiles
  Legend legend;
  std::vector<std::pair<Instance, RleMask>> instances;
};

inline nlohmann::json legend_to_json(const Legend& legend) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : legend) j[std::to_string(k)] = v;
  return j;
}

inline nlohmann::json tile_record_json(const TileRecord& t) {
  nlohmann::json inst = nlohmann::json::array();
  for (const auto& [i, rle] : t.instances)
    inst.push_back({{"id", i.id}, {"category", i.category}, {"mask", rle}});
  return {{"id", t.id},         {"source_id", t.source_id}, {"dataset", t.dataset},
          {"origin", {t.origin_x, t.origin_y}}, {"image", t.image}, {"labels", t.labels},
          {"legend", legend_to_json(t.legend)}, {"instances", inst}};
}

inline TileRecord tile_record_from_json(const nlohmann::json& j) {
  TileRecord t;
  t.id = j.at("id").get<std::string>();
  t.source_id = j.at("source_id").get<std::string>();
  t.dataset = j.at("dataset").get<std::string>();
  t.origin_x = j.at("origin").at(0).get<int>();
  t.origin_y = j.at("origin").at(1).get<int>();
  t.image = j.at("image").get<std::string>();
  t.labels = j.at("labels").get<std::string>();
  t.legend = parse_legend(j.at("legend"));
  for (const auto& x : j.at("instances")) {
    Instance i{x.at("id").get<std::string>(), x.at("category").get<std::string>(), {}};
    t.instances.emplace_back(std::move(i), x.at("mask").get<RleMask>());
  }
  return t;
}

/// Rebuilds the in-memory tile (pixels, labels, decoded masks).
inline Tile load_tile(const fs::path& work, const TileRecord& r) {
  Tile t;
  t.id = r.id;
  t.source_id = r.source_id;
  t.dataset = r.dataset;
  t.origin_x = r.origin_x;
  t.origin_y = r.origin_y;
  t.pixels = png::read(work / r.image);
  if (!r.labels.empty()) t.labels = png::read_labels(work / r.labels);
  t.legend = r.legend;
  for (const auto& [inst, rle] : r.instances) t.instances.push_back({inst.id, inst.category, rle_decode(rle)});
  return t;
}

namespace detail {

template <typename E, std::size_t N>
E parse_enum(std::string_view s, const char* what) {
  for (std::size_t i = 0; i < N; ++i) {
    if (to_string(static_cast<E>(i)) == s) return static_cast<E>(i);
  }
  throw InputError(std::string("unknown ") + what + " '" + std::string(s) + "'");
}

}  // namespace detail

inline nlohmann::json cues_to_json(const CueSet& c) {
  nlohmann::json j;
  j["category"] = c.category_name;
  j["grid"] = to_string(c.grid_cell);
  j["extremes"] = nlohmann::json::array();
  for (auto e : c.extremes) j["extremes"].push_back(to_string(e));
  j["color"] = c.color ? nlohmann::json(*c.color) : nlohmann::json(nullptr);
  j["relations"] = nlohmann::json::array();
  for (const auto& r : c.relations)
    j["relations"].push_back({{"direction", to_string(r.direction)},
                              {"neighbor_id", r.neighbor_id},
                              {"neighbor_category", r.neighbor_category}});
  return j;
}

inline CueSet cues_from_json(const nlohmann::json& j) {
  CueSet c;
  c.category_name = j.at("category").get<std::string>();
  c.grid_cell = detail::parse_enum<GridCell, 9>(j.at("grid").get<std::string>(), "grid cell");
  for (const auto& e : j.at("extremes"))
    c.extremes.push_back(detail::parse_enum<Extreme, 4>(e.get<std::string>(), "extreme"));
  if (!j.at("color").is_null()) c.color = j.at("color").get<std::string>();
  for (const auto& r : j.at("relations")) {
    c.relations.push_back({detail::parse_enum<Direction, 8>(r.at("direction").get<std::string>(), "direction"),
                           r.at("neighbor_id").get<std::string>(),
                           r.at("neighbor_category").get<std::string>()});
  }
  return c;
}

inline TargetRecord target_record(const Target& t, const std::string& image_id) {
  return {t.id, image_id, t.kind, t.category, rle_encode(t.mask), t.bbox, t.members};
}

inline Target target_from_record(const TargetRecord& r) {
  return {r.id, r.kind, r.category, rle_decode(r.mask), r.bbox, r.members};
}

inline void write_json(const fs::path& path, const nlohmann::json& j) {
  write_file_atomic(path, j.dump() + "\n");
}

// ---------------------------------------------------------------------------
// Stage layout

enum class Stage { Tile, Targets, Generate, Dedupe, Enhance, Export, Stats };

inline constexpr std::array<Stage, 7> kStages{Stage::Tile,    Stage::Targets, Stage::Generate,
                                              Stage::Dedupe,  Stage::Enhance, Stage::Export,
                                              Stage::Stats};

inline std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::Tile: return "tile";
    case Stage::Targets: return "targets";
    case Stage::Generate: return "generate";
    case Stage::Dedupe: return "dedupe";
    case Stage::Enhance: return "enhance";
    case Stage::Export: return "export";
    case Stage::Stats: return "stats";
  }
  return "";
}

/// File whose presence marks a finished stage. Written last, atomically.
inline fs::path checkpoint_of(const PipelineConfig& c, Stage s) {
  switch (s) {
    case Stage::Tile: return c.work_dir / "tiles" / "index.json";
    case Stage::Targets: return c.work_dir / "targets.json";
    case Stage::Generate: return c.work_dir / "rules.json";
    case Stage::Dedupe: return c.work_dir / "draft" / "manifest.json";
    case Stage::Enhance: return c.work_dir / "enhanced" / "manifest.json";
    case Stage::Export: return c.out_dir / "manifest.json";
    case Stage::Stats: return c.out_dir / "stats.json";
  }
  return {};
}

/// Manifest the export stage reads: the enhanced one unless enhancement is off.
inline fs::path export_input(const PipelineConfig& c) {
  return checkpoint_of(c, c.skip_enhance ? Stage::Dedupe : Stage::Enhance);
}

/// Hash of everything that affects stage outputs; worker counts and secrets
/// are left out on purpose.
inline std::string config_stamp(PipelineConfig c) {
  c.workers = 1;
  c.enhancer.concurrency = 1;
  c.enhancer.api_key.clear();
  c.enhancer.requests_per_second = 0;
  c.enhancer.timeout = std::chrono::seconds(0);
  c.enhancer.max_tries = 1;
  c.enhancer.backoff_base = std::chrono::milliseconds(0);
  return sha256_hex(config_to_text(c) + std::string(assets::kInstructionVersion));
}

struct RunContext {
  PipelineConfig config;
  Logger* log = nullptr;
  Transport transport;  // enhancer transport; defaults to HTTP
  std::map<std::string, std::size_t> counters;

  void event(Stage s, const std::string& what, nlohmann::json fields = {}) {
    if (log) log->event(std::string(to_string(s)), what, std::move(fields));
  }
};

// ---------------------------------------------------------------------------
// Stages

inline void stage_tile(RunContext& ctx) {
  const auto& c = ctx.config;
  if (c.sources.empty()) throw ConfigError("paths.sources is not set");
  const SourceManifest sm = load_source_manifest(c.sources);
  const fs::path tiles_dir = c.work_dir / "tiles";
  fs::create_directories(tiles_dir);
  CocoCache coco;
  auto per_source = parallel_map(
      sm.sources.size(), c.workers, "tile", [&](std::size_t i) { return sm.sources[i].id; },
      [&](std::size_t i) {
        const SourceImage img = load_source(sm.sources[i], coco);
        std::vector<Tile> tiles;
        if (img.labels) {
          Tile t = resize_semantic_image(img, c.tiling.window);
          promote_pseudo_instances(t, c.pseudo);
          tiles.push_back(std::move(t));
        } else {
          tiles = tile_instance_image(img, c.tiling);
        }
        std::vector<TileRecord> records;
        for (const auto& t : tiles) {
          TileRecord r;
          r.id = t.id;
          r.source_id = t.source_id;
          r.dataset = t.dataset;
          r.origin_x = t.origin_x;
          r.origin_y = t.origin_y;
          r.image = "tiles/" + t.id + ".png";
          png::write(c.work_dir / r.image, t.pixels);
          if (t.labels) {
            r.labels = "tiles/" + t.id + ".labels.png";
            png::write(c.work_dir / r.labels, *t.labels);
          }
          r.legend = t.legend;
          for (const auto& inst : t.instances) r.instances.emplace_back(Instance{inst.id, inst.category, {}}, rle_encode(inst.mask));
          records.push_back(std::move(r));
        }
        return records;
      });
  nlohmann::json index = nlohmann::json::array();
  std::size_t n = 0;
  for (const auto& recs : per_source)
    for (const auto& r : recs) {
      index.push_back(tile_record_json(r));
      ++n;
    }
  ctx.counters["sources"] = sm.sources.size();
  ctx.counters["tiles"] = n;
  ctx.event(Stage::Tile, "done", {{"sources", sm.sources.size()}, {"tiles", n}});
  write_json(checkpoint_of(c, Stage::Tile), {{"tiles", index}});
}

inline std::vector<TileRecord> read_tile_index(const PipelineConfig& c) {
  const auto j = read_json_file(checkpoint_of(c, Stage::Tile));
  std::vector<TileRecord> out;
  for (const auto& t : j.at("tiles")) out.push_back(tile_record_from_json(t));
  return out;
}

inline void stage_targets(RunContext& ctx) {
  const auto& c = ctx.config;
  const auto tiles = read_tile_index(c);
  auto per_tile = parallel_map(
      tiles.size(), c.workers, "targets", [&](std::size_t i) { return tiles[i].id; },
      [&](std::size_t i) {
        const Tile tile = load_tile(c.work_dir, tiles[i]);
        const auto targets = build_targets(tile, c.targets);
        const auto cues = extract_cues(tile, targets, c.cues);
        nlohmann::json tj = nlohmann::json::array();
        for (std::size_t k = 0; k < targets.size(); ++k) {
          nlohmann::json rec = target_record(targets[k], tile.id);
          rec["cues"] = cues_to_json(cues[k]);
          tj.push_back(std::move(rec));
        }
        return nlohmann::json{{"tile_id", tile.id}, {"targets", tj}};
      });
  std::map<std::string, std::size_t> by_kind;
  for (const auto& t : per_tile)
    for (const auto& x : t.at("targets")) ++by_kind[x.at("kind").get<std::string>()];
  for (const auto& [k, n] : by_kind) ctx.counters["targets." + k] = n;
  ctx.event(Stage::Targets, "done", {{"tiles", tiles.size()}, {"targets_by_kind", by_kind}});
  write_json(checkpoint_of(c, Stage::Targets), {{"tiles", per_tile}});
}

inline Grammar load_grammar(const PipelineConfig& c) {
  return c.grammar.empty() ? Grammar() : Grammar::load(c.grammar);
}

inline void stage_generate(RunContext& ctx) {
  const auto& c = ctx.config;
  const Grammar grammar = load_grammar(c);
  const auto targets = read_json_file(checkpoint_of(c, Stage::Targets)).at("tiles");
  auto per_tile = parallel_map(
      targets.size(), c.workers, "generate",
      [&](std::size_t i) { return targets[i].at("tile_id").get<std::string>(); },
      [&](std::size_t i) {
        nlohmann::json exprs = nlohmann::json::array();
        for (const auto& tj : targets[i].at("targets")) {
          const TargetRecord rec = tj.get<TargetRecord>();
          const Target t{rec.id, rec.kind, rec.category, Mask(), rec.bbox, rec.members};
          for (const auto& e : generate_rule_expressions(t, cues_from_json(tj.at("cues")), grammar))
            exprs.push_back(e);
        }
        return nlohmann::json{{"tile_id", targets[i].at("tile_id")}, {"expressions", exprs}};
      });
  std::size_t n = 0;
  for (const auto& t : per_tile) n += t.at("expressions").size();
  ctx.counters["rule_expressions.generated"] = n;
  ctx.event(Stage::Generate, "done", {{"expressions", n}, {"grammar", grammar.version()}});
  write_json(checkpoint_of(c, Stage::Generate), {{"tiles", per_tile}});
}

inline void stage_dedupe(RunContext& ctx) {
  const auto& c = ctx.config;
  const auto tiles = read_tile_index(c);
  const auto targets = read_json_file(checkpoint_of(c, Stage::Targets)).at("tiles");
  const auto rules = read_json_file(checkpoint_of(c, Stage::Generate)).at("tiles");
  if (targets.size() != tiles.size() || rules.size() != tiles.size())
    throw StageError("dedupe", "work dir", "stage outputs disagree on the tile count");

  const SourceManifest sm = load_source_manifest(c.sources);
  std::vector<std::string> source_ids;
  for (const auto& s : sm.sources) source_ids.push_back(s.id);
  const auto splits = assign_splits(source_ids, c.test_fraction, c.seed);

  DatasetManifest m;
  std::size_t dropped = 0;
  for (std::size_t i = 0; i < tiles.size(); ++i) {
    const auto& tile = tiles[i];
    std::vector<Expression> exprs;
    for (const auto& e : rules[i].at("expressions")) exprs.push_back(e.get<Expression>());
    const auto kept = dedupe_image(exprs);
    dropped += exprs.size() - kept.size();
    std::set<std::string> described;
    for (const auto& e : kept) described.insert(e.target_id);
    std::vector<TargetRecord> recs;
    for (const auto& tj : targets[i].at("targets")) {
      auto rec = tj.get<TargetRecord>();
      if (described.contains(rec.id)) recs.push_back(std::move(rec));
    }
    if (recs.empty()) continue;
    auto split = splits.find(tile.source_id);
    if (split == splits.end()) throw StageError("dedupe", tile.id, "source has no split");
    m.images.push_back({tile.id, "../" + tile.image, split->second, tile.dataset, tile.source_id, {}});
    for (auto& r : recs) m.targets.push_back(std::move(r));
    for (const auto& e : kept) m.expressions.push_back(e);
  }
  validate_integrity(m);
  ctx.counters["rule_expressions.deduplicated"] = dropped;
  ctx.counters["rule_expressions.kept"] = m.expressions.size();
  ctx.event(Stage::Dedupe, "done",
            {{"images", m.images.size()}, {"targets", m.targets.size()},
             {"expressions", m.expressions.size()}, {"removed", dropped}});
  write_manifest(checkpoint_of(c, Stage::Dedupe).parent_path(), m, c.shard_size);
}

// ---------------------------------------------------------------------------
// Enhancement over a manifest

struct EnhanceRun {
  MergeSummary summary;
  std::size_t requests = 0;  // payloads sent (or served from cache)
  std::size_t network_requests = 0;
  std::size_t cache_hits = 0;
  std::vector<TeacherRecord> teacher;  // filled when asked for
};

/// Number of enhancement requests a manifest needs: one per target that has
/// rule expressions.
inline std::size_t count_enhance_requests(const DatasetManifest& m) {
  std::set<std::string> ids;
  for (const auto& e : m.expressions)
    if (e.source == ExpressionSource::Rule) ids.insert(e.target_id);
  return ids.size();
}

/// Enhances every target of `m` in place. Earlier LLM expressions are
/// replaced; rule expressions are never touched. `manifest_dir` anchors the
/// image paths.
inline EnhanceRun enhance_manifest(DatasetManifest& m, const fs::path& manifest_dir,
                                   const EndpointConfig& endpoint, const Transport& transport,
                                   ResponseCache* cache, int workers, bool collect_teacher = false,
                                   Logger* log = nullptr) {
  std::erase_if(m.expressions, [](const Expression& e) { return e.source != ExpressionSource::Rule; });
  std::map<std::string, std::vector<const Expression*>> rules;
  for (const auto& e : m.expressions) rules[e.target_id].push_back(&e);
  std::map<std::string, const ImageRecord*> images;
  for (const auto& im : m.images) images[im.id] = &im;

  std::vector<const TargetRecord*> todo;
  for (const auto& t : m.targets)
    if (rules.contains(t.id)) todo.push_back(&t);

  EnhanceRun run;
  EnhanceCounters counters;
  std::vector<PromptPayload> payloads;
  std::vector<EnhancementResult> results;
  const std::size_t chunk = static_cast<std::size_t>(std::max(1, endpoint.concurrency)) * 32;
  for (std::size_t start = 0; start < todo.size(); start += chunk) {
    const std::size_t n = std::min(chunk, todo.size() - start);
    auto batch = parallel_map(
        n, workers, "enhance", [&](std::size_t i) { return todo[start + i]->id; },
        [&](std::size_t i) {
          const TargetRecord& t = *todo[start + i];
          const Image8 tile = png::read(manifest_dir / images.at(t.image_id)->file);
          PromptPayload p;
          p.target_id = t.id;
          p.image_id = t.image_id;
          p.kind = t.kind;
          p.category = t.category;
          for (const Expression* e : rules.at(t.id)) {
            p.task1_inputs.push_back(e->text);
            p.task1_ids.push_back(e->id);
          }
          p.guides = render_guides(tile, target_from_record(t));
          return p;
        });
    auto out = enhance_batch(batch, endpoint, transport, cache, &counters);
    for (std::size_t i = 0; i < n; ++i) {
      if (collect_teacher && out[i].status == EnhanceStatus::Ok) {
        std::set<std::string> taken;
        for (const auto& text : batch[i].task1_inputs) taken.insert(normalize_text(text));
        if (validate_enhancement(out[i], taken).accepted() ==
            out[i].language_variations.size() + out[i].visual_variations.size()) {
          run.teacher.push_back({batch[i].target_id, prompt_messages(batch[i]), out[i].raw});
        }
      }
      if (log && out[i].status != EnhanceStatus::Ok) {
        log->event("enhance", out[i].status == EnhanceStatus::Failed ? "request_failed" : "schema_invalid",
                   {{"target_id", out[i].target_id}, {"error", out[i].error}});
      }
      batch[i].guides = {};  // images are no longer needed
      payloads.push_back(std::move(batch[i]));
      results.push_back(std::move(out[i]));
    }
  }
  run.summary = merge_enhancements(m, payloads, results);
  run.requests = payloads.size();
  run.network_requests = counters.network_requests.load();
  run.cache_hits = counters.cache_hits.load();
  return run;
}

inline nlohmann::json summary_json(const EnhanceRun& r) {
  nlohmann::json rejected = nlohmann::json::object();
  for (const auto& [why, n] : r.summary.rejected) rejected[std::string(to_string(why))] = n;
  return {{"targets", r.requests},
          {"network_requests", r.network_requests},
          {"cache_hits", r.cache_hits},
          {"language_added", r.summary.language_added},
          {"visual_added", r.summary.visual_added},
          {"failed", r.summary.failed},
          {"schema_invalid", r.summary.schema_invalid},
          {"rejected", rejected}};
}

/// Rewrites image paths of a manifest read from `from` so they resolve from `to`.
inline void rebase_image_paths(DatasetManifest& m, const fs::path& from, const fs::path& to) {
  for (auto& im : m.images) {
    const fs::path abs = fs::weakly_canonical(from / im.file);
    im.file = fs::relative(abs, fs::weakly_canonical(to)).generic_string();
  }
}

inline void stage_enhance(RunContext& ctx) {
  const auto& c = ctx.config;
  if (c.enhancer.url.empty()) {
    throw ConfigError("enhancer.url is not set (ENHANCER_URL); pass --skip-enhance for a rule-only dataset");
  }
  const fs::path in_dir = checkpoint_of(c, Stage::Dedupe).parent_path();
  const fs::path out_dir = checkpoint_of(c, Stage::Enhance).parent_path();
  DatasetManifest m = read_manifest(in_dir);
  ResponseCache cache(c.cache_dir);
  const Transport transport = ctx.transport ? ctx.transport : http_transport(c.enhancer);
  const EnhanceRun run = enhance_manifest(m, in_dir, c.enhancer, transport, &cache, c.workers,
                                          false, ctx.log);
  rebase_image_paths(m, in_dir, out_dir);
  validate_integrity(m);
  ctx.counters["enhance.language_added"] = run.summary.language_added;
  ctx.counters["enhance.visual_added"] = run.summary.visual_added;
  ctx.counters["enhance.failed"] = run.summary.failed;
  ctx.counters["enhance.schema_invalid"] = run.summary.schema_invalid;
  ctx.event(Stage::Enhance, "done", summary_json(run));
  write_manifest(out_dir, m, c.shard_size);
}

// ---------------------------------------------------------------------------
// Export

/// Filter drawn for one training tile; depends only on the seed and the id.
inline FilterSpec choose_filter(const std::string& image_id, const PipelineConfig& c) {
  Rng rng(derive_seed(c.seed, "filter:" + image_id));
  FilterSpec spec = sample_filter(rng, c.p_filter, c.filter);
  spec.seed = derive_seed(c.seed, "grain:" + image_id);
  return spec;
}

inline void stage_export(RunContext& ctx) {
  const auto& c = ctx.config;
  const fs::path in = export_input(c);
  const fs::path in_dir = in.parent_path();
  DatasetManifest m = read_manifest(in_dir);
  fs::create_directories(c.out_dir / "images");
  auto provenance = parallel_map(
      m.images.size(), c.workers, "export", [&](std::size_t i) { return m.images[i].id; },
      [&](std::size_t i) {
        const ImageRecord& im = m.images[i];
        const Image8 pixels = png::read(in_dir / im.file);
        png::write(c.out_dir / "images" / (im.id + ".png"), pixels);
        FilterProvenance prov;
        if (im.split != "train") return prov;
        const FilterSpec spec = choose_filter(im.id, c);
        if (spec.kind == FilterKind::None) return prov;
        prov.kind = spec.kind;
        prov.seed = spec.seed;
        prov.file = "images/" + im.id + std::string(filter_suffix(spec.kind)) + ".png";
        png::write(c.out_dir / prov.file, apply(spec, pixels));
        return prov;
      });
  std::map<std::string, std::size_t> by_kind;
  for (std::size_t i = 0; i < m.images.size(); ++i) {
    m.images[i].file = "images/" + m.images[i].id + ".png";
    m.images[i].filter = provenance[i];
    if (m.images[i].split == "train") ++by_kind[std::string(to_string(provenance[i].kind))];
  }
  validate_integrity(m);
  for (const auto& [k, n] : by_kind) ctx.counters["export.filter." + k] = n;
  ctx.event(Stage::Export, "done", {{"images", m.images.size()}, {"train_filters", by_kind}});
  write_manifest(c.out_dir, m, c.shard_size);
}

inline void stage_stats(RunContext& ctx) {
  const auto& c = ctx.config;
  const DatasetStats s = compute_stats(read_manifest(c.out_dir));
  if (!double_entry_holds(s)) throw StageError("stats", "manifest", "row totals disagree");
  write_file_atomic(c.out_dir / "stats.txt", stats_to_text(s));
  ctx.event(Stage::Stats, "done", {{"expressions", s.total.total()}});
  write_file_atomic(checkpoint_of(c, Stage::Stats), stats_to_json(s).dump(2) + "\n");
}

inline void run_stage(RunContext& ctx, Stage s) {
  ctx.event(s, "start");
  const auto t0 = std::chrono::steady_clock::now();
  switch (s) {
    case Stage::Tile: stage_tile(ctx); break;
    case Stage::Targets: stage_targets(ctx); break;
    case Stage::Generate: stage_generate(ctx); break;
    case Stage::Dedupe: stage_dedupe(ctx); break;
    case Stage::Enhance: stage_enhance(ctx); break;
    case Stage::Export: stage_export(ctx); break;
    case Stage::Stats: stage_stats(ctx); break;
  }
  ctx.event(s, "finished",
            {{"seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()}});
}

struct RunOptions {
  bool resume = true;
};

/// Runs every stage in order. With `resume`, a stage whose checkpoint exists
/// (and whose upstream did not rerun) is skipped. Checkpoints written under a
/// different config are discarded first.
inline void run_pipeline(RunContext& ctx, const RunOptions& opt = {}) {
  const auto& c = ctx.config;
  fs::create_directories(c.work_dir);
  const fs::path stamp_file = c.work_dir / "stamp.txt";
  const std::string stamp = config_stamp(c);
  bool stale = !opt.resume;
  if (!stale) {
    std::ifstream in(stamp_file);
    std::string old;
    std::getline(in, old);
    stale = old != stamp;
  }
  if (stale) {
    for (Stage s : kStages) fs::remove(checkpoint_of(c, s));
    write_file_atomic(stamp_file, stamp + "\n");
  }
  bool upstream_ran = false;
  for (Stage s : kStages) {
    if (s == Stage::Enhance && c.skip_enhance) {
      ctx.event(s, "skipped", {{"reason", "skip_enhance"}});
      continue;
    }
    if (!upstream_ran && fs::exists(checkpoint_of(c, s))) {
      ctx.event(s, "resumed", {{"checkpoint", checkpoint_of(c, s).string()}});
      continue;
    }
    run_stage(ctx, s);
    upstream_ran = true;
  }
}

// ---------------------------------------------------------------------------
// Evaluation against a prediction directory

/// Prediction for one expression: `<dir>/<id>.png` (non-zero = foreground) or
/// `<dir>/<id>.rle.json`. A missing prediction counts as an empty mask.
inline Mask load_prediction(const fs::path& dir, const std::string& expr_id, int w, int h) {
  const fs::path png_path = dir / (expr_id + ".png");
  const fs::path rle_path = dir / (expr_id + ".rle.json");
  Mask m;
  if (fs::exists(png_path)) {
    m = png::to_mask(png::read(png_path));
  } else if (fs::exists(rle_path)) {
    m = rle_decode(read_json_file(rle_path).get<RleMask>());
  } else {
    return Mask(w, h);
  }
  if (m.width() != w || m.height() != h) {
    throw InputError("prediction for '" + expr_id + "' is " + std::to_string(m.width()) + "x" +
                     std::to_string(m.height()) + ", expected " + std::to_string(w) + "x" +
                     std::to_string(h));
  }
  return m;
}

/// Test-split samples of a manifest. `pred` may hold `clean/` and `historic/`
/// subdirectories; otherwise it is read as the clean condition.
inline std::vector<EvalSample> load_eval_samples(const DatasetManifest& m, const fs::path& pred,
                                                 const std::string& split = "test") {
  std::vector<std::pair<Condition, fs::path>> dirs;
  if (fs::is_directory(pred / "clean")) dirs.emplace_back(Condition::Clean, pred / "clean");
  if (fs::is_directory(pred / "historic")) dirs.emplace_back(Condition::Historic, pred / "historic");
  if (dirs.empty()) dirs.emplace_back(Condition::Clean, pred);
  std::map<std::string, const ImageRecord*> images;
  for (const auto& im : m.images) images[im.id] = &im;
  std::map<std::string, const TargetRecord*> targets;
  for (const auto& t : m.targets) targets[t.id] = &t;
  std::map<std::string, Mask> gt_cache;
  std::vector<EvalSample> out;
  for (const auto& [cond, dir] : dirs) {
    for (const auto& e : m.expressions) {
      const TargetRecord& t = *targets.at(e.target_id);
      const ImageRecord& im = *images.at(t.image_id);
      if (!split.empty() && im.split != split) continue;
      auto it = gt_cache.find(t.id);
      if (it == gt_cache.end()) it = gt_cache.emplace(t.id, rle_decode(t.mask)).first;
      const Mask& gt = it->second;
      out.push_back({e.id, gt, load_prediction(dir, e.id, gt.width(), gt.height()), cond,
                     im.source_dataset});
    }
  }
  return out;
}

inline nlohmann::json eval_report_json(const EvalReport& r) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [dataset, rows] : r.rows) {
    for (const auto& [cond, row] : rows) {
      j[dataset][std::string(to_string(cond))] = {{"count", row.count}, {"mIoU", row.miou},
                                                  {"oIoU", row.oiou},   {"Pass@0.5", row.pass50},
                                                  {"Pass@0.7", row.pass70}, {"Pass@0.9", row.pass90}};
    }
  }
  return j;
}

inline std::string eval_report_text(const EvalReport& r) {
  std::ostringstream o;
  o << std::left << std::setw(14) << "dataset" << std::setw(10) << "condition" << std::right
    << std::setw(8) << "n" << std::setw(9) << "mIoU" << std::setw(9) << "oIoU" << std::setw(9)
    << "P@0.5" << std::setw(9) << "P@0.7" << std::setw(9) << "P@0.9" << "\n";
  o << std::fixed << std::setprecision(4);
  for (const auto& [dataset, rows] : r.rows) {
    for (const auto& [cond, row] : rows) {
      o << std::left << std::setw(14) << dataset << std::setw(10) << to_string(cond) << std::right
        << std::setw(8) << row.count << std::setw(9) << row.miou << std::setw(9) << row.oiou
        << std::setw(9) << row.pass50 << std::setw(9) << row.pass70 << std::setw(9) << row.pass90
        << "\n";
    }
  }
  return o.str();
}

}  // namespace forge
