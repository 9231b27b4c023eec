// forge: command-line driver for the dataset pipeline.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "forge/forge.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitStage = 3;

struct GlobalFlags {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::string> sources, work, out, cache, grammar;
  std::optional<int> workers;
  std::optional<std::uint64_t> seed;
  std::string log_file;
  bool quiet = false;
};

forge::KeyValues overrides_from(const GlobalFlags& g) {
  forge::KeyValues kv;
  for (const auto& s : g.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw forge::ConfigError("--set expects KEY=VALUE, got '" + s + "'");
    kv[s.substr(0, eq)] = s.substr(eq + 1);
  }
  if (g.sources) kv["paths.sources"] = *g.sources;
  if (g.work) kv["paths.work_dir"] = *g.work;
  if (g.out) kv["paths.out_dir"] = *g.out;
  if (g.cache) kv["paths.cache_dir"] = *g.cache;
  if (g.grammar) kv["paths.grammar"] = *g.grammar;
  if (g.workers) kv["run.workers"] = std::to_string(*g.workers);
  if (g.seed) kv["run.seed"] = std::to_string(*g.seed);
  return kv;
}

forge::CostModel cost_model_named(const std::string& name) {
  if (name == "o3") return forge::CostModel::openai_o3();
  if (name == "distilled") return forge::CostModel::distilled_gemma3();
  throw forge::ConfigError("unknown cost model '" + name + "' (o3, distilled)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"forge: referring-expression dataset pipeline for aerial imagery"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalFlags g;
  app.add_option("-c,--config", g.config, "key=value config file");
  app.add_option("--set", g.sets, "override one config key (KEY=VALUE), repeatable");
  app.add_option("--sources", g.sources, "source manifest (JSON)");
  app.add_option("--work", g.work, "work directory for stage checkpoints");
  app.add_option("--out", g.out, "output dataset directory");
  app.add_option("--cache", g.cache, "enhancer response cache directory");
  app.add_option("--grammar", g.grammar, "rule grammar file");
  app.add_option("-j,--workers", g.workers, "worker threads");
  app.add_option("--seed", g.seed, "global seed");
  app.add_option("--log", g.log_file, "append JSON-lines log here instead of stderr");
  app.add_flag("-q,--quiet", g.quiet, "no log output");

  std::vector<std::pair<CLI::App*, forge::Stage>> stage_cmds;
  for (auto [name, stage, help] : {std::tuple{"tile", forge::Stage::Tile, "cut sources into tiles"},
                                   std::tuple{"targets", forge::Stage::Targets, "build targets and cues"},
                                   std::tuple{"generate", forge::Stage::Generate, "expand rule expressions"},
                                   std::tuple{"dedupe", forge::Stage::Dedupe, "drop ambiguous expressions"},
                                   std::tuple{"export", forge::Stage::Export, "write the dataset"}}) {
    stage_cmds.emplace_back(app.add_subcommand(name, help), stage);
  }

  auto* tile_cmd = stage_cmds.front().first;
  std::optional<std::string> tile_manifest, tile_out;
  std::optional<int> window, stride;
  tile_cmd->add_option("--manifest", tile_manifest, "source manifest (same as --sources)");
  tile_cmd->add_option("--out", tile_out, "work directory (same as --work)");
  tile_cmd->add_option("--window", window, "tile size in pixels");
  tile_cmd->add_option("--stride", stride, "window stride in pixels");

  auto* run = app.add_subcommand("run", "run every stage, resuming from checkpoints");
  bool skip_enhance = false, no_resume = false;
  run->add_flag("--skip-enhance", skip_enhance, "rule-only dataset");
  run->add_flag("--no-resume", no_resume, "ignore existing checkpoints");

  auto* enhance = app.add_subcommand("enhance", "add LLM variations to a manifest");
  std::string enh_manifest, enh_out, cost_model = "o3", distill_file;
  std::optional<int> concurrency;
  std::optional<std::uint64_t> n_requests;
  bool dry_run = false;
  std::size_t k = 500;
  enhance->add_option("--manifest", enh_manifest, "manifest to enhance (default: pipeline draft)");
  enhance->add_option("--out-manifest", enh_out, "where to write the result (default: in place)");
  enhance->add_option("--concurrency", concurrency, "in-flight requests");
  enhance->add_flag("--dry-run-cost", dry_run, "print the cost estimate and exit");
  enhance->add_option("--cost-model", cost_model, "o3 or distilled")->check(CLI::IsMember({"o3", "distilled"}));
  enhance->add_option("--requests", n_requests, "request count for --dry-run-cost");
  enhance->add_option("--export-distillation", distill_file, "write k teacher pairs as JSON lines");
  enhance->add_option("--k", k, "number of distillation pairs");

  auto* filter = app.add_subcommand("filter", "apply a historic degradation to a PNG");
  std::string f_in, f_out, f_kind, f_manifest;
  std::uint64_t f_seed = 0;
  filter->add_option("--in", f_in, "input RGB PNG");
  filter->add_option("--out", f_out, "output PNG");
  filter->add_option("--manifest", f_manifest, "batch mode: write variants next to every image");
  filter->add_option("--kind", f_kind, "grayscale, grayscale_grain, sepia_noise (batch mode also: all)")
      ->required()
      ->check(CLI::IsMember({"grayscale", "grayscale_grain", "sepia_noise", "all"}));
  filter->add_option("--seed", f_seed, "noise seed (batch mode: mixed with each image id)");

  auto* stats = app.add_subcommand("stats", "dataset statistics");
  std::string s_manifest, s_format = "text";
  stats->add_option("--manifest", s_manifest, "manifest (default: pipeline output)");
  stats->add_option("--format", s_format, "text or json")->check(CLI::IsMember({"text", "json"}));

  auto* eval = app.add_subcommand("eval", "score predicted masks");
  std::string e_manifest, e_pred, e_split = "test", e_format = "text";
  eval->add_option("--manifest", e_manifest, "dataset manifest")->required();
  eval->add_option("--pred", e_pred, "prediction directory")->required();
  eval->add_option("--split", e_split, "split to score (empty: all)");
  eval->add_option("--format", e_format, "text or json")->check(CLI::IsMember({"text", "json"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  std::ofstream log_stream;
  std::ostream* log_out = &std::cerr;
  if (g.quiet) log_out = nullptr;
  else if (!g.log_file.empty()) {
    log_stream.open(g.log_file, std::ios::app);
    log_out = &log_stream;
  }
  forge::Logger logger(log_out);

  try {
    forge::KeyValues ov = overrides_from(g);
    if (run->parsed() && skip_enhance) ov["enhancer.skip"] = "true";
    if (concurrency) ov["enhancer.concurrency"] = std::to_string(*concurrency);
    if (tile_manifest) ov["paths.sources"] = *tile_manifest;
    if (tile_out) ov["paths.work_dir"] = *tile_out;
    if (window) ov["tiling.window"] = std::to_string(*window);
    if (stride) ov["tiling.stride"] = std::to_string(*stride);
    forge::RunContext ctx{forge::load_config(g.config, ov), &logger, {}, {}};
    const auto& cfg = ctx.config;

    for (auto& [cmd, stage] : stage_cmds) {
      if (!cmd->parsed()) continue;
      forge::run_stage(ctx, stage);
      return kExitOk;
    }
    if (run->parsed()) {
      forge::run_pipeline(ctx, {!no_resume});
      return kExitOk;
    }
    if (enhance->parsed()) {
      if (dry_run) {
        std::uint64_t n = 0;
        if (n_requests) n = *n_requests;
        else {
          const auto path = enh_manifest.empty() ? forge::checkpoint_of(cfg, forge::Stage::Dedupe)
                                                 : std::filesystem::path(enh_manifest);
          n = forge::count_enhance_requests(forge::read_manifest(path));
        }
        const auto model = cost_model_named(cost_model);
        std::cout << nlohmann::json{{"model", cost_model},
                                    {"requests", n},
                                    {"cost_per_request_usd", forge::cost_per_request(model)},
                                    {"total_usd", forge::estimate_cost(n, model)}}
                         .dump(2)
                  << "\n";
        return kExitOk;
      }
      if (cfg.enhancer.url.empty()) throw forge::ConfigError("enhancer.url is not set (ENHANCER_URL)");
      if (enh_manifest.empty() && distill_file.empty()) {
        forge::run_stage(ctx, forge::Stage::Enhance);
        return kExitOk;
      }
      const std::filesystem::path in = enh_manifest.empty()
                                           ? forge::checkpoint_of(cfg, forge::Stage::Dedupe)
                                           : std::filesystem::path(enh_manifest);
      const auto in_dir = std::filesystem::is_directory(in) ? in : in.parent_path();
      forge::DatasetManifest m = forge::read_manifest(in);
      forge::ResponseCache cache(cfg.cache_dir);
      const auto run_result =
          forge::enhance_manifest(m, in_dir, cfg.enhancer, forge::http_transport(cfg.enhancer), &cache,
                                  cfg.workers, !distill_file.empty(), &logger);
      logger.event("enhance", "done", forge::summary_json(run_result));
      if (!distill_file.empty()) {
        forge::export_distillation_pairs(run_result.teacher, k, cfg.seed, distill_file);
        logger.event("enhance", "distillation_written", {{"file", distill_file}, {"pairs", k}});
      }
      if (!enh_manifest.empty()) {
        const std::filesystem::path out_dir = enh_out.empty() ? in_dir : std::filesystem::path(enh_out);
        if (out_dir != in_dir) forge::rebase_image_paths(m, in_dir, out_dir);
        forge::validate_integrity(m);
        forge::write_manifest(out_dir, m, cfg.shard_size);
      }
      return kExitOk;
    }
    if (filter->parsed()) {
      if (!f_manifest.empty()) {
        const auto m = forge::read_manifest(f_manifest);
        const auto dir = std::filesystem::is_directory(f_manifest)
                             ? std::filesystem::path(f_manifest)
                             : std::filesystem::path(f_manifest).parent_path();
        std::vector<forge::FilterKind> kinds;
        if (f_kind == "all") kinds = {forge::FilterKind::Grayscale, forge::FilterKind::GrayscaleGrain,
                                      forge::FilterKind::SepiaNoise};
        else kinds = {forge::parse_filter_kind(f_kind)};
        forge::parallel_map(
            m.images.size(), cfg.workers, "filter", [&](std::size_t i) { return m.images[i].id; },
            [&](std::size_t i) {
              const auto& im = m.images[i];
              const auto pixels = forge::png::read(dir / im.file);
              const auto stem = (dir / im.file).replace_extension("");
              for (auto kind : kinds) {
                forge::FilterSpec spec = cfg.filter;
                spec.kind = kind;
                spec.seed = forge::derive_seed(f_seed, im.id);
                forge::png::write(stem.string() + std::string(forge::filter_suffix(kind)) + ".png",
                                  forge::apply(spec, pixels));
              }
              return 0;
            });
        logger.event("filter", "done", {{"images", m.images.size()}, {"kinds", kinds.size()}});
        return kExitOk;
      }
      if (f_in.empty() || f_out.empty()) throw forge::ConfigError("filter needs --in and --out, or --manifest");
      if (f_kind == "all") throw forge::ConfigError("--kind all is only valid with --manifest");
      forge::FilterSpec spec = cfg.filter;
      spec.kind = forge::parse_filter_kind(f_kind);
      spec.seed = f_seed;
      forge::png::write(f_out, forge::apply(spec, forge::png::read(f_in)));
      return kExitOk;
    }
    if (stats->parsed()) {
      const auto path = s_manifest.empty() ? cfg.out_dir : std::filesystem::path(s_manifest);
      const auto s = forge::compute_stats(forge::read_manifest(path));
      std::cout << (s_format == "json" ? forge::stats_to_json(s).dump(2) + "\n" : forge::stats_to_text(s));
      return forge::double_entry_holds(s) ? kExitOk : kExitStage;
    }
    if (eval->parsed()) {
      const auto m = forge::read_manifest(e_manifest);
      const auto samples = forge::load_eval_samples(m, e_pred, e_split);
      if (samples.empty()) throw forge::InputError("no expressions in split '" + e_split + "'");
      const auto report = forge::evaluate(samples);
      std::cout << (e_format == "json" ? forge::eval_report_json(report).dump(2) + "\n"
                                       : forge::eval_report_text(report));
      return kExitOk;
    }
  } catch (const forge::ConfigError& e) {
    logger.event("cli", "config_error", {{"error", e.what()}});
    std::cerr << "forge: config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const forge::StageError& e) {
    logger.event(e.stage(), "failed", {{"item", e.item()}, {"error", e.what()}});
    std::cerr << "forge: " << e.what() << "\n";
    return kExitStage;
  } catch (const std::exception& e) {
    logger.event("cli", "failed", {{"error", e.what()}});
    std::cerr << "forge: " << e.what() << "\n";
    return kExitStage;
  }
  return kExitOk;
}
