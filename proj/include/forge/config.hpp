#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "forge/error.hpp"
#include "forge/historic_filters.hpp"
#include "forge/ingest_tiling.hpp"
#include "forge/kv_file.hpp"
#include "forge/llm_enhancer.hpp"
#include "forge/target_graph.hpp"

namespace forge {

/// Every tunable of a pipeline run. Defaults are the reference settings.
struct PipelineConfig {
  // paths
  std::filesystem::path sources;   // input source manifest (JSON)
  std::filesystem::path work_dir = "forge-work";
  std::filesystem::path out_dir = "forge-out";
  std::filesystem::path cache_dir = "forge-cache";
  std::filesystem::path grammar;   // empty: bundled grammar

  TilingOptions tiling;
  PseudoInstanceOptions pseudo;
  TargetOptions targets;
  CueOptions cues;
  FilterSpec filter;  // kind and seed are chosen per tile
  double p_filter = 0.2;
  double test_fraction = 0.265;

  EndpointConfig enhancer;
  bool skip_enhance = false;

  std::uint64_t seed = 0;
  int workers = 1;
  std::size_t shard_size = kImagesPerShard;
};

namespace detail {

inline double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
  }
}

inline long long to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long i = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return i;
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "' expects an integer, got '" + v + "'");
  }
}

inline std::uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    if (!v.empty() && v.front() == '-') throw std::invalid_argument(v);
    const auto u = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return u;
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "' expects a non-negative integer, got '" + v + "'");
  }
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("'" + key + "' expects true or false, got '" + v + "'");
}

inline std::set<std::string> to_set(const std::string& v) {
  std::set<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto t = std::string(trim(item));
    if (!t.empty()) out.insert(t);
  }
  return out;
}

using Setter = std::function<void(PipelineConfig&, const std::string& key, const std::string& v)>;

inline const std::map<std::string, Setter>& config_setters() {
  using C = PipelineConfig;
  using S = const std::string&;
  static const std::map<std::string, Setter> kSetters{
      {"paths.sources", [](C& c, S, S v) { c.sources = v; }},
      {"paths.work_dir", [](C& c, S, S v) { c.work_dir = v; }},
      {"paths.out_dir", [](C& c, S, S v) { c.out_dir = v; }},
      {"paths.cache_dir", [](C& c, S, S v) { c.cache_dir = v; }},
      {"paths.grammar", [](C& c, S, S v) { c.grammar = v; }},
      {"tiling.window", [](C& c, S k, S v) { c.tiling.window = static_cast<int>(to_int(k, v)); }},
      {"tiling.stride", [](C& c, S k, S v) { c.tiling.stride = static_cast<int>(to_int(k, v)); }},
      {"tiling.min_keep_fraction", [](C& c, S k, S v) { c.tiling.min_keep_fraction = to_double(k, v); }},
      {"semantic.min_component_area",
       [](C& c, S k, S v) { c.pseudo.min_component_area = static_cast<std::size_t>(to_u64(k, v)); }},
      {"semantic.promote",
       [](C& c, S, S v) { c.pseudo.promote = c.targets.promoted = to_set(v); }},
      {"semantic.ignore", [](C& c, S, S v) { c.targets.ignored = to_set(v); }},
      {"clustering.eps", [](C& c, S k, S v) { c.targets.eps = to_double(k, v); }},
      {"clustering.min_pts",
       [](C& c, S k, S v) { c.targets.min_pts = static_cast<std::size_t>(to_u64(k, v)); }},
      {"clustering.max_cluster_size",
       [](C& c, S k, S v) { c.targets.max_cluster_size = static_cast<std::size_t>(to_u64(k, v)); }},
      {"color.achromatic_dominance",
       [](C& c, S k, S v) { c.cues.color.achromatic_dominance = to_double(k, v); }},
      {"color.hue_dominance", [](C& c, S k, S v) { c.cues.color.hue_dominance = to_double(k, v); }},
      {"color.light_s_max", [](C& c, S k, S v) { c.cues.color.light_s_max = to_double(k, v); }},
      {"color.light_v_min", [](C& c, S k, S v) { c.cues.color.light_v_min = to_double(k, v); }},
      {"color.dark_v_max", [](C& c, S k, S v) { c.cues.color.dark_v_max = to_double(k, v); }},
      {"relations.max_dist", [](C& c, S k, S v) { c.cues.relation_max_dist = to_double(k, v); }},
      {"filters.gamma", [](C& c, S k, S v) { c.filter.gamma = to_double(k, v); }},
      {"filters.contrast", [](C& c, S k, S v) { c.filter.contrast = to_double(k, v); }},
      {"filters.grain_sigma", [](C& c, S k, S v) { c.filter.grain_sigma = to_double(k, v); }},
      {"filters.noise_lo", [](C& c, S k, S v) { c.filter.noise_lo = to_double(k, v); }},
      {"filters.noise_hi", [](C& c, S k, S v) { c.filter.noise_hi = to_double(k, v); }},
      {"filters.p_filter", [](C& c, S k, S v) { c.p_filter = to_double(k, v); }},
      {"split.test_fraction", [](C& c, S k, S v) { c.test_fraction = to_double(k, v); }},
      {"enhancer.url", [](C& c, S, S v) { c.enhancer.url = v; }},
      {"enhancer.model", [](C& c, S, S v) { c.enhancer.model = v; }},
      {"enhancer.key", [](C& c, S, S v) { c.enhancer.api_key = v; }},
      {"enhancer.concurrency",
       [](C& c, S k, S v) { c.enhancer.concurrency = static_cast<int>(to_int(k, v)); }},
      {"enhancer.max_tries", [](C& c, S k, S v) { c.enhancer.max_tries = static_cast<int>(to_int(k, v)); }},
      {"enhancer.backoff_ms",
       [](C& c, S k, S v) { c.enhancer.backoff_base = std::chrono::milliseconds(to_int(k, v)); }},
      {"enhancer.requests_per_second",
       [](C& c, S k, S v) { c.enhancer.requests_per_second = to_double(k, v); }},
      {"enhancer.timeout_s",
       [](C& c, S k, S v) { c.enhancer.timeout = std::chrono::seconds(to_int(k, v)); }},
      {"enhancer.skip", [](C& c, S k, S v) { c.skip_enhance = to_bool(k, v); }},
      {"run.seed", [](C& c, S k, S v) { c.seed = to_u64(k, v); }},
      {"run.workers", [](C& c, S k, S v) { c.workers = static_cast<int>(to_int(k, v)); }},
      {"run.shard_size",
       [](C& c, S k, S v) { c.shard_size = static_cast<std::size_t>(to_u64(k, v)); }},
  };
  return kSetters;
}

}  // namespace detail

/// Names of all recognized config keys, `section.key`.
inline std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& [k, _] : detail::config_setters()) out.push_back(k);
  return out;
}

inline void set_config_value(PipelineConfig& c, const std::string& key, const std::string& value) {
  const auto& setters = detail::config_setters();
  auto it = setters.find(key);
  if (it == setters.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second(c, key, value);
}

inline void apply_key_values(PipelineConfig& c, const KeyValues& kv) {
  for (const auto& [k, v] : kv) set_config_value(c, k, v);
}

/// Env name of a key: `filters.p_filter` -> `FORGE_FILTERS_P_FILTER`.
inline std::string env_name(const std::string& key) {
  std::string out = "FORGE_";
  for (char ch : key) out.push_back(ch == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch))));
  return out;
}

/// Environment overrides. The enhancer's own ENHANCER_* variables count too;
/// FORGE_ENHANCER_* wins when both are set.
inline KeyValues environment_overrides() {
  KeyValues kv;
  for (const auto& [var, key] : {std::pair{"ENHANCER_URL", "enhancer.url"},
                                 std::pair{"ENHANCER_MODEL", "enhancer.model"},
                                 std::pair{"ENHANCER_KEY", "enhancer.key"}}) {
    if (const char* v = std::getenv(var)) kv[key] = v;
  }
  for (const auto& key : config_keys()) {
    if (const char* v = std::getenv(env_name(key).c_str())) kv[key] = v;
  }
  return kv;
}

inline void validate_config(const PipelineConfig& c) {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  auto unit = [](double x) { return x >= 0.0 && x <= 1.0; };
  need(c.tiling.window > 0, "tiling.window must be positive");
  need(c.tiling.stride > 0 && c.tiling.stride <= c.tiling.window,
       "tiling.stride must be in (0, window]");
  need(unit(c.tiling.min_keep_fraction), "tiling.min_keep_fraction must be in [0,1]");
  need(c.targets.eps > 0, "clustering.eps must be positive");
  need(c.targets.min_pts >= 1, "clustering.min_pts must be at least 1");
  need(c.targets.max_cluster_size >= 2, "clustering.max_cluster_size must be at least 2");
  need(unit(c.cues.color.achromatic_dominance) && c.cues.color.achromatic_dominance > 0.5,
       "color.achromatic_dominance must be in (0.5,1]");
  need(unit(c.cues.color.hue_dominance) && c.cues.color.hue_dominance > 0.5,
       "color.hue_dominance must be in (0.5,1]");
  need(unit(c.cues.color.light_s_max) && unit(c.cues.color.light_v_min) &&
           unit(c.cues.color.dark_v_max),
       "color saturation/value thresholds must be in [0,1]");
  need(c.cues.color.dark_v_max < c.cues.color.light_v_min, "color.dark_v_max must be below light_v_min");
  need(c.cues.relation_max_dist > 0, "relations.max_dist must be positive");
  need(c.filter.gamma > 0, "filters.gamma must be positive");
  need(c.filter.contrast >= 0, "filters.contrast must be non-negative");
  need(c.filter.grain_sigma >= 0, "filters.grain_sigma must be non-negative");
  need(c.filter.noise_lo <= c.filter.noise_hi, "filters.noise_lo must not exceed noise_hi");
  need(unit(c.p_filter), "filters.p_filter must be in [0,1]");
  need(c.test_fraction > 0 && c.test_fraction < 1, "split.test_fraction must be in (0,1)");
  need(c.enhancer.concurrency >= 1, "enhancer.concurrency must be at least 1");
  need(c.enhancer.max_tries >= 1, "enhancer.max_tries must be at least 1");
  need(c.enhancer.backoff_base.count() >= 0, "enhancer.backoff_ms must be non-negative");
  need(c.enhancer.requests_per_second >= 0, "enhancer.requests_per_second must be non-negative");
  need(c.workers >= 1, "run.workers must be at least 1");
  need(c.shard_size >= 1, "run.shard_size must be at least 1");
}

/// File, then environment, then explicit overrides (e.g. from flags).
inline PipelineConfig load_config(const std::filesystem::path& file,
                                  const KeyValues& overrides = {}) {
  PipelineConfig c;
  if (!file.empty()) {
    apply_key_values(c, load_key_values(file));
    // relative paths in the file are relative to the file
    const auto base = file.parent_path();
    for (auto* p : {&c.sources, &c.work_dir, &c.out_dir, &c.cache_dir, &c.grammar}) {
      if (!p->empty() && p->is_relative()) *p = base / *p;
    }
  }
  apply_key_values(c, environment_overrides());
  apply_key_values(c, overrides);
  validate_config(c);
  return c;
}

/// The config as a key-value document that `load_config` reads back.
inline std::string config_to_text(const PipelineConfig& c) {
  std::ostringstream o;
  auto set_str = [](const std::set<std::string>& s) {
    std::string out;
    for (const auto& x : s) out += (out.empty() ? "" : ",") + x;
    return out;
  };
  o << "[paths]\nsources = \"" << c.sources.string() << "\"\nwork_dir = \"" << c.work_dir.string()
    << "\"\nout_dir = \"" << c.out_dir.string() << "\"\ncache_dir = \"" << c.cache_dir.string()
    << "\"\ngrammar = \"" << c.grammar.string() << "\"\n\n";
  o << "[tiling]\nwindow = " << c.tiling.window << "\nstride = " << c.tiling.stride
    << "\nmin_keep_fraction = " << c.tiling.min_keep_fraction << "\n\n";
  o << "[semantic]\nmin_component_area = " << c.pseudo.min_component_area << "\npromote = \""
    << set_str(c.pseudo.promote) << "\"\nignore = \"" << set_str(c.targets.ignored) << "\"\n\n";
  o << "[clustering]\neps = " << c.targets.eps << "\nmin_pts = " << c.targets.min_pts
    << "\nmax_cluster_size = " << c.targets.max_cluster_size << "\n\n";
  o << "[color]\nachromatic_dominance = " << c.cues.color.achromatic_dominance
    << "\nhue_dominance = " << c.cues.color.hue_dominance << "\nlight_s_max = " << c.cues.color.light_s_max
    << "\nlight_v_min = " << c.cues.color.light_v_min << "\ndark_v_max = " << c.cues.color.dark_v_max
    << "\n\n";
  o << "[relations]\nmax_dist = " << c.cues.relation_max_dist << "\n\n";
  o << "[filters]\ngamma = " << c.filter.gamma << "\ncontrast = " << c.filter.contrast
    << "\ngrain_sigma = " << c.filter.grain_sigma << "\nnoise_lo = " << c.filter.noise_lo
    << "\nnoise_hi = " << c.filter.noise_hi << "\np_filter = " << c.p_filter << "\n\n";
  o << "[split]\ntest_fraction = " << c.test_fraction << "\n\n";
  o << "[enhancer]\nurl = \"" << c.enhancer.url << "\"\nmodel = \"" << c.enhancer.model
    << "\"\nconcurrency = " << c.enhancer.concurrency << "\nmax_tries = " << c.enhancer.max_tries
    << "\nbackoff_ms = " << c.enhancer.backoff_base.count()
    << "\nrequests_per_second = " << c.enhancer.requests_per_second
    << "\ntimeout_s = " << c.enhancer.timeout.count() << "\nskip = " << (c.skip_enhance ? "true" : "false")
    << "\n\n";
  o << "[run]\nseed = " << c.seed << "\nworkers = " << c.workers << "\nshard_size = " << c.shard_size
    << "\n";
  return o.str();
}

}  // namespace forge
