#include <cstdlib>
#include <fstream>

#include <gtest/gtest.h>

#include "forge/config.hpp"
#include "support.hpp"

using namespace forge;

namespace {

// Clears every variable the config reads so the host environment can't leak in.
void clear_env() {
  for (const auto& k : config_keys()) unsetenv(env_name(k).c_str());
  for (const char* v : {"ENHANCER_URL", "ENHANCER_MODEL", "ENHANCER_KEY"}) unsetenv(v);
}

struct EnvGuard {
  EnvGuard() { clear_env(); }
  ~EnvGuard() { clear_env(); }
};

std::filesystem::path write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p) << text;
  return p;
}

}  // namespace

TEST(Config, DefaultsValidate) {
  EnvGuard env;
  const auto c = load_config({});
  EXPECT_EQ(c.tiling.window, 480);
  EXPECT_EQ(c.tiling.stride, 384);
  EXPECT_DOUBLE_EQ(c.p_filter, 0.2);
  EXPECT_EQ(c.workers, 1);
  EXPECT_EQ(c.seed, 0u);
  EXPECT_EQ(c.work_dir, "forge-work");
}

TEST(Config, EnvName) {
  EXPECT_EQ(env_name("filters.p_filter"), "FORGE_FILTERS_P_FILTER");
  EXPECT_EQ(env_name("run.workers"), "FORGE_RUN_WORKERS");
}

TEST(Config, FileThenEnvThenOverrides) {
  EnvGuard env;
  const auto dir = test::scratch_dir("config-precedence");
  const auto file = write_file(dir / "forge.toml",
                               "# comment\n[run]\nseed = 11\nworkers = 2\n\n[filters]\np_filter = 0.3\n"
                               "gamma = 1.4 # trailing\n[enhancer]\nurl = \"http://file\"\n");
  auto c = load_config(file);
  EXPECT_EQ(c.seed, 11u);
  EXPECT_EQ(c.workers, 2);
  EXPECT_DOUBLE_EQ(c.p_filter, 0.3);
  EXPECT_DOUBLE_EQ(c.filter.gamma, 1.4);
  EXPECT_EQ(c.enhancer.url, "http://file");

  setenv("FORGE_RUN_SEED", "12", 1);
  setenv("ENHANCER_URL", "http://plain-env", 1);
  c = load_config(file);
  EXPECT_EQ(c.seed, 12u);
  EXPECT_EQ(c.workers, 2);
  EXPECT_EQ(c.enhancer.url, "http://plain-env");

  setenv("FORGE_ENHANCER_URL", "http://forge-env", 1);
  c = load_config(file);
  EXPECT_EQ(c.enhancer.url, "http://forge-env");

  c = load_config(file, {{"run.seed", "13"}, {"enhancer.url", "http://flag"}});
  EXPECT_EQ(c.seed, 13u);
  EXPECT_EQ(c.enhancer.url, "http://flag");
  EXPECT_DOUBLE_EQ(c.p_filter, 0.3);
}

TEST(Config, RelativePathsFollowTheFile) {
  EnvGuard env;
  const auto dir = test::scratch_dir("config-paths");
  const auto file = write_file(dir / "forge.toml",
                               "[paths]\nsources = \"data/sources.json\"\nwork_dir = \"/abs/work\"\n");
  const auto c = load_config(file);
  EXPECT_EQ(c.sources, dir / "data/sources.json");
  EXPECT_EQ(c.work_dir, "/abs/work");
  EXPECT_EQ(c.out_dir, dir / "forge-out");
}

TEST(Config, UnknownKeyAndBadValues) {
  EnvGuard env;
  EXPECT_THROW(load_config({}, {{"tiling.windw", "480"}}), ConfigError);
  EXPECT_THROW(load_config({}, {{"run.workers", "two"}}), ConfigError);
  EXPECT_THROW(load_config({}, {{"run.seed", "-1"}}), ConfigError);
  EXPECT_THROW(load_config({}, {{"enhancer.skip", "maybe"}}), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/forge.toml"), ConfigError);

  const auto dir = test::scratch_dir("config-syntax");
  EXPECT_THROW(load_config(write_file(dir / "a.toml", "[run\nseed = 1\n")), ConfigError);
  EXPECT_THROW(load_config(write_file(dir / "b.toml", "seed 1\n")), ConfigError);
  EXPECT_THROW(load_config(write_file(dir / "c.toml", "[enhancer]\nurl = \"x\n")), ConfigError);
}

TEST(Config, ValidationRejectsBadCombinations) {
  EnvGuard env;
  const std::vector<std::pair<std::string, std::string>> bad{
      {"tiling.stride", "481"},          {"tiling.stride", "0"},
      {"filters.p_filter", "1.5"},       {"filters.p_filter", "-0.1"},
      {"split.test_fraction", "0"},      {"split.test_fraction", "1"},
      {"color.hue_dominance", "0.5"},    {"color.achromatic_dominance", "1.2"},
      {"color.dark_v_max", "0.9"},       {"run.workers", "0"},
      {"clustering.max_cluster_size", "1"}, {"filters.gamma", "0"},
      {"run.shard_size", "0"},           {"enhancer.max_tries", "0"},
  };
  for (const auto& [k, v] : bad) EXPECT_THROW(load_config({}, {{k, v}}), ConfigError) << k << "=" << v;
  EXPECT_NO_THROW(load_config({}, {{"tiling.stride", "480"}}));
  EXPECT_NO_THROW(load_config({}, {{"filters.p_filter", "1"}}));
  EXPECT_THROW(load_config({}, {{"filters.noise_lo", "30"}, {"filters.noise_hi", "10"}}), ConfigError);
}

TEST(Config, TextRoundTrip) {
  EnvGuard env;
  PipelineConfig c = load_config({}, {{"paths.sources", "/d/sources.json"},
                                      {"paths.work_dir", "/w"},
                                      {"paths.out_dir", "/o"},
                                      {"paths.cache_dir", "/c"},
                                      {"tiling.stride", "300"},
                                      {"semantic.promote", "building,road"},
                                      {"clustering.eps", "42.5"},
                                      {"filters.grain_sigma", "0.07"},
                                      {"enhancer.url", "http://x/v1"},
                                      {"enhancer.key", "secret"},
                                      {"enhancer.skip", "true"},
                                      {"run.seed", "99"}});
  const std::string text = config_to_text(c);
  EXPECT_EQ(text.find("secret"), std::string::npos);

  const auto dir = test::scratch_dir("config-roundtrip");
  const auto back = load_config(write_file(dir / "forge.toml", text));
  EXPECT_EQ(config_to_text(back), text);
  EXPECT_EQ(back.tiling.stride, 300);
  EXPECT_EQ(back.pseudo.promote, (std::set<std::string>{"building", "road"}));
  EXPECT_EQ(back.targets.promoted, back.pseudo.promote);
  EXPECT_DOUBLE_EQ(back.targets.eps, 42.5);
  EXPECT_TRUE(back.skip_enhance);
  EXPECT_EQ(back.seed, 99u);
  EXPECT_TRUE(back.enhancer.api_key.empty());
}
