#pragma once

#include <algorithm>
#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "forge/default_assets.hpp"
#include "forge/error.hpp"
#include "forge/kv_file.hpp"
#include "forge/target_graph.hpp"

namespace forge {

enum class ExpressionSource { Rule, LlmLanguage, LlmVisual };

inline std::string_view to_string(ExpressionSource s) {
  switch (s) {
    case ExpressionSource::Rule: return "rule";
    case ExpressionSource::LlmLanguage: return "llm_language";
    case ExpressionSource::LlmVisual: return "llm_visual";
  }
  return "rule";
}

inline ExpressionSource parse_expression_source(std::string_view s) {
  if (s == "rule") return ExpressionSource::Rule;
  if (s == "llm_language") return ExpressionSource::LlmLanguage;
  if (s == "llm_visual") return ExpressionSource::LlmVisual;
  throw InputError("unknown expression source '" + std::string(s) + "'");
}

struct Expression {
  std::string id;
  std::string text;
  std::string target_id;
  ExpressionSource source = ExpressionSource::Rule;
  std::optional<std::string> parent_id;

  friend bool operator==(const Expression&, const Expression&) = default;
};

/// English plural of the last word of `name`.
inline std::string pluralize(const std::string& name) {
  if (name.empty()) return name;
  auto ends = [&](std::string_view suf) {
    return name.size() >= suf.size() && name.compare(name.size() - suf.size(), suf.size(), suf) == 0;
  };
  if (ends("s") || ends("x") || ends("z") || ends("ch") || ends("sh")) return name + "es";
  if (ends("y") && name.size() >= 2 && std::string_view("aeiou").find(name[name.size() - 2]) ==
                                           std::string_view::npos) {
    return name.substr(0, name.size() - 1) + "ies";
  }
  return name + "s";
}

/// Template set for rule expressions, loaded from a grammar file.
class Grammar {
 public:
  Grammar() : Grammar(parse_key_values(assets::kDefaultGrammar, "<default grammar>")) {}

  explicit Grammar(const KeyValues& kv) {
    version_ = get(kv, "version");
    instance_ = checked(kv, "instance", {"category", "grid"});
    instance_color_ = checked(kv, "instance_color", {"category", "grid", "color"});
    relation_ = checked(kv, "relation", {"base", "direction", "landmark"});
    extreme_ = checked(kv, "extreme", {"category", "extreme"});
    extreme_color_ = checked(kv, "extreme_color", {"category", "extreme", "color"});
    cluster_ = checked(kv, "cluster", {"count", "categories", "category", "grid"});
    class_group_ = checked(kv, "class_group", {"categories", "category"});
    semantic_region_ = checked(kv, "semantic_region", {"class"});
    for (int d = 0; d < 8; ++d) {
      const std::string key = "direction." + std::string(to_string(static_cast<Direction>(d)));
      directions_[d] = get(kv, key);
    }
    for (const auto& [k, v] : kv) {
      if (k.rfind("plural.", 0) == 0) plurals_[k.substr(7)] = v;
    }
  }

  static Grammar load(const std::filesystem::path& path) { return Grammar(load_key_values(path)); }

  const std::string& version() const noexcept { return version_; }

  std::string plural(const std::string& category) const {
    auto it = plurals_.find(category);
    return it != plurals_.end() ? it->second : pluralize(category);
  }

  std::string instance(const std::string& category, GridCell grid,
                       const std::optional<std::string>& color) const {
    return fill(color ? instance_color_ : instance_,
                {{"category", category}, {"grid", std::string(to_string(grid))},
                 {"color", color.value_or("")}});
  }
  std::string relation(const std::string& base, Direction d, const std::string& landmark) const {
    return fill(relation_, {{"base", base},
                            {"direction", directions_[static_cast<int>(d)]},
                            {"landmark", landmark}});
  }
  std::string extreme(const std::string& category, Extreme e,
                      const std::optional<std::string>& color) const {
    return fill(color ? extreme_color_ : extreme_,
                {{"category", category}, {"extreme", std::string(to_string(e))},
                 {"color", color.value_or("")}});
  }
  std::string cluster(const std::string& category, std::size_t count, GridCell grid) const {
    return fill(cluster_, {{"category", category}, {"categories", plural(category)},
                           {"count", std::to_string(count)},
                           {"grid", std::string(to_string(grid))}});
  }
  std::string class_group(const std::string& category) const {
    return fill(class_group_, {{"category", category}, {"categories", plural(category)}});
  }
  std::string semantic_region(const std::string& cls) const {
    return fill(semantic_region_, {{"class", cls}});
  }

 private:
  static std::string get(const KeyValues& kv, const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end() || it->second.empty()) throw ConfigError("grammar is missing '" + key + "'");
    return it->second;
  }

  static std::string checked(const KeyValues& kv, const std::string& key,
                             std::set<std::string> allowed) {
    std::string tpl = get(kv, key);
    std::size_t pos = 0;
    while ((pos = tpl.find('{', pos)) != std::string::npos) {
      const auto close = tpl.find('}', pos);
      if (close == std::string::npos) throw ConfigError("grammar '" + key + "': unclosed slot");
      const std::string slot = tpl.substr(pos + 1, close - pos - 1);
      if (!allowed.contains(slot)) {
        throw ConfigError("grammar '" + key + "': slot {" + slot + "} is not allowed here");
      }
      pos = close + 1;
    }
    return tpl;
  }

  static std::string fill(const std::string& tpl, const std::map<std::string, std::string>& slots) {
    std::string out;
    std::size_t pos = 0;
    while (pos < tpl.size()) {
      const auto open = tpl.find('{', pos);
      if (open == std::string::npos) {
        out.append(tpl, pos, std::string::npos);
        break;
      }
      out.append(tpl, pos, open - pos);
      const auto close = tpl.find('}', open);
      out += slots.at(tpl.substr(open + 1, close - open - 1));
      pos = close + 1;
    }
    return out;
  }

  std::string version_;
  std::string instance_, instance_color_, relation_, extreme_, extreme_color_;
  std::string cluster_, class_group_, semantic_region_;
  std::array<std::string, 8> directions_;
  std::map<std::string, std::string> plurals_;
};

/// Every rule expression for one target. For single instances the base phrase
/// (with and without color) is crossed with "no relation" plus each relation,
/// followed by the extreme-position variants.
inline std::vector<std::string> rule_expression_texts(const Target& target, const CueSet& cues,
                                                      const Grammar& g) {
  std::vector<std::string> out;
  switch (target.kind) {
    case TargetKind::Instance: {
      std::vector<std::string> bases{g.instance(cues.category_name, cues.grid_cell, std::nullopt)};
      if (cues.color) bases.push_back(g.instance(cues.category_name, cues.grid_cell, cues.color));
      out = bases;
      for (const auto& r : cues.relations) {
        for (const auto& b : bases) out.push_back(g.relation(b, r.direction, r.neighbor_category));
      }
      for (Extreme e : cues.extremes) {
        out.push_back(g.extreme(cues.category_name, e, std::nullopt));
        if (cues.color) out.push_back(g.extreme(cues.category_name, e, cues.color));
      }
      break;
    }
    case TargetKind::Cluster:
      out.push_back(g.cluster(cues.category_name, target.members.size(), cues.grid_cell));
      break;
    case TargetKind::ClassGroup:
      out.push_back(g.class_group(cues.category_name));
      break;
    case TargetKind::SemanticRegion:
      out.push_back(g.semantic_region(cues.category_name));
      break;
  }
  return out;
}

inline std::vector<Expression> generate_rule_expressions(const Target& target, const CueSet& cues,
                                                         const Grammar& g = Grammar()) {
  std::vector<Expression> out;
  std::set<std::string> seen;
  for (auto& text : rule_expression_texts(target, cues, g)) {
    if (!seen.insert(text).second) continue;
    out.push_back({target.id + "_r" + std::to_string(out.size()), std::move(text), target.id,
                   ExpressionSource::Rule, std::nullopt});
  }
  return out;
}

/// Drops every text that refers to more than one target within an image, and
/// repeated texts within a single target. Order is preserved.
inline std::vector<Expression> dedupe_image(const std::vector<Expression>& exprs) {
  std::map<std::string, std::set<std::string>> owners;
  for (const auto& e : exprs) owners[e.text].insert(e.target_id);
  std::vector<Expression> kept;
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& e : exprs) {
    if (owners[e.text].size() > 1) continue;
    if (!seen.emplace(e.target_id, e.text).second) continue;
    kept.push_back(e);
  }
  return kept;
}

}  // namespace forge
