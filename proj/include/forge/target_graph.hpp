#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "forge/error.hpp"
#include "forge/image.hpp"
#include "forge/ingest_tiling.hpp"

namespace forge {

enum class TargetKind { Instance, Cluster, ClassGroup, SemanticRegion };

inline std::string_view to_string(TargetKind k) {
  switch (k) {
    case TargetKind::Instance: return "instance";
    case TargetKind::Cluster: return "cluster";
    case TargetKind::ClassGroup: return "class_group";
    case TargetKind::SemanticRegion: return "semantic_region";
  }
  return "instance";
}

inline TargetKind parse_target_kind(std::string_view s) {
  if (s == "instance") return TargetKind::Instance;
  if (s == "cluster") return TargetKind::Cluster;
  if (s == "class_group") return TargetKind::ClassGroup;
  if (s == "semantic_region") return TargetKind::SemanticRegion;
  throw InputError("unknown target kind '" + std::string(s) + "'");
}

struct Target {
  std::string id;
  TargetKind kind = TargetKind::Instance;
  std::string category;
  Mask mask;
  BBox bbox;
  std::vector<std::string> members;  // member target ids (cluster / class_group)
};

// ---------------------------------------------------------------------------
// Edge distance

/// Boundary pixels and box of a mask, precomputed for repeated distance queries.
struct MaskShape {
  const Mask* mask = nullptr;
  BBox box;
  std::vector<std::pair<int, int>> boundary;

  explicit MaskShape(const Mask& m) : mask(&m), box(m.bbox()) {
    if (!box.valid()) return;
    for (int y = box.y0; y <= box.y1; ++y) {
      for (int x = box.x0; x <= box.x1; ++x) {
        if (!m.get(x, y)) continue;
        const bool edge = x == 0 || y == 0 || x == m.width() - 1 || y == m.height() - 1 ||
                          !m.get(x - 1, y) || !m.get(x + 1, y) || !m.get(x, y - 1) ||
                          !m.get(x, y + 1);
        if (edge) boundary.emplace_back(x, y);
      }
    }
  }
};

namespace detail {

inline double box_gap_sq(int x, int y, const BBox& b) {
  const double dx = x < b.x0 ? b.x0 - x : (x > b.x1 ? x - b.x1 : 0);
  const double dy = y < b.y0 ? b.y0 - y : (y > b.y1 ? y - b.y1 : 0);
  return dx * dx + dy * dy;
}

inline bool masks_overlap(const MaskShape& a, const MaskShape& b) {
  const int x0 = std::max(a.box.x0, b.box.x0), x1 = std::min(a.box.x1, b.box.x1);
  const int y0 = std::max(a.box.y0, b.box.y0), y1 = std::min(a.box.y1, b.box.y1);
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x)
      if (a.mask->get(x, y) && b.mask->get(x, y)) return true;
  return false;
}

}  // namespace detail

/// Minimum Euclidean distance between boundary pixel centers of two masks,
/// 0 when they share a pixel.
inline double edge_distance(const MaskShape& a, const MaskShape& b) {
  if (a.boundary.empty() || b.boundary.empty()) {
    throw InputError("edge_distance requires two non-empty masks");
  }
  if (a.mask->width() != b.mask->width() || a.mask->height() != b.mask->height()) {
    throw InputError("edge_distance requires masks of equal size");
  }
  if (detail::masks_overlap(a, b)) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (auto [ax, ay] : a.boundary) {
    if (detail::box_gap_sq(ax, ay, b.box) >= best) continue;
    for (auto [bx, by] : b.boundary) {
      const double dx = ax - bx, dy = ay - by;
      best = std::min(best, dx * dx + dy * dy);
    }
  }
  return std::sqrt(best);
}

inline double edge_distance(const Mask& a, const Mask& b) {
  return edge_distance(MaskShape(a), MaskShape(b));
}

// ---------------------------------------------------------------------------
// DBSCAN

inline constexpr int kNoise = -1;

/// DBSCAN over a precomputed symmetric neighbourhood relation (`adj[i][j]`
/// means i is within eps of j). Points are visited in index order, so a border
/// point reachable from several clusters joins the one created first.
/// Returns one cluster id per point, or kNoise.
inline std::vector<int> dbscan(const std::vector<std::vector<bool>>& adj, std::size_t min_pts) {
  const std::size_t n = adj.size();
  constexpr int kUnvisited = -2;
  std::vector<int> label(n, kUnvisited);
  auto neighbours = [&](std::size_t p) {
    std::vector<std::size_t> out;
    for (std::size_t q = 0; q < n; ++q)
      if (q == p || adj[p][q]) out.push_back(q);
    return out;
  };
  int cluster = 0;
  for (std::size_t p = 0; p < n; ++p) {
    if (label[p] != kUnvisited) continue;
    auto seeds = neighbours(p);
    if (seeds.size() < min_pts) {
      label[p] = kNoise;
      continue;
    }
    label[p] = cluster;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      const std::size_t q = seeds[i];
      if (label[q] == kNoise) label[q] = cluster;
      if (label[q] != kUnvisited) continue;
      label[q] = cluster;
      auto nq = neighbours(q);
      if (nq.size() >= min_pts) seeds.insert(seeds.end(), nq.begin(), nq.end());
    }
    ++cluster;
  }
  return label;
}

// ---------------------------------------------------------------------------
// Targets

struct TargetOptions {
  double eps = 50.0;
  std::size_t min_pts = 2;
  std::size_t max_cluster_size = 8;
  /// Semantic classes promoted to instances; never emitted as regions.
  std::set<std::string> promoted{"building", "water"};
  /// Semantic classes that are never described.
  std::set<std::string> ignored{"background", "no-data", "nodata"};
};

inline Target make_instance_target(const std::string& tile_id, const Instance& inst) {
  return {tile_id + "_i" + inst.id, TargetKind::Instance, inst.category, inst.mask,
          inst.mask.bbox(), {}};
}

inline Target make_group_target(std::string id, TargetKind kind, const std::string& category,
                                const std::vector<const Target*>& members) {
  Target t{std::move(id), kind, category, Mask(members.front()->mask.width(),
                                                members.front()->mask.height()),
           {}, {}};
  for (const Target* m : members) {
    t.mask |= m->mask;
    t.members.push_back(m->id);
  }
  t.bbox = t.mask.bbox();
  return t;
}

/// All addressable targets of a tile: instances, DBSCAN clusters of same-category
/// instances, class groups, and semantic regions. Order is deterministic.
inline std::vector<Target> build_targets(const Tile& tile, const TargetOptions& opt = {}) {
  std::vector<Target> out;
  for (const auto& inst : tile.instances) {
    if (inst.mask.none()) continue;
    out.push_back(make_instance_target(tile.id, inst));
  }

  std::map<std::string, std::vector<std::size_t>> by_category;
  for (std::size_t i = 0; i < out.size(); ++i) by_category[out[i].category].push_back(i);

  std::vector<Target> clusters;
  std::vector<Target> groups;
  for (const auto& [category, idx] : by_category) {
    if (idx.size() >= 2) {
      std::vector<MaskShape> shapes;
      shapes.reserve(idx.size());
      for (std::size_t i : idx) shapes.emplace_back(out[i].mask);
      std::vector<std::vector<bool>> adj(idx.size(), std::vector<bool>(idx.size(), false));
      for (std::size_t a = 0; a < idx.size(); ++a) {
        for (std::size_t b = a + 1; b < idx.size(); ++b) {
          const bool near = edge_distance(shapes[a], shapes[b]) <= opt.eps;
          adj[a][b] = adj[b][a] = near;
        }
      }
      const auto labels = dbscan(adj, opt.min_pts);
      const int n_clusters = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
      for (int c = 0; c < n_clusters; ++c) {
        std::vector<const Target*> members;
        for (std::size_t k = 0; k < idx.size(); ++k)
          if (labels[k] == c) members.push_back(&out[idx[k]]);
        if (members.size() < 2 || members.size() > opt.max_cluster_size) continue;
        clusters.push_back(make_group_target(
            tile.id + "_c" + std::to_string(clusters.size()), TargetKind::Cluster, category, members));
      }

      std::vector<const Target*> all;
      for (std::size_t i : idx) all.push_back(&out[i]);
      groups.push_back(make_group_target(tile.id + "_g" + std::to_string(groups.size()),
                                         TargetKind::ClassGroup, category, all));
    }
  }
  for (auto& c : clusters) out.push_back(std::move(c));
  for (auto& g : groups) out.push_back(std::move(g));

  if (tile.labels) {
    std::array<std::size_t, 256> hist{};
    for (auto v : tile.labels->pixels()) ++hist[v];
    for (const auto& [cls, name] : tile.legend) {
      if (hist[cls] == 0 || opt.promoted.contains(name) || opt.ignored.contains(name)) continue;
      Mask m = mask_of_class(*tile.labels, cls);
      BBox box = m.bbox();
      out.push_back({tile.id + "_s" + std::to_string(cls), TargetKind::SemanticRegion, name,
                     std::move(m), box, {}});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cues

enum class GridCell {
  TopLeft, TopCenter, TopRight,
  CenterLeft, Center, CenterRight,
  BottomLeft, BottomCenter, BottomRight
};

inline std::string_view to_string(GridCell g) {
  static constexpr std::array<std::string_view, 9> kNames = {
      "top-left",    "top-center", "top-right",     "center-left", "center",
      "center-right", "bottom-left", "bottom-center", "bottom-right"};
  return kNames[static_cast<int>(g)];
}

/// 3x3 cell holding the box center. Bins are [0,s/3), [s/3,2s/3), [2s/3,s].
inline GridCell grid_position(const BBox& box, int tile_size = kTileSize) {
  const Point2 c = box.center();
  auto bin = [&](double v) {
    const double third = tile_size / 3.0;
    if (v < third) return 0;
    if (v < 2 * third) return 1;
    return 2;
  };
  return static_cast<GridCell>(bin(c.y) * 3 + bin(c.x));
}

enum class Extreme { Topmost, Bottommost, Leftmost, Rightmost };

inline std::string_view to_string(Extreme e) {
  switch (e) {
    case Extreme::Topmost: return "topmost";
    case Extreme::Bottommost: return "bottommost";
    case Extreme::Leftmost: return "leftmost";
    case Extreme::Rightmost: return "rightmost";
  }
  return "topmost";
}

/// Per-box extreme flags within one category. A flag goes to the unique box
/// whose center is extremal on that axis; ties give no flag.
inline std::vector<std::vector<Extreme>> extreme_flags(const std::vector<BBox>& boxes) {
  std::vector<std::vector<Extreme>> flags(boxes.size());
  if (boxes.size() < 2) return flags;
  auto assign = [&](Extreme e, auto key, bool want_min) {
    double best = want_min ? std::numeric_limits<double>::infinity()
                           : -std::numeric_limits<double>::infinity();
    for (const auto& b : boxes) {
      const double v = key(b.center());
      best = want_min ? std::min(best, v) : std::max(best, v);
    }
    std::size_t hits = 0, at = 0;
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      if (key(boxes[i].center()) == best) {
        ++hits;
        at = i;
      }
    }
    if (hits == 1) flags[at].push_back(e);
  };
  auto ky = [](Point2 p) { return p.y; };
  auto kx = [](Point2 p) { return p.x; };
  assign(Extreme::Topmost, ky, true);
  assign(Extreme::Bottommost, ky, false);
  assign(Extreme::Leftmost, kx, true);
  assign(Extreme::Rightmost, kx, false);
  return flags;
}

struct Hsv {
  double h = 0.0;  // degrees [0,360)
  double s = 0.0;  // [0,1]
  double v = 0.0;  // [0,1]
};

inline Hsv rgb_to_hsv(std::uint8_t r8, std::uint8_t g8, std::uint8_t b8) {
  const double r = r8 / 255.0, g = g8 / 255.0, b = b8 / 255.0;
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double d = mx - mn;
  Hsv out{0.0, mx > 0 ? d / mx : 0.0, mx};
  if (d > 0) {
    double h;
    if (mx == r) h = 60.0 * std::fmod((g - b) / d, 6.0);
    else if (mx == g) h = 60.0 * ((b - r) / d + 2.0);
    else h = 60.0 * ((r - g) / d + 4.0);
    if (h < 0) h += 360.0;
    out.h = h;
  }
  return out;
}

struct ColorOptions {
  double light_s_max = 0.2;
  double light_v_min = 0.85;
  double dark_v_max = 0.25;
  double achromatic_dominance = 0.70;
  double hue_dominance = 0.60;
  std::set<std::string> uncolored{"building", "water"};
};

/// Hue bin name for a chromatic pixel.
inline std::string_view hue_name(double h) {
  if (h >= 345.0 || h < 15.0) return "red";
  if (h < 45.0) return "orange";
  if (h < 75.0) return "yellow";
  if (h < 165.0) return "green";
  if (h < 255.0) return "blue";
  return "purple";
}

/// Color word for the pixels under `mask`, if one dominates clearly enough.
inline std::optional<std::string> color_classify(const Image8& rgb, const Mask& mask,
                                                 const std::string& category,
                                                 const ColorOptions& opt = {}) {
  if (opt.uncolored.contains(category)) return std::nullopt;
  std::size_t total = 0, light = 0, dark = 0, chromatic = 0;
  std::map<std::string_view, std::size_t> hues;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask.get(x, y)) continue;
      ++total;
      const Hsv p = rgb_to_hsv(rgb.at(x, y, 0), rgb.at(x, y, 1), rgb.at(x, y, 2));
      if (p.v <= opt.dark_v_max) {
        ++dark;
      } else if (p.s <= opt.light_s_max) {
        if (p.v >= opt.light_v_min) ++light;
      } else {
        ++chromatic;
        ++hues[hue_name(p.h)];
      }
    }
  }
  if (total == 0) return std::nullopt;
  if (light >= opt.achromatic_dominance * total) return "light";
  if (dark >= opt.achromatic_dominance * total) return "dark";
  if (chromatic == 0) return std::nullopt;
  for (const auto& [name, n] : hues) {
    if (n >= opt.hue_dominance * chromatic) return std::string(name);
  }
  return std::nullopt;
}

/// Eight compass sectors in counter-clockwise order starting at +x.
enum class Direction { Right, TopRight, Top, TopLeft, Left, BottomLeft, Bottom, BottomRight };

inline std::string_view to_string(Direction d) {
  static constexpr std::array<std::string_view, 8> kNames = {
      "right", "top-right", "top", "top-left", "left", "bottom-left", "bottom", "bottom-right"};
  return kNames[static_cast<int>(d)];
}

/// Sector of the offset (dx, dy) in image coordinates (y down). Sector k covers
/// [45k - 22.5, 45k + 22.5) degrees measured counter-clockwise from +x.
inline Direction direction_of(double dx, double dy) {
  double deg = std::atan2(-dy, dx) * 180.0 / 3.14159265358979323846;
  if (deg < 0) deg += 360.0;
  const int k = static_cast<int>(std::floor((deg + 22.5) / 45.0)) % 8;
  return static_cast<Direction>(k);
}

struct Relation {
  Direction direction = Direction::Right;
  std::string neighbor_id;
  std::string neighbor_category;
  friend bool operator==(const Relation&, const Relation&) = default;
};

/// Where `subject` sits relative to each nearby landmark (center distance at
/// most `max_dist`).
inline std::vector<Relation> directional_relations(const Target& subject,
                                                   const std::vector<const Target*>& others,
                                                   double max_dist) {
  std::vector<Relation> out;
  const Point2 s = subject.bbox.center();
  for (const Target* o : others) {
    if (o->id == subject.id) continue;
    const Point2 n = o->bbox.center();
    const double dx = s.x - n.x, dy = s.y - n.y;
    if (dx == 0 && dy == 0) continue;
    if (std::hypot(dx, dy) > max_dist) continue;
    out.push_back({direction_of(dx, dy), o->id, o->category});
  }
  return out;
}

struct CueSet {
  std::string category_name;
  GridCell grid_cell = GridCell::Center;
  std::vector<Extreme> extremes;
  std::optional<std::string> color;
  std::vector<Relation> relations;
};

struct CueOptions {
  ColorOptions color;
  double relation_max_dist = 200.0;
};

/// Cue sets for every target of a tile, aligned with `targets`. Color, extreme
/// and relational cues are only extracted for single instances; relations that
/// would read identically (same direction, same landmark category) are merged.
inline std::vector<CueSet> extract_cues(const Tile& tile, const std::vector<Target>& targets,
                                        const CueOptions& opt = {}) {
  std::vector<CueSet> cues(targets.size());
  std::vector<const Target*> singles;
  std::map<std::string, std::vector<std::size_t>> by_category;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    cues[i].category_name = targets[i].category;
    cues[i].grid_cell = grid_position(targets[i].bbox, tile.pixels.width());
    if (targets[i].kind == TargetKind::Instance) {
      singles.push_back(&targets[i]);
      by_category[targets[i].category].push_back(i);
    }
  }
  for (const auto& [category, idx] : by_category) {
    std::vector<BBox> boxes;
    for (std::size_t i : idx) boxes.push_back(targets[i].bbox);
    const auto flags = extreme_flags(boxes);
    for (std::size_t k = 0; k < idx.size(); ++k) cues[idx[k]].extremes = flags[k];
  }
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i].kind != TargetKind::Instance) continue;
    cues[i].color = color_classify(tile.pixels, targets[i].mask, targets[i].category, opt.color);
    std::set<std::pair<Direction, std::string>> seen;
    for (auto& r : directional_relations(targets[i], singles, opt.relation_max_dist)) {
      if (seen.emplace(r.direction, r.neighbor_category).second) {
        cues[i].relations.push_back(std::move(r));
      }
    }
  }
  return cues;
}

}  // namespace forge
