#pragma once

// Helpers and independent reference implementations shared by the unit tests
// and the acceptance binary. Nothing in here calls the code it checks.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "forge/image.hpp"

namespace forge::test {

namespace fs = std::filesystem;

/// Fresh empty directory under the system temp dir.
inline fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("forge-test-" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

inline Mask box_mask(int w, int h, int x0, int y0, int x1, int y1) {
  Mask m(w, h);
  for (int y = std::max(0, y0); y <= std::min(h - 1, y1); ++y)
    for (int x = std::max(0, x0); x <= std::min(w - 1, x1); ++x) m.set(x, y);
  return m;
}

inline Mask random_mask(std::mt19937_64& gen, int w, int h, double density) {
  Mask m(w, h);
  std::bernoulli_distribution bit(density);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (bit(gen)) m.set(x, y);
  return m;
}

/// Smallest distance between any two foreground pixel centres; 0 on overlap.
/// Quadratic in the number of foreground pixels.
inline double brute_edge_distance(const Mask& a, const Mask& b) {
  std::vector<std::pair<int, int>> pa, pb;
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x) {
      if (a.get(x, y)) pa.emplace_back(x, y);
      if (b.get(x, y)) pb.emplace_back(x, y);
    }
  double best = std::numeric_limits<double>::infinity();
  for (auto [ax, ay] : pa)
    for (auto [bx, by] : pb) best = std::min(best, std::hypot(double(ax - bx), double(ay - by)));
  return best;
}

/// Distance between two filled axis-aligned boxes, closed form.
inline double box_distance(const BBox& a, const BBox& b) {
  const int dx = std::max({0, b.x0 - a.x1, a.x0 - b.x1});
  const int dy = std::max({0, b.y0 - a.y1, a.y0 - b.y1});
  return std::hypot(double(dx), double(dy));
}

/// Density-based clusters by definition: core points have at least `min_pts`
/// points (themselves included) within eps; clusters are the connected
/// components of core points under eps-adjacency. Returned as sorted index
/// sets of the core points only, sorted by smallest member.
inline std::vector<std::set<std::size_t>> oracle_core_clusters(
    const std::vector<std::vector<double>>& dist, double eps, std::size_t min_pts) {
  const std::size_t n = dist.size();
  std::vector<bool> core(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t cnt = 0;
    for (std::size_t j = 0; j < n; ++j) cnt += dist[i][j] <= eps ? 1 : 0;
    core[i] = cnt >= min_pts;
  }
  // union-find over core-core edges
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (core[i] && core[j] && dist[i][j] <= eps) parent[find(i)] = find(j);
  std::map<std::size_t, std::set<std::size_t>> groups;
  for (std::size_t i = 0; i < n; ++i)
    if (core[i]) groups[find(i)].insert(i);
  std::vector<std::set<std::size_t>> out;
  for (auto& [_, g] : groups) out.push_back(g);
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return *a.begin() < *b.begin(); });
  return out;
}

/// Full clusters: core components plus the border points reachable from them.
/// A border point reachable from several components is listed with each; the
/// caller decides how to resolve that.
inline std::vector<std::set<std::size_t>> oracle_clusters_with_border(
    const std::vector<std::vector<double>>& dist, double eps, std::size_t min_pts) {
  auto clusters = oracle_core_clusters(dist, eps, min_pts);
  std::set<std::size_t> cores;
  for (const auto& c : clusters) cores.insert(c.begin(), c.end());
  for (auto& c : clusters) {
    const std::set<std::size_t> core_part = c;
    for (std::size_t p = 0; p < dist.size(); ++p) {
      if (cores.contains(p)) continue;
      for (std::size_t q : core_part)
        if (dist[p][q] <= eps) {
          c.insert(p);
          break;
        }
    }
  }
  return clusters;
}

/// Connected components by union-find, as sets of (x, y) pixel indices.
inline std::vector<std::set<int>> oracle_components(const Mask& m, bool eight) {
  const int w = m.width(), h = m.height();
  std::vector<int> parent(static_cast<std::size_t>(w) * h);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  auto unite = [&](int a, int b) { parent[find(a)] = find(b); };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!m.get(x, y)) continue;
      const int i = y * w + x;
      if (x > 0 && m.get(x - 1, y)) unite(i, i - 1);
      if (y > 0 && m.get(x, y - 1)) unite(i, i - w);
      if (eight && y > 0 && x > 0 && m.get(x - 1, y - 1)) unite(i, i - w - 1);
      if (eight && y > 0 && x + 1 < w && m.get(x + 1, y - 1)) unite(i, i - w + 1);
    }
  std::map<int, std::set<int>> groups;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (m.get(x, y)) groups[find(y * w + x)].insert(y * w + x);
  std::vector<std::set<int>> out;
  for (auto& [_, g] : groups) out.push_back(g);
  std::sort(out.begin(), out.end());
  return out;
}

inline std::set<int> pixel_set(const Mask& m) {
  std::set<int> s;
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x)
      if (m.get(x, y)) s.insert(y * m.width() + x);
  return s;
}

// Scalar reference formulas, one pixel at a time.
inline double ref_luma(double r, double g, double b) { return 0.299 * r + 0.587 * g + 0.114 * b; }
inline double ref_gamma(double i, double gamma) { return 255.0 * std::pow(i / 255.0, gamma); }
inline double ref_contrast(double i, double mu, double c) { return (i - mu) * c + mu; }
inline double ref_clip(double v) { return v < 0 ? 0 : (v > 255 ? 255 : v); }
inline std::array<double, 3> ref_sepia(double r, double g, double b) {
  return {ref_clip(0.272 * r + 0.534 * g + 0.131 * b), ref_clip(0.349 * r + 0.686 * g + 0.168 * b),
          ref_clip(0.393 * r + 0.769 * g + 0.189 * b)};
}

}  // namespace forge::test
