#pragma once

#include <cstdint>
#include <vector>

#include "forge/image.hpp"

namespace forge {

enum class Connectivity { Four = 4, Eight = 8 };

struct ComponentLabels {
  /// 0 is background; components are numbered 1..count in raster-scan order of
  /// their first pixel.
  Raster<std::int32_t> labels;
  std::vector<std::size_t> areas;  // areas[k] is the area of component k+1

  std::size_t count() const noexcept { return areas.size(); }

  Mask component(std::int32_t id) const {
    Mask m(labels.width(), labels.height());
    for (int y = 0; y < labels.height(); ++y)
      for (int x = 0; x < labels.width(); ++x)
        if (labels.at(x, y) == id) m.set(x, y);
    return m;
  }
};

/// Flood-fill labeling of the foreground of `mask`.
inline ComponentLabels label_components(const Mask& mask,
                                        Connectivity conn = Connectivity::Eight) {
  const int w = mask.width();
  const int h = mask.height();
  ComponentLabels out{Raster<std::int32_t>(w, h, 1, 0), {}};
  static constexpr int kDx[8] = {1, -1, 0, 0, 1, 1, -1, -1};
  static constexpr int kDy[8] = {0, 0, 1, -1, 1, -1, 1, -1};
  const int nbrs = conn == Connectivity::Eight ? 8 : 4;

  std::vector<std::pair<int, int>> stack;
  std::int32_t next = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask.get(x, y) || out.labels.at(x, y) != 0) continue;
      ++next;
      std::size_t area = 0;
      out.labels.at(x, y) = next;
      stack.emplace_back(x, y);
      while (!stack.empty()) {
        auto [cx, cy] = stack.back();
        stack.pop_back();
        ++area;
        for (int k = 0; k < nbrs; ++k) {
          const int nx = cx + kDx[k];
          const int ny = cy + kDy[k];
          if (!mask.contains(nx, ny) || !mask.get(nx, ny)) continue;
          if (out.labels.at(nx, ny) != 0) continue;
          out.labels.at(nx, ny) = next;
          stack.emplace_back(nx, ny);
        }
      }
      out.areas.push_back(area);
    }
  }
  return out;
}

}  // namespace forge
