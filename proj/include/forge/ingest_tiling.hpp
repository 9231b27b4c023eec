#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "forge/components.hpp"
#include "forge/error.hpp"
#include "forge/image.hpp"

namespace forge {

inline constexpr int kTileSize = 480;

/// Class-id to class-name table for a label raster.
using Legend = std::map<std::uint8_t, std::string>;

/// One annotated object. Masks are in the coordinate frame of whatever image
/// holds the instance (source image or tile).
struct Instance {
  std::string id;
  std::string category;
  Mask mask;
};

struct SourceImage {
  std::string id;
  std::string dataset;
  Image8 pixels;
  std::vector<Instance> instances;
  std::optional<LabelRaster> labels;
  Legend legend;
};

struct Tile {
  std::string id;
  std::string source_id;
  std::string dataset;
  int origin_x = 0;
  int origin_y = 0;
  Image8 pixels;
  std::vector<Instance> instances;
  std::optional<LabelRaster> labels;
  Legend legend;
};

struct PseudoInstance {
  std::uint8_t class_id = 0;
  std::string class_name;
  Mask mask;
  std::size_t area = 0;
};

struct TilingOptions {
  int window = kTileSize;
  int stride = 384;
  /// Instances keeping less than this share of their area inside a window are
  /// dropped from that window.
  double min_keep_fraction = 0.2;
};

struct PseudoInstanceOptions {
  std::set<std::string> promote{"building", "water"};
  std::size_t min_component_area = 100;
  Connectivity connectivity = Connectivity::Eight;
};

/// Window offsets along one axis: 0, stride, 2*stride, ... with the last one
/// snapped to dim - window so the windows cover the axis.
inline std::vector<int> window_offsets(int dim, int window, int stride) {
  if (window <= 0 || stride <= 0) throw InputError("window and stride must be positive");
  if (dim <= window) return {0};
  std::vector<int> offs;
  int off = 0;
  while (off + window < dim) {
    offs.push_back(off);
    off += stride;
  }
  const int last = dim - window;
  if (offs.empty() || offs.back() != last) offs.push_back(last);
  return offs;
}

namespace detail {

inline int reflect_index(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
  }
  return i;
}

}  // namespace detail

/// Reflect-pads `img` on the right/bottom so each axis is at least `min_dim`.
inline Image8 reflect_pad(const Image8& img, int min_dim) {
  const int w = std::max(img.width(), min_dim);
  const int h = std::max(img.height(), min_dim);
  if (w == img.width() && h == img.height()) return img;
  Image8 out(w, h, img.channels());
  for (int y = 0; y < h; ++y) {
    const int sy = detail::reflect_index(y, img.height());
    for (int x = 0; x < w; ++x) {
      const int sx = detail::reflect_index(x, img.width());
      for (int c = 0; c < img.channels(); ++c) out.at(x, y, c) = img.at(sx, sy, c);
    }
  }
  return out;
}

inline std::string tile_id(const std::string& source_id, int x, int y) {
  return source_id + "_" + std::to_string(x) + "_" + std::to_string(y);
}

/// Slides a window across an instance-annotated source image and keeps the
/// windows that still hold at least one valid instance.
inline std::vector<Tile> tile_instance_image(const SourceImage& img,
                                             const TilingOptions& opt = {}) {
  if (img.pixels.channels() != 3) {
    throw InputError("source '" + img.id + "' is not 3-channel RGB (" +
                     std::to_string(img.pixels.channels()) + " channels)");
  }
  if (img.instances.empty()) return {};
  for (const auto& inst : img.instances) {
    if (inst.mask.width() != img.pixels.width() || inst.mask.height() != img.pixels.height()) {
      throw InputError("instance '" + inst.id + "' of '" + img.id +
                       "' does not match image dimensions");
    }
  }

  // Padding only extends pixels; masks keep their original extent so padded
  // areas never count as annotated.
  const Image8 padded = reflect_pad(img.pixels, opt.window);

  struct Prepared {
    const Instance* inst;
    BBox box;
    std::size_t area;
  };
  std::vector<Prepared> prepared;
  for (const auto& inst : img.instances) {
    const std::size_t area = inst.mask.area();
    if (area == 0) continue;
    prepared.push_back({&inst, inst.mask.bbox(), area});
  }

  const auto xs = window_offsets(padded.width(), opt.window, opt.stride);
  const auto ys = window_offsets(padded.height(), opt.window, opt.stride);

  std::vector<Tile> tiles;
  for (int ox : xs) {
    for (int oy : ys) {
      Tile t;
      for (const auto& p : prepared) {
        if (p.box.x1 < ox || p.box.x0 >= ox + opt.window || p.box.y1 < oy ||
            p.box.y0 >= oy + opt.window) {
          continue;
        }
        Mask clipped = p.inst->mask.crop(ox, oy, opt.window, opt.window);
        const std::size_t kept = clipped.area();
        if (kept == 0) continue;
        if (static_cast<double>(kept) < opt.min_keep_fraction * static_cast<double>(p.area)) {
          continue;
        }
        t.instances.push_back({p.inst->id, p.inst->category, std::move(clipped)});
      }
      if (t.instances.empty()) continue;
      t.id = tile_id(img.id, ox, oy);
      t.source_id = img.id;
      t.dataset = img.dataset;
      t.origin_x = ox;
      t.origin_y = oy;
      t.pixels = Image8(opt.window, opt.window, 3);
      for (int y = 0; y < opt.window; ++y)
        for (int x = 0; x < opt.window; ++x)
          for (int c = 0; c < 3; ++c) t.pixels.at(x, y, c) = padded.at(ox + x, oy + y, c);
      tiles.push_back(std::move(t));
    }
  }
  return tiles;
}

/// Bilinear resampling with half-pixel centers and edge clamping.
inline Image8 resize_bilinear(const Image8& src, int out_w, int out_h) {
  Image8 out(out_w, out_h, src.channels());
  const double sx = static_cast<double>(src.width()) / out_w;
  const double sy = static_cast<double>(src.height()) / out_h;
  for (int y = 0; y < out_h; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, src.height() - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, src.height() - 1);
    const double wy = fy - y0;
    for (int x = 0; x < out_w; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, src.width() - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, src.width() - 1);
      const double wx = fx - x0;
      for (int c = 0; c < src.channels(); ++c) {
        const double top = src.at(x0, y0, c) * (1 - wx) + src.at(x1, y0, c) * wx;
        const double bot = src.at(x0, y1, c) * (1 - wx) + src.at(x1, y1, c) * wx;
        const double v = top * (1 - wy) + bot * wy;
        out.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return out;
}

/// Nearest-neighbour resampling; never invents values.
template <typename T>
Raster<T> resize_nearest(const Raster<T>& src, int out_w, int out_h) {
  Raster<T> out(out_w, out_h, src.channels());
  const double sx = static_cast<double>(src.width()) / out_w;
  const double sy = static_cast<double>(src.height()) / out_h;
  for (int y = 0; y < out_h; ++y) {
    const int yy = std::min(static_cast<int>((y + 0.5) * sy), src.height() - 1);
    for (int x = 0; x < out_w; ++x) {
      const int xx = std::min(static_cast<int>((x + 0.5) * sx), src.width() - 1);
      for (int c = 0; c < src.channels(); ++c) out.at(x, y, c) = src.at(xx, yy, c);
    }
  }
  return out;
}

/// Resizes a semantically labelled source to a single tile.
inline Tile resize_semantic_image(const SourceImage& img, int size = kTileSize) {
  if (!img.labels) throw InputError("source '" + img.id + "' has no label raster");
  if (img.labels->width() != img.pixels.width() || img.labels->height() != img.pixels.height()) {
    throw InputError("label raster of '" + img.id + "' is " +
                     std::to_string(img.labels->width()) + "x" +
                     std::to_string(img.labels->height()) + " but image is " +
                     std::to_string(img.pixels.width()) + "x" +
                     std::to_string(img.pixels.height()));
  }
  if (img.pixels.channels() != 3) {
    throw InputError("source '" + img.id + "' is not 3-channel RGB");
  }
  Tile t;
  t.id = tile_id(img.id, 0, 0);
  t.source_id = img.id;
  t.dataset = img.dataset;
  t.pixels = resize_bilinear(img.pixels, size, size);
  t.labels = resize_nearest(*img.labels, size, size);
  t.legend = img.legend;
  return t;
}

/// Connected components of the promoted classes, ordered by class id and then
/// by the raster-scan position of each component's first pixel.
inline std::vector<PseudoInstance> extract_pseudo_instances(const Tile& t,
                                                            const PseudoInstanceOptions& opt = {}) {
  std::vector<PseudoInstance> out;
  if (!t.labels) return out;
  for (const auto& [cls, name] : t.legend) {
    if (!opt.promote.contains(name)) continue;
    const Mask cls_mask = mask_of_class(*t.labels, cls);
    const auto comps = label_components(cls_mask, opt.connectivity);
    for (std::size_t k = 0; k < comps.count(); ++k) {
      if (comps.areas[k] < opt.min_component_area) continue;
      out.push_back({cls, name, comps.component(static_cast<std::int32_t>(k + 1)), comps.areas[k]});
    }
  }
  return out;
}

/// Appends the tile's pseudo-instances to its instance list.
inline void promote_pseudo_instances(Tile& t, const PseudoInstanceOptions& opt = {}) {
  std::map<std::string, int> per_class;
  for (auto& p : extract_pseudo_instances(t, opt)) {
    const int k = per_class[p.class_name]++;
    std::string id = "p" + std::to_string(p.class_id) + "-" + std::to_string(k);
    t.instances.push_back({std::move(id), p.class_name, std::move(p.mask)});
  }
}

}  // namespace forge
