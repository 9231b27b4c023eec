#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "forge/dataset_io.hpp"
#include "forge/image.hpp"
#include "forge/png_io.hpp"
#include "forge/rng.hpp"
#include "forge/source_manifest.hpp"

namespace forge::synth {

namespace fs = std::filesystem;

using Rgb = std::array<std::uint8_t, 3>;

/// Corners of a w x h rectangle centred on (cx, cy), rotated by `deg`.
inline std::vector<double> rotated_rect(double cx, double cy, double w, double h, double deg) {
  const double a = deg * std::numbers::pi / 180.0;
  const double c = std::cos(a), s = std::sin(a);
  std::vector<double> xy;
  for (auto [u, v] : {std::pair{-w / 2, -h / 2}, std::pair{w / 2, -h / 2}, std::pair{w / 2, h / 2},
                      std::pair{-w / 2, h / 2}}) {
    xy.push_back(std::round((cx + u * c - v * s) * 10.0) / 10.0);
    xy.push_back(std::round((cy + u * s + v * c) * 10.0) / 10.0);
  }
  return xy;
}

/// Flat ground with per-pixel jitter.
inline Image8 ground(int w, int h, Rgb base, int jitter, Rng& rng) {
  Image8 img(w, h, 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int k = 0; k < 3; ++k) {
        const int v = base[k] + static_cast<int>(rng.below(2 * jitter + 1)) - jitter;
        img.at(x, y, k) = static_cast<std::uint8_t>(std::clamp(v, 0, 255));
      }
  return img;
}

inline void paint(Image8& img, const Mask& m, Rgb color, int jitter, Rng& rng) {
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      if (!m.get(x, y)) continue;
      for (int k = 0; k < 3; ++k) {
        const int v = color[k] + static_cast<int>(rng.below(2 * jitter + 1)) - jitter;
        img.at(x, y, k) = static_cast<std::uint8_t>(std::clamp(v, 0, 255));
      }
    }
}

struct Object {
  std::string category;
  double cx, cy, w, h, deg;
  Rgb color;
};

struct InstanceScene {
  std::string id;
  std::string dataset;
  int width, height;
  Rgb ground;
  std::vector<Object> objects;
};

inline std::vector<InstanceScene> instance_scenes() {
  const Rgb white{236, 236, 232}, red{200, 40, 36}, dark{30, 30, 34}, blue{40, 70, 190},
      gray{150, 150, 150};
  return {
      {"airport_a", "dior", 720, 560, {120, 124, 112},
       {
           // apron: three planes close together, one far away
           {"plane", 150, 140, 60, 50, 0, white},
           {"plane", 235, 150, 60, 50, 10, white},
           {"plane", 190, 225, 60, 50, -5, white},
           {"plane", 600, 460, 64, 54, 30, red},
           // parking lot
           {"vehicle", 420, 300, 16, 30, 0, red},
           {"vehicle", 446, 302, 16, 30, 0, blue},
           {"vehicle", 472, 298, 16, 30, 0, dark},
           {"vehicle", 498, 300, 16, 30, 0, red},
           {"vehicle", 640, 120, 16, 30, 45, gray},
       }},
      {"harbor_b", "isaid", 400, 360, {60, 90, 120},
       {
           {"storage_tank", 80, 80, 40, 40, 0, white},
           {"storage_tank", 135, 82, 40, 40, 0, white},
           {"ship", 280, 250, 90, 26, 20, dark},
           {"ship", 300, 110, 70, 22, -15, red},
       }},
  };
}

struct RegionScene {
  std::string id;
  std::string dataset;
  int size;
  std::uint64_t layout_seed;
};

inline const Legend& loveda_legend() {
  static const Legend kLegend{{0, "no-data"}, {1, "background"}, {2, "building"}, {3, "road"},
                              {4, "water"},   {5, "barren"},     {6, "forest"},   {7, "agriculture"}};
  return kLegend;
}

inline const std::map<std::uint8_t, Rgb>& loveda_colors() {
  static const std::map<std::uint8_t, Rgb> kColors{
      {0, {0, 0, 0}},       {1, {128, 128, 120}}, {2, {180, 90, 80}},  {3, {200, 200, 200}},
      {4, {40, 80, 160}},   {5, {170, 150, 110}}, {6, {30, 100, 40}},  {7, {150, 190, 80}}};
  return kColors;
}

/// Land-cover label raster: farmland and forest halves, a river, roads and
/// building blocks.
inline LabelRaster region_labels(int size, Rng& rng) {
  LabelRaster lab(size, size, 1);
  const int split = size / 2 + static_cast<int>(rng.below(size / 8)) - size / 16;
  const int river = size / 4 + static_cast<int>(rng.below(size / 4));
  for (int y = 0; y < size; ++y) {
    const double bend = 20.0 * std::sin(y / 40.0);
    for (int x = 0; x < size; ++x) {
      std::uint8_t v = x < split ? 7 : 6;
      if (y > size * 3 / 4 && x > split) v = 5;
      if (std::abs(x - river - bend) < 14) v = 4;
      if (std::abs(y - size / 3) < 5) v = 3;
      lab.at(x, y) = v;
    }
  }
  const int blocks = 3 + static_cast<int>(rng.below(3));
  for (int b = 0; b < blocks; ++b) {
    const int bx = split + 20 + static_cast<int>(rng.below(std::max(1, size - split - 80)));
    const int by = 20 + static_cast<int>(rng.below(size / 3 - 50));
    const int bw = 26 + static_cast<int>(rng.below(20));
    const int bh = 22 + static_cast<int>(rng.below(16));
    for (int y = by; y < std::min(size, by + bh); ++y)
      for (int x = bx; x < std::min(size, bx + bw); ++x) lab.at(x, y) = 2;
  }
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < size; ++x) lab.at(x, y) = 0;  // unlabeled strip
  for (int y = size - 40; y < size; ++y)
    for (int x = 0; x < 60; ++x) lab.at(x, y) = 1;
  return lab;
}

/// Writes the four-image corpus (two instance scenes with a COCO file, two
/// land-cover scenes with label rasters) and its source manifest.
inline fs::path write_corpus(const fs::path& dir, std::uint64_t seed = 7) {
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "labels");
  nlohmann::json coco = {{"images", nlohmann::json::array()},
                         {"annotations", nlohmann::json::array()},
                         {"categories", nlohmann::json::array()}};
  std::map<std::string, int> cat_ids;
  nlohmann::json sources = nlohmann::json::array();
  int image_id = 0, ann_id = 0;
  for (const auto& scene : instance_scenes()) {
    Rng rng(derive_seed(seed, scene.id));
    Image8 img = ground(scene.width, scene.height, scene.ground, 6, rng);
    ++image_id;
    const std::string file = scene.id + ".png";
    coco["images"].push_back(
        {{"id", image_id}, {"file_name", file}, {"width", scene.width}, {"height", scene.height}});
    for (const auto& o : scene.objects) {
      if (!cat_ids.contains(o.category)) {
        const int id = static_cast<int>(cat_ids.size()) + 1;
        cat_ids[o.category] = id;
        coco["categories"].push_back({{"id", id}, {"name", o.category}});
      }
      const auto poly = rotated_rect(o.cx, o.cy, o.w, o.h, o.deg);
      Mask m(scene.width, scene.height);
      fill_polygon(m, poly);
      paint(img, m, o.color, 8, rng);
      coco["annotations"].push_back({{"id", ++ann_id},
                                     {"image_id", image_id},
                                     {"category_id", cat_ids.at(o.category)},
                                     {"segmentation", {poly}},
                                     {"iscrowd", 0}});
    }
    png::write(dir / "images" / file, img);
    sources.push_back({{"id", scene.id}, {"dataset", scene.dataset}, {"image", "images/" + file},
                       {"coco", "instances.json"}});
  }
  const std::vector<RegionScene> regions{{"rural_c", "loveda", 512, 11}, {"rural_d", "loveda", 600, 12}};
  for (const auto& r : regions) {
    Rng rng(derive_seed(seed, r.id));
    const LabelRaster lab = region_labels(r.size, rng);
    Image8 img(r.size, r.size, 3);
    for (int y = 0; y < r.size; ++y)
      for (int x = 0; x < r.size; ++x) {
        const Rgb c = loveda_colors().at(lab.at(x, y));
        for (int k = 0; k < 3; ++k)
          img.at(x, y, k) = static_cast<std::uint8_t>(
              std::clamp(static_cast<int>(c[k]) + static_cast<int>(rng.below(13)) - 6, 0, 255));
      }
    png::write(dir / "images" / (r.id + ".png"), img);
    png::write(dir / "labels" / (r.id + ".png"), lab);
    sources.push_back({{"id", r.id}, {"dataset", r.dataset}, {"image", "images/" + r.id + ".png"},
                       {"labels", "labels/" + r.id + ".png"}});
  }
  nlohmann::json legend = nlohmann::json::object();
  for (const auto& [k, v] : loveda_legend()) legend[std::to_string(k)] = v;
  write_file_atomic(dir / "instances.json", coco.dump(1) + "\n");
  const fs::path manifest = dir / "sources.json";
  write_file_atomic(manifest,
                    nlohmann::json{{"version", 1}, {"legend", legend}, {"sources", sources}}.dump(2) + "\n");
  return manifest;
}

}  // namespace forge::synth
