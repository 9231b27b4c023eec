#pragma once

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "forge/error.hpp"
#include "forge/image.hpp"
#include "forge/ingest_tiling.hpp"
#include "forge/png_io.hpp"
#include "forge/rle.hpp"

namespace forge {

namespace fs = std::filesystem;

/// One entry of the input manifest. Exactly one of `coco` / `labels` is set.
struct SourceEntry {
  std::string id;
  std::string dataset;
  fs::path image;
  std::optional<fs::path> coco;
  std::optional<long long> coco_image_id;
  std::optional<fs::path> labels;
  Legend legend;
};

struct SourceManifest {
  std::vector<SourceEntry> sources;
};

/// "Large_Vehicle" -> "large vehicle".
inline std::string normalize_category(std::string name) {
  for (char& c : name) {
    if (c == '_') c = ' ';
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return name;
}

inline Legend parse_legend(const nlohmann::json& j) {
  Legend legend;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const int id = std::stoi(it.key());
    if (id < 0 || id > 255) throw ConfigError("legend class id out of range: " + it.key());
    legend[static_cast<std::uint8_t>(id)] = it.value().get<std::string>();
  }
  return legend;
}

inline nlohmann::json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InputError("invalid JSON in '" + path.string() + "': " + e.what());
  }
}

inline SourceManifest load_source_manifest(const fs::path& path) {
  const auto j = read_json_file(path);
  const fs::path base = path.parent_path();
  Legend shared;
  if (j.contains("legend")) shared = parse_legend(j.at("legend"));
  SourceManifest m;
  for (const auto& s : j.at("sources")) {
    SourceEntry e;
    e.id = s.at("id").get<std::string>();
    e.dataset = s.value("dataset", std::string("unknown"));
    e.image = base / s.at("image").get<std::string>();
    if (s.contains("coco")) e.coco = base / s.at("coco").get<std::string>();
    if (s.contains("coco_image_id")) e.coco_image_id = s.at("coco_image_id").get<long long>();
    if (s.contains("labels")) e.labels = base / s.at("labels").get<std::string>();
    e.legend = s.contains("legend") ? parse_legend(s.at("legend")) : shared;
    if (e.coco.has_value() == e.labels.has_value()) {
      throw ConfigError("source '" + e.id + "' needs exactly one of 'coco' or 'labels'");
    }
    if (e.labels && e.legend.empty()) {
      throw ConfigError("source '" + e.id + "' has a label raster but no legend");
    }
    m.sources.push_back(std::move(e));
  }
  std::sort(m.sources.begin(), m.sources.end(),
            [](const SourceEntry& a, const SourceEntry& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < m.sources.size(); ++i) {
    if (m.sources[i].id == m.sources[i - 1].id) {
      throw ConfigError("duplicate source id '" + m.sources[i].id + "'");
    }
  }
  return m;
}

/// Even-odd fill of a polygon given as [x0,y0,x1,y1,...]; a pixel is inside
/// when its center is.
inline void fill_polygon(Mask& m, const std::vector<double>& xy) {
  const std::size_t n = xy.size() / 2;
  if (n < 3) return;
  std::vector<double> xs;
  for (int y = 0; y < m.height(); ++y) {
    const double cy = y + 0.5;
    xs.clear();
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = (i + 1) % n;
      const double ax = xy[2 * i], ay = xy[2 * i + 1];
      const double bx = xy[2 * j], by = xy[2 * j + 1];
      if ((ay <= cy) == (by <= cy)) continue;
      xs.push_back(ax + (cy - ay) * (bx - ax) / (by - ay));
    }
    std::sort(xs.begin(), xs.end());
    for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
      const int from = std::max(0, static_cast<int>(std::ceil(xs[k] - 0.5)));
      const int to = std::min(m.width() - 1, static_cast<int>(std::ceil(xs[k + 1] - 0.5)) - 1);
      for (int x = from; x <= to; ++x) m.set(x, y);
    }
  }
}

/// Parsed COCO file, indexed for per-image lookup.
class CocoIndex {
 public:
  explicit CocoIndex(const fs::path& path) {
    const auto j = read_json_file(path);
    for (const auto& c : j.at("categories")) {
      categories_[c.at("id").get<long long>()] = normalize_category(c.at("name").get<std::string>());
    }
    for (const auto& im : j.at("images")) {
      const auto id = im.at("id").get<long long>();
      by_file_[fs::path(im.at("file_name").get<std::string>()).filename().string()] = id;
    }
    for (const auto& a : j.at("annotations")) {
      annotations_[a.at("image_id").get<long long>()].push_back(a);
    }
    // file order is not meaningful; annotation ids are
    for (auto& [_, list] : annotations_) {
      std::stable_sort(list.begin(), list.end(), [](const auto& a, const auto& b) {
        return a.at("id").template get<long long>() < b.at("id").template get<long long>();
      });
    }
  }

  std::optional<long long> image_id_for_file(const std::string& filename) const {
    auto it = by_file_.find(filename);
    if (it == by_file_.end()) return std::nullopt;
    return it->second;
  }

  std::vector<Instance> instances(long long image_id, int width, int height) const {
    std::vector<Instance> out;
    auto it = annotations_.find(image_id);
    if (it == annotations_.end()) return out;
    for (const auto& a : it->second) {
      const auto cat = a.at("category_id").get<long long>();
      auto cit = categories_.find(cat);
      if (cit == categories_.end()) {
        throw InputError("annotation references unknown category " + std::to_string(cat));
      }
      Instance inst{"a" + std::to_string(a.at("id").get<long long>()), cit->second,
                    Mask(width, height)};
      const auto& seg = a.at("segmentation");
      if (seg.is_array()) {
        for (const auto& poly : seg) fill_polygon(inst.mask, poly.get<std::vector<double>>());
      } else {
        RleMask rle;
        rle.height = seg.at("size").at(0).get<int>();
        rle.width = seg.at("size").at(1).get<int>();
        const auto& counts = seg.at("counts");
        rle.counts = counts.is_string() ? coco_counts_from_string(counts.get<std::string>())
                                        : counts.get<std::vector<std::uint32_t>>();
        if (rle.width != width || rle.height != height) {
          throw InputError("RLE size of annotation " + inst.id + " does not match its image");
        }
        inst.mask = rle_decode(rle);
      }
      out.push_back(std::move(inst));
    }
    return out;
  }

 private:
  std::map<long long, std::string> categories_;
  std::map<std::string, long long> by_file_;
  std::map<long long, std::vector<nlohmann::json>> annotations_;
};

/// Shares parsed COCO files between sources; safe to use from many threads.
class CocoCache {
 public:
  std::shared_ptr<const CocoIndex> get(const fs::path& path) {
    std::lock_guard lock(mu_);
    auto& slot = cache_[path.lexically_normal().string()];
    if (!slot) slot = std::make_shared<const CocoIndex>(path);
    return slot;
  }

 private:
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<const CocoIndex>> cache_;
};

inline SourceImage load_source(const SourceEntry& e, CocoCache& coco) {
  SourceImage img;
  img.id = e.id;
  img.dataset = e.dataset;
  img.pixels = png::read(e.image);
  img.legend = e.legend;
  if (e.labels) {
    img.labels = png::read_labels(*e.labels);
  } else {
    const auto index = coco.get(*e.coco);
    auto image_id = e.coco_image_id;
    if (!image_id) image_id = index->image_id_for_file(e.image.filename().string());
    if (!image_id) {
      throw InputError("no COCO image entry for '" + e.image.filename().string() + "'");
    }
    img.instances = index->instances(*image_id, img.pixels.width(), img.pixels.height());
  }
  return img;
}

}  // namespace forge
