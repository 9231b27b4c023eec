#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "forge/error.hpp"

namespace forge {

/// Interleaved, row-major pixel buffer.
template <typename T>
class Raster {
 public:
  Raster() = default;
  Raster(int width, int height, int channels, T fill = T{})
      : width_(width), height_(height), channels_(channels) {
    if (width < 0 || height < 0 || channels < 1) {
      throw InputError("invalid raster shape " + std::to_string(width) + "x" +
                       std::to_string(height) + "x" + std::to_string(channels));
    }
    data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  bool empty() const noexcept { return data_.empty(); }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(width_) * height_;
  }

  T& at(int x, int y, int c = 0) noexcept { return data_[index(x, y, c)]; }
  const T& at(int x, int y, int c = 0) const noexcept { return data_[index(x, y, c)]; }

  std::span<T> pixels() noexcept { return data_; }
  std::span<const T> pixels() const noexcept { return data_; }
  std::vector<T>& data() noexcept { return data_; }
  const std::vector<T>& data() const noexcept { return data_; }

  bool same_shape(const Raster& o) const noexcept {
    return width_ == o.width_ && height_ == o.height_ && channels_ == o.channels_;
  }

  friend bool operator==(const Raster&, const Raster&) = default;

 private:
  std::size_t index(int x, int y, int c) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 1;
  std::vector<T> data_;
};

using Image8 = Raster<std::uint8_t>;
using LabelRaster = Raster<std::uint8_t>;
using FloatImage = Raster<double>;

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point2&, const Point2&) = default;
};

/// Tight pixel box; both corners inclusive.
struct BBox {
  int x0 = 0;
  int y0 = 0;
  int x1 = -1;
  int y1 = -1;

  bool valid() const noexcept { return x1 >= x0 && y1 >= y0; }
  int width() const noexcept { return valid() ? x1 - x0 + 1 : 0; }
  int height() const noexcept { return valid() ? y1 - y0 + 1 : 0; }
  Point2 center() const noexcept { return {(x0 + x1) / 2.0, (y0 + y1) / 2.0}; }

  friend bool operator==(const BBox&, const BBox&) = default;
};

/// Binary mask, one byte per pixel holding 0 or 1.
class Mask {
 public:
  Mask() = default;
  Mask(int width, int height) : width_(width), height_(height) {
    if (width < 0 || height < 0) throw InputError("invalid mask shape");
    bits_.assign(static_cast<std::size_t>(width) * height, 0);
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return bits_.size(); }

  bool get(int x, int y) const noexcept {
    return bits_[static_cast<std::size_t>(y) * width_ + x] != 0;
  }
  void set(int x, int y, bool v = true) noexcept {
    bits_[static_cast<std::size_t>(y) * width_ + x] = v ? 1 : 0;
  }
  bool contains(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }

  std::span<const std::uint8_t> bits() const noexcept { return bits_; }
  std::span<std::uint8_t> bits() noexcept { return bits_; }

  std::size_t area() const noexcept {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
  }
  bool none() const noexcept {
    return std::none_of(bits_.begin(), bits_.end(), [](std::uint8_t b) { return b != 0; });
  }

  BBox bbox() const noexcept {
    BBox b{width_, height_, -1, -1};
    for (int y = 0; y < height_; ++y) {
      for (int x = 0; x < width_; ++x) {
        if (!get(x, y)) continue;
        b.x0 = std::min(b.x0, x);
        b.y0 = std::min(b.y0, y);
        b.x1 = std::max(b.x1, x);
        b.y1 = std::max(b.y1, y);
      }
    }
    if (!b.valid()) return BBox{};
    return b;
  }

  Mask& operator|=(const Mask& o) {
    require_same_shape(o);
    for (std::size_t i = 0; i < bits_.size(); ++i) bits_[i] |= o.bits_[i];
    return *this;
  }

  std::size_t intersection_area(const Mask& o) const {
    require_same_shape(o);
    std::size_t n = 0;
    for (std::size_t i = 0; i < bits_.size(); ++i) n += (bits_[i] & o.bits_[i]);
    return n;
  }

  /// Copy of the window [x, x+w) x [y, y+h); pixels outside this mask read as 0.
  Mask crop(int x, int y, int w, int h) const {
    Mask out(w, h);
    for (int yy = 0; yy < h; ++yy) {
      for (int xx = 0; xx < w; ++xx) {
        if (contains(x + xx, y + yy) && get(x + xx, y + yy)) out.set(xx, yy);
      }
    }
    return out;
  }

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  void require_same_shape(const Mask& o) const {
    if (o.width_ != width_ || o.height_ != height_) {
      throw InputError("mask dimension mismatch: " + std::to_string(width_) + "x" +
                       std::to_string(height_) + " vs " + std::to_string(o.width_) + "x" +
                       std::to_string(o.height_));
    }
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// Mask of every pixel in `labels` equal to `cls`.
inline Mask mask_of_class(const LabelRaster& labels, std::uint8_t cls) {
  Mask m(labels.width(), labels.height());
  for (int y = 0; y < labels.height(); ++y) {
    for (int x = 0; x < labels.width(); ++x) {
      if (labels.at(x, y) == cls) m.set(x, y);
    }
  }
  return m;
}

}  // namespace forge
