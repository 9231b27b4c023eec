#pragma once

#include <png.h>

#include <csetjmp>
#include <cstring>
#include <fstream>
#include <filesystem>
#include <string>
#include <vector>

#include "forge/error.hpp"
#include "forge/image.hpp"

namespace forge::png {

namespace detail {

inline png_uint_32 format_for_channels(int channels) {
  switch (channels) {
    case 1: return PNG_FORMAT_GRAY;
    case 2: return PNG_FORMAT_GA;
    case 3: return PNG_FORMAT_RGB;
    case 4: return PNG_FORMAT_RGBA;
    default: throw InputError("unsupported channel count " + std::to_string(channels));
  }
}

}  // namespace detail

/// Reads an 8-bit PNG keeping its native channel layout (1 gray, 2 gray+alpha,
/// 3 RGB, 4 RGBA). Palette images are expanded to RGB(A).
inline Image8 read(const std::filesystem::path& path) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.string().c_str())) {
    throw InputError("cannot read PNG '" + path.string() + "': " + img.message);
  }
  int channels = 3;
  if ((img.format & PNG_FORMAT_FLAG_COLOR) == 0) channels = 1;
  if (img.format & PNG_FORMAT_FLAG_ALPHA) channels += 1;
  img.format = detail::format_for_channels(channels);
  Image8 out(static_cast<int>(img.width), static_cast<int>(img.height), channels);
  if (!png_image_finish_read(&img, nullptr, out.data().data(), 0, nullptr)) {
    png_image_free(&img);
    throw InputError("cannot decode PNG '" + path.string() + "': " + img.message);
  }
  return out;
}

/// Reads a single-channel 8-bit label PNG without any value conversion.
inline LabelRaster read_labels(const std::filesystem::path& path) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.string().c_str())) {
    throw InputError("cannot read PNG '" + path.string() + "': " + img.message);
  }
  if ((img.format & (PNG_FORMAT_FLAG_COLOR | PNG_FORMAT_FLAG_ALPHA |
                     PNG_FORMAT_FLAG_COLORMAP | PNG_FORMAT_FLAG_LINEAR)) != 0) {
    png_image_free(&img);
    throw InputError("label raster '" + path.string() + "' must be 8-bit grayscale");
  }
  img.format = PNG_FORMAT_GRAY;
  LabelRaster out(static_cast<int>(img.width), static_cast<int>(img.height), 1);
  if (!png_image_finish_read(&img, nullptr, out.data().data(), 0, nullptr)) {
    png_image_free(&img);
    throw InputError("cannot decode PNG '" + path.string() + "': " + img.message);
  }
  return out;
}

namespace detail {

inline void append_bytes(png_structp png, png_bytep data, png_size_t n) {
  auto* out = static_cast<std::vector<unsigned char>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + n);
}

inline void no_flush(png_structp) {}

inline int color_type_for_channels(int channels) {
  switch (channels) {
    case 1: return PNG_COLOR_TYPE_GRAY;
    case 2: return PNG_COLOR_TYPE_GRAY_ALPHA;
    case 3: return PNG_COLOR_TYPE_RGB;
    case 4: return PNG_COLOR_TYPE_RGB_ALPHA;
    default: throw InputError("unsupported channel count " + std::to_string(channels));
  }
}

}  // namespace detail

/// In-memory PNG encoding. The simplified libpng writer has no knob for
/// compression effort, and its default is slow on noisy aerial imagery, so
/// this goes through the full API at a fixed, fast setting.
inline std::vector<unsigned char> encode(const Image8& image, int compression_level = 1) {
  const int color_type = detail::color_type_for_channels(image.channels());
  std::vector<unsigned char> buf;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error("cannot allocate PNG writer");
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, info ? &info : nullptr);
    throw Error("cannot encode PNG");
  }
  png_set_write_fn(png, &buf, detail::append_bytes, detail::no_flush);
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width()),
               static_cast<png_uint_32>(image.height()), 8, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, compression_level);
  png_set_filter(png, PNG_FILTER_TYPE_BASE, PNG_FILTER_SUB | PNG_FILTER_UP);
  png_write_info(png, info);
  const auto stride = static_cast<std::size_t>(image.width()) * image.channels();
  auto* row = const_cast<png_bytep>(image.data().data());
  for (int y = 0; y < image.height(); ++y) png_write_row(png, row + y * stride);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return buf;
}

inline void write(const std::filesystem::path& path, const Image8& image) {
  const auto bytes = encode(image);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("cannot write PNG '" + path.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

inline Image8 from_mask(const Mask& m) {
  Image8 out(m.width(), m.height(), 1);
  auto bits = m.bits();
  for (std::size_t i = 0; i < bits.size(); ++i) out.data()[i] = bits[i] ? 255 : 0;
  return out;
}

/// Any non-zero pixel of the first channel is foreground.
inline Mask to_mask(const Image8& img) {
  Mask m(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      if (img.at(x, y, 0) != 0) m.set(x, y);
    }
  }
  return m;
}

}  // namespace forge::png
