#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

#include "forge/error.hpp"
#include "forge/image.hpp"
#include "forge/rng.hpp"

namespace forge {

/// Simulated archival-photo degradations.
enum class FilterKind { None, Grayscale, GrayscaleGrain, SepiaNoise };

inline std::string_view to_string(FilterKind k) {
  switch (k) {
    case FilterKind::None: return "none";
    case FilterKind::Grayscale: return "grayscale";
    case FilterKind::GrayscaleGrain: return "grayscale_grain";
    case FilterKind::SepiaNoise: return "sepia_noise";
  }
  return "none";
}

inline FilterKind parse_filter_kind(std::string_view s) {
  if (s == "none") return FilterKind::None;
  if (s == "grayscale") return FilterKind::Grayscale;
  if (s == "grayscale_grain") return FilterKind::GrayscaleGrain;
  if (s == "sepia_noise") return FilterKind::SepiaNoise;
  throw ConfigError("unknown filter kind '" + std::string(s) + "'");
}

/// File-name suffix used for exported variants.
inline std::string_view filter_suffix(FilterKind k) {
  switch (k) {
    case FilterKind::None: return "";
    case FilterKind::Grayscale: return "_bw";
    case FilterKind::GrayscaleGrain: return "_grain";
    case FilterKind::SepiaNoise: return "_sepia";
  }
  return "";
}

struct FilterSpec {
  FilterKind kind = FilterKind::None;
  double gamma = 1.2;
  double contrast = 0.8;
  double grain_sigma = 0.1 * 255.0;
  double noise_lo = 0.0;
  double noise_hi = 50.0;
  std::uint64_t seed = 0;

  friend bool operator==(const FilterSpec&, const FilterSpec&) = default;
};

inline constexpr double kLumaR = 0.299;
inline constexpr double kLumaG = 0.587;
inline constexpr double kLumaB = 0.114;

/// Row i produces output channel i.
inline constexpr double kSepia[3][3] = {
    {0.272, 0.534, 0.131},
    {0.349, 0.686, 0.168},
    {0.393, 0.769, 0.189},
};

inline double clip255(double v) { return std::clamp(v, 0.0, 255.0); }

inline FloatImage to_float(const Image8& img) {
  FloatImage out(img.width(), img.height(), img.channels());
  std::transform(img.data().begin(), img.data().end(), out.data().begin(),
                 [](std::uint8_t v) { return static_cast<double>(v); });
  return out;
}

inline FloatImage to_grayscale(const FloatImage& rgb) {
  if (rgb.channels() != 3) throw InputError("to_grayscale expects 3 channels");
  FloatImage out(rgb.width(), rgb.height(), 1);
  for (int y = 0; y < rgb.height(); ++y)
    for (int x = 0; x < rgb.width(); ++x)
      out.at(x, y) = kLumaR * rgb.at(x, y, 0) + kLumaG * rgb.at(x, y, 1) + kLumaB * rgb.at(x, y, 2);
  return out;
}

inline FloatImage apply_gamma(const FloatImage& img, double gamma) {
  if (!(gamma > 0.0)) throw InputError("gamma must be positive");
  FloatImage out = img;
  for (double& v : out.data()) v = 255.0 * std::pow(v / 255.0, gamma);
  return out;
}

inline double image_mean(const FloatImage& img) {
  if (img.empty()) return 0.0;
  double sum = 0.0;
  for (double v : img.data()) sum += v;
  return sum / static_cast<double>(img.data().size());
}

/// Linear contrast change around the mean of `img` itself.
inline FloatImage apply_contrast(const FloatImage& img, double c) {
  const double mu = image_mean(img);
  FloatImage out = img;
  for (double& v : out.data()) v = (v - mu) * c + mu;
  return out;
}

/// clip(I + eta), eta ~ N(0, sigma^2), one draw per pixel in raster order; every
/// channel of a pixel shares the draw.
inline FloatImage add_gaussian_grain(const FloatImage& img, double sigma, std::uint64_t seed) {
  if (sigma < 0.0) throw InputError("grain sigma must be non-negative");
  FloatImage out = img;
  Rng rng(seed);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const double eta = sigma * rng.normal();
      for (int c = 0; c < img.channels(); ++c) out.at(x, y, c) = clip255(img.at(x, y, c) + eta);
    }
  }
  return out;
}

inline FloatImage apply_sepia(const FloatImage& rgb) {
  if (rgb.channels() != 3) throw InputError("apply_sepia expects 3 channels");
  FloatImage out(rgb.width(), rgb.height(), 3);
  for (int y = 0; y < rgb.height(); ++y) {
    for (int x = 0; x < rgb.width(); ++x) {
      const double r = rgb.at(x, y, 0), g = rgb.at(x, y, 1), b = rgb.at(x, y, 2);
      for (int c = 0; c < 3; ++c) {
        out.at(x, y, c) = clip255(kSepia[c][0] * r + kSepia[c][1] * g + kSepia[c][2] * b);
      }
    }
  }
  return out;
}

/// clip(I + xi), xi ~ U(lo, hi), one draw per pixel shared by its channels.
inline FloatImage add_uniform_noise(const FloatImage& img, std::uint64_t seed, double lo = 0.0,
                                    double hi = 50.0) {
  FloatImage out = img;
  Rng rng(seed);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const double xi = rng.uniform(lo, hi);
      for (int c = 0; c < img.channels(); ++c) out.at(x, y, c) = clip255(img.at(x, y, c) + xi);
    }
  }
  return out;
}

/// Rounds half away from zero, clamps, and replicates single-channel input.
inline Image8 quantize(const FloatImage& img) {
  Image8 out(img.width(), img.height(), 3);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < 3; ++c) {
        const double v = img.at(x, y, img.channels() == 1 ? 0 : c);
        out.at(x, y, c) = static_cast<std::uint8_t>(clip255(std::round(v)));
      }
    }
  }
  return out;
}

/// Unquantized result of a filter; single channel for the grayscale kinds.
inline FloatImage apply_float(const FilterSpec& spec, const FloatImage& rgb) {
  switch (spec.kind) {
    case FilterKind::None: return rgb;
    case FilterKind::Grayscale: return to_grayscale(rgb);
    case FilterKind::GrayscaleGrain: {
      const auto gamma = apply_gamma(to_grayscale(rgb), spec.gamma);
      return add_gaussian_grain(apply_contrast(gamma, spec.contrast), spec.grain_sigma, spec.seed);
    }
    case FilterKind::SepiaNoise:
      return add_uniform_noise(apply_sepia(rgb), spec.seed, spec.noise_lo, spec.noise_hi);
  }
  return rgb;
}

inline Image8 apply(const FilterSpec& spec, const Image8& rgb) {
  if (rgb.channels() != 3) throw InputError("historic filters expect RGB input");
  if (spec.kind == FilterKind::None) return rgb;
  return quantize(apply_float(spec, to_float(rgb)));
}

/// With probability 1 - p_filter no filter; otherwise one of the three
/// degradations, each equally likely. Consumes exactly one uniform draw.
inline FilterSpec sample_filter(Rng& rng, double p_filter, FilterSpec params = {}) {
  if (!(p_filter >= 0.0 && p_filter <= 1.0)) throw ConfigError("p_filter must be in [0,1]");
  const double u = rng.uniform01();
  if (u >= p_filter) {
    params.kind = FilterKind::None;
    return params;
  }
  const int k = std::min(2, static_cast<int>(u / p_filter * 3.0));
  params.kind = static_cast<FilterKind>(k + 1);
  return params;
}

}  // namespace forge
