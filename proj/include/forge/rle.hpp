#pragma once

#include <cstdint>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "forge/error.hpp"
#include "forge/image.hpp"

namespace forge {

/// Column-major run-length mask. Runs alternate background/foreground and
/// always start with a (possibly zero-length) background run.
struct RleMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint32_t> counts;

  friend bool operator==(const RleMask&, const RleMask&) = default;
};

inline RleMask rle_encode(const Mask& mask) {
  RleMask out{mask.height(), mask.width(), {}};
  bool current = false;
  std::uint32_t run = 0;
  for (int x = 0; x < mask.width(); ++x) {
    for (int y = 0; y < mask.height(); ++y) {
      const bool v = mask.get(x, y);
      if (v != current) {
        out.counts.push_back(run);
        run = 0;
        current = v;
      }
      ++run;
    }
  }
  out.counts.push_back(run);
  return out;
}

inline Mask rle_decode(const RleMask& rle) {
  if (rle.height < 0 || rle.width < 0) throw InputError("negative RLE size");
  const std::uint64_t total = static_cast<std::uint64_t>(rle.height) * rle.width;
  const std::uint64_t sum =
      std::accumulate(rle.counts.begin(), rle.counts.end(), std::uint64_t{0});
  if (sum != total) {
    throw InputError("RLE counts sum to " + std::to_string(sum) + ", expected " +
                     std::to_string(total));
  }
  Mask m(rle.width, rle.height);
  std::uint64_t pos = 0;
  bool fg = false;
  for (std::uint32_t run : rle.counts) {
    if (fg) {
      for (std::uint64_t i = pos; i < pos + run; ++i) {
        m.set(static_cast<int>(i / rle.height), static_cast<int>(i % rle.height));
      }
    }
    pos += run;
    fg = !fg;
  }
  return m;
}

inline std::uint64_t rle_area(const RleMask& rle) {
  std::uint64_t a = 0;
  for (std::size_t i = 1; i < rle.counts.size(); i += 2) a += rle.counts[i];
  return a;
}

/// Decodes the compact string form used by COCO annotation files
/// (6-bit chunks offset by 48, counts after the second delta-coded).
inline std::vector<std::uint32_t> coco_counts_from_string(std::string_view s) {
  std::vector<std::int64_t> cnts;
  std::size_t p = 0;
  while (p < s.size()) {
    std::int64_t x = 0;
    int k = 0;
    bool more = true;
    while (more) {
      if (p >= s.size()) throw InputError("truncated COCO RLE string");
      const std::int64_t c = static_cast<std::int64_t>(s[p]) - 48;
      if (c < 0 || c > 63) throw InputError("invalid character in COCO RLE string");
      x |= (c & 0x1f) << (5 * k);
      more = (c & 0x20) != 0;
      ++p;
      ++k;
      if (!more && (c & 0x10)) x |= static_cast<std::int64_t>(-1) * (std::int64_t{1} << (5 * k));
    }
    if (cnts.size() > 2) x += cnts[cnts.size() - 2];
    if (x < 0) throw InputError("negative run in COCO RLE string");
    cnts.push_back(x);
  }
  return {cnts.begin(), cnts.end()};
}

inline std::string coco_counts_to_string(const std::vector<std::uint32_t>& counts) {
  std::string s;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    std::int64_t x = counts[i];
    if (i > 2) x -= static_cast<std::int64_t>(counts[i - 2]);
    bool more = true;
    while (more) {
      std::int64_t c = x & 0x1f;
      x >>= 5;
      more = (c & 0x10) ? x != -1 : x != 0;
      if (more) c |= 0x20;
      s.push_back(static_cast<char>(c + 48));
    }
  }
  return s;
}

}  // namespace forge
