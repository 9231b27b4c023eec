#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "forge/error.hpp"
#include "forge/image.hpp"

namespace forge {

enum class Condition { Clean, Historic };

inline std::string_view to_string(Condition c) {
  return c == Condition::Clean ? "clean" : "historic";
}

struct EvalSample {
  std::string expression_id;
  Mask gt;
  Mask pred;
  Condition condition = Condition::Clean;
  std::string dataset;
};

/// Pixel counts behind one IoU; kept so overall IoU can be reduced exactly.
struct Overlap {
  std::uint64_t intersection = 0;
  std::uint64_t uni = 0;

  /// 1 when both masks are empty.
  double iou() const noexcept {
    return uni == 0 ? 1.0 : static_cast<double>(intersection) / static_cast<double>(uni);
  }
};

inline Overlap overlap(const Mask& gt, const Mask& pred) {
  if (gt.width() != pred.width() || gt.height() != pred.height()) {
    throw InputError("iou: mask dimensions differ (" + std::to_string(gt.width()) + "x" +
                     std::to_string(gt.height()) + " vs " + std::to_string(pred.width()) + "x" +
                     std::to_string(pred.height()) + ")");
  }
  Overlap o;
  auto a = gt.bits();
  auto b = pred.bits();
  for (std::size_t i = 0; i < a.size(); ++i) {
    o.intersection += (a[i] & b[i]);
    o.uni += (a[i] | b[i]);
  }
  return o;
}

inline double iou(const Mask& gt, const Mask& pred) { return overlap(gt, pred).iou(); }

inline std::vector<Overlap> overlaps(std::span<const EvalSample> samples) {
  std::vector<Overlap> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(overlap(s.gt, s.pred));
  return out;
}

inline double miou(std::span<const Overlap> ov) {
  if (ov.empty()) throw InputError("mIoU of an empty sample set");
  double sum = 0.0;
  for (const auto& o : ov) sum += o.iou();
  return sum / static_cast<double>(ov.size());
}

/// Summed intersections over summed unions; 1 when every union is empty.
inline double oiou(std::span<const Overlap> ov) {
  if (ov.empty()) throw InputError("oIoU of an empty sample set");
  Overlap total;
  for (const auto& o : ov) {
    total.intersection += o.intersection;
    total.uni += o.uni;
  }
  return total.iou();
}

/// Fraction of samples with IoU >= tau.
inline double pass_at(std::span<const Overlap> ov, double tau) {
  if (!(tau > 0.0 && tau <= 1.0)) throw InputError("pass_at threshold must be in (0,1]");
  if (ov.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& o : ov) hits += o.iou() >= tau ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(ov.size());
}

inline double miou(std::span<const EvalSample> s) { return miou(overlaps(s)); }
inline double oiou(std::span<const EvalSample> s) { return oiou(overlaps(s)); }
inline double pass_at(std::span<const EvalSample> s, double tau) { return pass_at(overlaps(s), tau); }

struct MetricRow {
  std::size_t count = 0;
  double miou = 0.0;
  double oiou = 0.0;
  double pass50 = 0.0;
  double pass70 = 0.0;
  double pass90 = 0.0;
};

inline MetricRow summarize(std::span<const Overlap> ov) {
  MetricRow r;
  r.count = ov.size();
  if (ov.empty()) return r;
  r.miou = miou(ov);
  r.oiou = oiou(ov);
  r.pass50 = pass_at(ov, 0.5);
  r.pass70 = pass_at(ov, 0.7);
  r.pass90 = pass_at(ov, 0.9);
  return r;
}

/// Dataset x condition table, plus an "all" dataset row.
struct EvalReport {
  std::map<std::string, std::map<Condition, MetricRow>> rows;
};

inline EvalReport evaluate(std::span<const EvalSample> samples) {
  std::map<std::string, std::map<Condition, std::vector<Overlap>>> groups;
  for (const auto& s : samples) {
    const Overlap o = overlap(s.gt, s.pred);
    groups[s.dataset][s.condition].push_back(o);
    groups["all"][s.condition].push_back(o);
  }
  EvalReport report;
  for (const auto& [dataset, by_cond] : groups)
    for (const auto& [cond, ov] : by_cond) report.rows[dataset][cond] = summarize(ov);
  return report;
}

}  // namespace forge
