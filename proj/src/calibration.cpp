#include "ssal/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "ssal/errors.hpp"
#include "ssal/geometry.hpp"

namespace ssal {

std::vector<double> default_bin_edges() { return {0.0, 0.3, 0.5, 0.8, 1.0}; }

std::vector<bool> match_predictions(const std::vector<Detection>& dets, const std::vector<Detection>& gt,
                                    double iou_floor) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
  std::vector<bool> used(gt.size(), false), tp(dets.size(), false);
  for (std::size_t i : order) {
    double best = iou_floor;
    std::size_t best_g = gt.size();
    for (std::size_t g = 0; g < gt.size(); ++g) {
      if (used[g] || gt[g].class_id != dets[i].class_id) continue;
      const double iou = iou_3d(dets[i].box, gt[g].box);
      if (iou >= best && (best_g == gt.size() || iou > best)) {
        best = iou;
        best_g = g;
      }
    }
    if (best_g < gt.size()) {
      used[best_g] = true;
      tp[i] = true;
    }
  }
  return tp;
}

ReliabilityReport reliability(const std::vector<Detection>& dets, const std::vector<bool>& matches,
                              const std::vector<double>& edges) {
  if (edges.size() < 2 || edges.front() != 0.0 || edges.back() != 1.0)
    throw ConfigError("bin edges must span [0, 1]");
  for (std::size_t i = 1; i < edges.size(); ++i)
    if (!(edges[i] > edges[i - 1])) throw ConfigError("bin edges must be strictly increasing");
  if (matches.size() != dets.size()) throw InvariantError("match vector does not align with detections");

  ReliabilityReport r;
  r.edges = edges;
  r.total = dets.size();
  r.bins.resize(edges.size() - 1);
  std::vector<double> conf_sum(r.bins.size(), 0.0);
  for (std::size_t b = 0; b < r.bins.size(); ++b) {
    r.bins[b].lo = edges[b];
    r.bins[b].hi = edges[b + 1];
  }
  for (std::size_t i = 0; i < dets.size(); ++i) {
    const double s = dets[i].score;
    // first edge strictly >= s, bin is the interval ending there
    auto it = std::lower_bound(edges.begin() + 1, edges.end(), s);
    std::size_t b = it == edges.end() ? r.bins.size() - 1 : static_cast<std::size_t>(it - edges.begin()) - 1;
    ++r.bins[b].count;
    conf_sum[b] += s;
    if (matches[i]) ++r.bins[b].true_positives;
  }
  for (std::size_t b = 0; b < r.bins.size(); ++b) {
    auto& bin = r.bins[b];
    if (bin.count == 0) continue;
    const double n = static_cast<double>(bin.count);
    bin.mean_confidence = conf_sum[b] / n;
    bin.precision = static_cast<double>(bin.true_positives) / n;
    r.d_ece += n / static_cast<double>(r.total) * std::abs(bin.precision - bin.mean_confidence);
  }
  return r;
}

std::string reliability_csv(const ReliabilityReport& report) {
  std::string out = "bin_lo,bin_hi,count,mean_conf,precision\n";
  char line[160];
  for (const auto& b : report.bins) {
    std::snprintf(line, sizeof line, "%.6g,%.6g,%zu,%.10g,%.10g\n", b.lo, b.hi, b.count, b.mean_confidence,
                  b.precision);
    out += line;
  }
  return out;
}

}  // namespace ssal
