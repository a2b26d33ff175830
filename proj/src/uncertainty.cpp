#include "ssal/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "ssal/errors.hpp"
#include "ssal/geometry.hpp"

namespace ssal {

ClassWeights::ClassWeights(int class_count, double initial) {
  if (class_count < 1) throw ConfigError("class weights need at least one class");
  w_.assign(class_count, 1.0);
  for (int c = 0; c < class_count; ++c) set(c, initial);
}

void ClassWeights::set(int class_id, double w) {
  if (!(w > 0.0 && w <= 1.0)) throw InvariantError("class weight must lie in (0, 1]");
  w_.at(class_id) = w;
}

double box_entropy(const std::vector<double>& probs) {
  if (probs.empty()) throw InvariantError("entropy of empty distribution");
  double sum = 0, h = 0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw InvariantError("negative or non-finite probability");
    sum += p;
    if (p > 0) h -= p * std::log(p);
  }
  if (std::abs(sum - 1.0) > 1e-6) throw InvariantError("probabilities do not sum to 1");
  return h;
}

double scene_uncertainty(const std::vector<Detection>& dets, int class_count, const ClassWeights& weights) {
  if (class_count < 2) throw ConfigError("scene uncertainty needs at least two classes");
  if (dets.empty()) return 0.0;
  double total = 0;
  for (const auto& d : dets) total += weights[d.class_id] * box_entropy(d.probs);
  return total / (static_cast<double>(dets.size()) * class_count);
}

double scene_uncertainty(const std::vector<Detection>& dets, int class_count) {
  return scene_uncertainty(dets, class_count, ClassWeights(class_count));
}

std::vector<Detection> ensemble_merge(const std::vector<Detection>& normal_dets,
                                      const std::vector<Detection>& cpsp_dets, double conf_thresh,
                                      double nms_iou) {
  std::vector<Detection> candidates;
  for (const auto& d : normal_dets)
    if (d.score >= conf_thresh) candidates.push_back(d);
  candidates.insert(candidates.end(), cpsp_dets.begin(), cpsp_dets.end());
  auto merged = nms(candidates, nms_iou);
  for (auto& d : merged) d.source = Source::Ensemble;
  return merged;
}

std::vector<Detection> intersect_predictions(const std::vector<Detection>& normal_dets,
                                             const std::vector<Detection>& cpsp_dets, double match_iou) {
  struct Pair {
    double iou;
    std::size_t n, c;
  };
  std::vector<Pair> pairs;
  for (std::size_t i = 0; i < normal_dets.size(); ++i)
    for (std::size_t j = 0; j < cpsp_dets.size(); ++j) {
      if (normal_dets[i].class_id != cpsp_dets[j].class_id) continue;
      const double iou = iou_3d(normal_dets[i].box, cpsp_dets[j].box);
      if (iou >= match_iou) pairs.push_back({iou, i, j});
    }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    return std::tie(b.iou, a.n, a.c) < std::tie(a.iou, b.n, b.c);
  });
  std::vector<bool> used_n(normal_dets.size(), false), used_c(cpsp_dets.size(), false);
  for (const auto& p : pairs) {
    if (used_n[p.n] || used_c[p.c]) continue;
    used_n[p.n] = used_c[p.c] = true;
  }
  std::vector<Detection> out;
  for (std::size_t j = 0; j < cpsp_dets.size(); ++j)
    if (used_c[j]) {
      out.push_back(cpsp_dets[j]);
      out.back().source = Source::Intersection;
    }
  return out;
}

}  // namespace ssal
