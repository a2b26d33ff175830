#pragma once

#include <vector>

#include "ssal/types.hpp"

namespace ssal {

/// Per-class multiplier applied to box entropies; each in (0, 1].
class ClassWeights {
 public:
  explicit ClassWeights(int class_count, double initial = 1.0);

  double operator[](int class_id) const { return w_.at(class_id); }
  /// Throws InvariantError unless 0 < w <= 1.
  void set(int class_id, double w);
  int size() const { return static_cast<int>(w_.size()); }
  const std::vector<double>& values() const { return w_; }

 private:
  std::vector<double> w_;
};

/// Shannon entropy in nats with 0 ln 0 = 0. Throws InvariantError on an
/// invalid distribution.
double box_entropy(const std::vector<double>& probs);

/// Mean weighted box entropy normalized by the class count:
///   sum_b w(class_b) H(b) / (N_b |C|).
/// An empty detection list scores 0.
double scene_uncertainty(const std::vector<Detection>& dets, int class_count, const ClassWeights& weights);
double scene_uncertainty(const std::vector<Detection>& dets, int class_count);

inline constexpr double kDefaultEnsembleConf = 0.7;
inline constexpr double kDefaultNmsIou = 0.5;
inline constexpr double kDefaultMatchIou = 0.5;

/// Confident normal-model boxes plus every CPSP box, deduplicated by
/// class-agnostic NMS. Output is tagged Ensemble.
std::vector<Detection> ensemble_merge(const std::vector<Detection>& normal_dets,
                                      const std::vector<Detection>& cpsp_dets,
                                      double conf_thresh = kDefaultEnsembleConf,
                                      double nms_iou = kDefaultNmsIou);

/// Greedy one-to-one same-class matching by descending iou_3d (>= match_iou).
/// Each matched pair emits the CPSP-side detection tagged Intersection, in
/// CPSP input order.
std::vector<Detection> intersect_predictions(const std::vector<Detection>& normal_dets,
                                             const std::vector<Detection>& cpsp_dets,
                                             double match_iou = kDefaultMatchIou);

}  // namespace ssal
