#pragma once

#include <string>
#include <vector>

#include "ssal/types.hpp"

namespace ssal {

inline constexpr double kDefaultMatchFloor = 0.5;

/// Default confidence bins: [0,0.3], (0.3,0.5], (0.5,0.8], (0.8,1].
std::vector<double> default_bin_edges();

struct ReliabilityBin {
  double lo = 0, hi = 0;
  std::size_t count = 0;
  std::size_t true_positives = 0;
  double mean_confidence = 0;
  double precision = 0;  // 0 for an empty bin
};

struct ReliabilityReport {
  std::vector<double> edges;
  std::vector<ReliabilityBin> bins;
  double d_ece = 0;
  std::size_t total = 0;
};

/// Class-aware greedy matching in descending score order (ties keep input
/// order). Each ground-truth box is matched at most once, to the unmatched
/// one with the highest iou_3d >= iou_floor. Result aligns with `dets`.
std::vector<bool> match_predictions(const std::vector<Detection>& dets, const std::vector<Detection>& gt,
                                    double iou_floor = kDefaultMatchFloor);

/// Confidence-binned reliability with right-closed bins (the first bin also
/// holds its left edge) and the confidence-only detection ECE
///   sum_bins (count / N) |precision - mean confidence|.
/// Throws ConfigError unless edges strictly increase from 0 to 1.
ReliabilityReport reliability(const std::vector<Detection>& dets, const std::vector<bool>& matches,
                              const std::vector<double>& edges = default_bin_edges());

/// "bin_lo,bin_hi,count,mean_conf,precision" rows with a header line.
std::string reliability_csv(const ReliabilityReport& report);

}  // namespace ssal
