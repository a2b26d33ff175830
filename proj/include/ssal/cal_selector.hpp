#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ssal/clustering.hpp"
#include "ssal/io.hpp"
#include "ssal/types.hpp"
#include "ssal/uncertainty.hpp"

namespace ssal {

struct SelectionConfig {
  int budget_boxes = 0;         // b, counted on intersection boxes
  double t_sim = 0.9;           // skip scenes at least this similar to the selection
  double reduced_weight = 0.1;  // class weight once its cap is reached
  double min_cap = 1.0;         // floor on every class cap
  int diversity_bank_size = 64; // m, feature bank compaction target
  std::uint64_t seed = 0;
  bool class_balance = true;
  bool diversity = true;

  /// Throws ConfigError when a field is out of range.
  void validate() const;
};

/// One unlabeled scene as seen by the selector.
struct Candidate {
  std::string scene_id;
  std::vector<Detection> ensemble;      // scored with the class-weighted entropy
  std::vector<Detection> intersection;  // counted toward the budget and class caps
  std::vector<Vector> features;         // one per ensemble box
};

struct CandidateOptions {
  double conf_thresh = kDefaultEnsembleConf;
  double nms_iou = kDefaultNmsIou;
  double match_iou = kDefaultMatchIou;
};

inline constexpr int kGeometricFeatureDim = 16;

/// Fallback box descriptor when the detector supplies no embedding:
/// log extents (3), sin/cos yaw (2), center height, log1p of the in-box point
/// count, 8-bin radial histogram of in-box points (fractions, radius over the
/// half diagonal), log1p of the ground-plane range. L2-normalized.
Vector geometric_descriptor(const Box3D& box, const PointCloud& points);

/// Detector embedding when present, geometric descriptor otherwise.
std::vector<Vector> box_features(const std::vector<Detection>& dets, const PointCloud& points);

Candidate make_candidate(const std::string& scene_id, const std::vector<Detection>& normal,
                         const std::vector<Detection>& cpsp, const PointCloud& points,
                         const CandidateOptions& options = {});

/// Builds candidates for `scene_ids`; MissingDataError when a scene has no
/// entry in either detection map. Missing point clouds count as empty.
std::vector<Candidate> make_candidates(const std::vector<std::string>& scene_ids,
                                       const std::map<std::string, std::vector<Detection>>& normal,
                                       const std::map<std::string, std::vector<Detection>>& cpsp,
                                       const std::map<std::string, PointCloud>& points,
                                       const CandidateOptions& options = {}, int threads = 1);

/// Per-class selection caps
///   U_c = (N_total / N_c) / sum_i (N_total / N_i) * B,  then max(U_c, min_cap).
/// Counts below 1 are clamped to 1. ConfigError on an empty count vector.
std::vector<double> class_caps(const std::vector<double>& labeled_counts, double budget, double min_cap);

/// Mean over the scene's features of the best cosine similarity against the
/// bank. -1 when the bank or the scene has no features. InvariantError on a
/// zero-length vector.
double scene_similarity(const std::vector<Vector>& scene_features, const std::vector<Vector>& bank);

/// Appends `accepted`; when the bank grows past m it is compacted to m
/// representative (unit) features.
void update_feature_bank(std::vector<Vector>& bank, const std::vector<Vector>& accepted, int m,
                         std::uint64_t seed);

struct SelectionEvent {
  enum class Kind { Accept, Skip, Reweight, Resort, Exhausted };
  Kind kind = Kind::Accept;
  int step = 0;
  std::string scene_id;
  double uncertainty = 0;
  double similarity = 0;
  int class_id = -1;
  std::vector<int> box_counts;  // after the event
  int num_boxes = 0;
};

const char* to_string(SelectionEvent::Kind kind);

struct SelectionResult {
  std::vector<std::string> chosen;
  bool exhausted = false;
  int num_boxes = 0;
  std::vector<int> box_counts;
  std::vector<double> caps;
  std::vector<double> weights;
  std::vector<SelectionEvent> events;
};

/// Budgeted selection: walk the pool in descending weighted uncertainty
/// (ties by scene id), skip scenes too similar to the selection, accept the
/// rest. When an acceptance brings some class to its cap, that class's weight
/// drops to `reduced_weight`, the remaining pool is rescored and resorted and
/// the walk restarts. Stops once the counted boxes reach the budget, or flags
/// `exhausted` when the pool runs out first.
SelectionResult select(const std::vector<Candidate>& pool, int class_count, const std::vector<double>& caps,
                       const SelectionConfig& config, int threads = 1);

json selection_report_json(const SelectionResult& result, const ClassSet& classes);
/// class,selected_boxes,cap,weight rows plus a total row.
std::string selection_summary_csv(const SelectionResult& result, const ClassSet& classes);

}  // namespace ssal
