#pragma once

#include <array>
#include <optional>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ssal/box_bank.hpp"
#include "ssal/cal_selector.hpp"
#include "ssal/pseudo_scene.hpp"
#include "ssal/io.hpp"
#include "ssal/types.hpp"

namespace ssal {

// ---- world ------------------------------------------------------------------------

struct WorldConfig {
  int n_scenes = 100;
  std::vector<std::string> class_names{"Car", "Pedestrian", "Cyclist"};
  std::vector<double> class_mix{0.8, 0.15, 0.05};  // relative frequencies
  /// Mean full extents (dx, dy, dz) per class; sampled extents jitter by +-10%.
  std::vector<std::array<double, 3>> class_extents{{3.9, 1.6, 1.56}, {0.8, 0.6, 1.73}, {1.76, 0.6, 1.73}};
  int min_objects = 2;
  int max_objects = 10;
  double half_extent = 40.0;  // objects live in [-half_extent, half_extent]^2
  double min_range = 4.0;     // no objects closer to the sensor than this
  /// Points per object = point_density * visible face area / range^2 (min 3).
  double point_density = 8000.0;
  int background_points = 1500;
  int clutter_structures = 3;  // FP-prone point blobs per scene
  std::uint64_t seed = 0;

  /// Normalizes class_mix; ConfigError on invalid fields.
  void validate();
};

struct World {
  ClassSet classes;
  std::vector<Scene> scenes;                // each with gt
  std::vector<std::vector<Box3D>> clutter;  // per scene, FP-prone structures
  int dropped_objects = 0;                  // objects that could not be placed
};

/// Deterministic for a fixed config. Ground-truth boxes never overlap
/// (iou_3d = 0) and contain their sampled surface points. Objects that fail
/// 100 placement attempts are dropped and counted.
World gen_world(WorldConfig config, int threads = 1);

// ---- surrogate detector ---------------------------------------------------------

enum class CalibrationMode { Calibrated, Overconfident, Underconfident };

const char* to_string(CalibrationMode mode);
CalibrationMode calibration_mode_from_string(const std::string& s);

/// Parametric stand-in for a trained detector.
///
/// Every ground-truth object with n in-box points is detected with probability
/// recall_max[c] * n / (n + recall_half[c]). A detection has latent match
/// probability q = quality_max[c] * n / (n + quality_half[c]) + noise,
/// clamped to [0.02, 1]; with probability q it is a true positive (correct
/// class, box within sigma of the truth and at IoU >= 0.5), otherwise it is
/// misclassified per the confusion row or displaced off the object. Clutter
/// false positives have q ~ U(0, fp_quality_max), a class drawn from
/// fp_class_mix, and never match. The emitted
/// score is q (Calibrated), q^0.3 (Overconfident) or q^3 (Underconfident);
/// class probabilities put 1/C + (1 - 1/C) * score on the predicted class and
/// spread the rest evenly.
struct DetectorSkill {
  std::vector<double> recall_max;
  std::vector<double> recall_half;
  std::vector<double> quality_max;
  std::vector<double> quality_half;
  double quality_noise = 0.1;
  double sigma_xy = 0.05;
  double sigma_yaw = 0.02;
  double sigma_extent = 0.02;  // relative
  std::vector<std::vector<double>> confusion;
  double fp_rate = 1.0;  // expected false positives per scene
  double fp_quality_max = 0.05;
  /// Class prior for false positives; empty means uniform.
  std::vector<double> fp_class_mix;
  CalibrationMode calibration = CalibrationMode::Calibrated;
  int feature_dim = 16;  // 0 disables embeddings
  double feature_noise = 1.0;
  Source source = Source::Surrogate;
  std::uint64_t seed = 0;

  /// Perfect detector: recall 1, no noise, identity confusion, no FPs.
  static DetectorSkill perfect(int class_count);
  /// Moderately skilled default where rarer/smaller classes are harder.
  static DetectorSkill typical(int class_count);

  /// ConfigError when shapes mismatch or values are out of range.
  void validate(int class_count) const;
};

/// typical() with false positives labeled in proportion to the world's class
/// mix, as a detector trained on long-tailed data would.
DetectorSkill long_tail_skill(const WorldConfig& world, CalibrationMode mode, std::uint64_t seed);

/// Deterministic per (scene_id, skill seed).
std::vector<Detection> surrogate_detect(const Scene& scene, const DetectorSkill& skill, int class_count,
                                        const std::vector<Box3D>& clutter = {});

// ---- file fixtures ----------------------------------------------------------------

struct FixtureConfig {
  WorldConfig world;
  int labeled_scenes = 10;  // seeded random subset, the rest is unlabeled
  CalibrationMode normal_mode = CalibrationMode::Overconfident;
  CalibrationMode cpsp_mode = CalibrationMode::Calibrated;
  std::uint64_t seed = 0;
};

struct Fixture {
  World world;
  Pool pool;
  std::vector<std::vector<Detection>> normal;  // per scene
  std::vector<std::vector<Detection>> cpsp;
};

/// World plus both models' detections. Seeds derive from config.seed.
Fixture make_fixture(const FixtureConfig& config, int threads = 1);

/// Writes pool.json, scenes/<id>.bin, gt.jsonl, labels.jsonl (labeled scenes
/// only), normal.jsonl and cpsp.jsonl under dir.
void write_fixture(const Fixture& fixture, const std::filesystem::path& dir);

// ---- multi-round harness -----------------------------------------------------------

/// "Retraining" proxy: after each round the CPSP skill's quality and recall
/// ceilings rise by these steps (capped at 1).
struct SkillSchedule {
  double quality_step = 0.02;
  double recall_step = 0.01;
};

enum class Strategy { Cal, Random };

struct RoundsConfig {
  int n_rounds = 3;
  int initial_boxes = 50;  // ground-truth boxes in the random initial labeled pool
  SelectionConfig selection;
  CandidateOptions candidates;
  int bank_k = 20;
  double fp_conf_floor = 0.5;
  RefineOptions refine;
  int pseudo_scenes = 4;
  int pseudo_max_objects = 8;
  double removal_floor = kDefaultRemovalFloor;
  SkillSchedule schedule;
  bool random_baseline = true;
  std::uint64_t seed = 0;
  int threads = 1;
};

struct RoundStats {
  int round = 0;
  std::vector<std::string> selected;
  std::vector<int> selected_gt_boxes;  // annotated boxes per class
  int counted_boxes = 0;               // intersection boxes charged to the budget
  double mean_selected_entropy = 0;
  double rare_recall = 0;  // selected rare-class boxes / rare boxes in the unlabeled pool
  bool partial = false;
  int bank_entries = 0;
  int bank_fp_entries = 0;
  int pseudo_scenes = 0;
  int pseudo_labels = 0;
  double cpsp_quality_bonus = 0;  // schedule increment applied this round
};

struct TrackReport {
  Strategy strategy = Strategy::Cal;
  std::vector<RoundStats> rounds;
  std::vector<int> total_gt_boxes;
  double mean_selected_entropy = 0;  // over all selected scenes of all rounds
};

struct RoundsReport {
  int rare_class = 0;
  int initial_labeled_scenes = 0;
  std::vector<int> initial_labeled_boxes;
  int initial_unlabeled_scenes = 0;
  TrackReport cal;
  std::optional<TrackReport> random;
};

RoundsReport run_rounds(const World& world, const DetectorSkill& normal, const DetectorSkill& cpsp,
                        const RoundsConfig& config);

json rounds_report_json(const RoundsReport& report, const ClassSet& classes);
/// strategy,round,<class>..., counted_boxes, mean_entropy, rare_recall rows.
std::string rounds_report_csv(const RoundsReport& report, const ClassSet& classes);

}  // namespace ssal
