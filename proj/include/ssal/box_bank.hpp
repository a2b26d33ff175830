#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ssal/geometry.hpp"
#include "ssal/types.hpp"

namespace ssal {

/// One banked object: a confident detection (or a mined likely false
/// positive) with the points cropped from its source scene.
struct BankEntry {
  std::uint64_t id = 0;
  int cls = 0;
  Box3D loc;
  double score = 0;  // uncertainty, lower is more confident
  std::string scene_id;
  PointCloud pc;
  bool is_fp = false;
  int last_seen_round = 0;

  bool operator==(const BankEntry&) const = default;
};

struct BoxBank {
  std::vector<BankEntry> entries;
  int round = 0;
  std::uint64_t next_id = 0;

  bool operator==(const BoxBank&) const = default;
};

inline constexpr double kDefaultOverlap = 0.3;
inline constexpr int kDefaultStaleRounds = 2;
inline constexpr int kNeverStale = std::numeric_limits<int>::max();
inline constexpr double kFpMaxVerifiedIou = 0.1;

/// Confident objects of one scene: box entropies are clustered in 1-D and
/// the lowest-center group is kept. Each entry carries the scene points inside
/// its box (inflated by `margin`); detections whose crop is empty are dropped.
/// Entry ids are left 0; the bank assigns them on insertion.
/// Throws MissingDataError when there are detections but no points.
std::vector<BankEntry> extract_confident(const Scene& scene, const std::vector<Detection>& dets, int k,
                                         std::uint64_t seed, double margin = kDefaultPointMargin);

/// Likely false positives: detections scoring at least `fp_conf_floor`
/// whose best iou_3d against every verified object is below 0.1. The
/// verification set defaults to the scene ground truth; MissingDataError when
/// neither is available.
std::vector<BankEntry> mine_false_positives(const Scene& scene, const std::vector<Detection>& dets,
                                            double fp_conf_floor,
                                            const std::vector<Detection>* verified = nullptr,
                                            double margin = kDefaultPointMargin);

struct RefineOptions {
  double overlap = kDefaultOverlap;
  int stale_rounds = kDefaultStaleRounds;
  /// Scenes processed this round. When unset, the scenes of the new entries.
  std::optional<std::set<std::string>> revisited_scenes;
};

/// One refinement round.
///  - Within a scene, bank and new entries compete (FP and non-FP entries
///    separately): candidates are taken in ascending score, bank entries
///    first on ties, and a candidate is kept unless an already kept one
///    overlaps it at iou_3d >= overlap. A new entry therefore replaces a bank
///    entry only with a strictly lower score.
///  - Bank entries of a revisited scene that some new entry overlaps get
///    last_seen_round = the new round; the others keep theirs and are removed
///    once (new round - last_seen_round) >= stale_rounds.
///  - The round counter increments; new entries get fresh ids.
BoxBank refine(const BoxBank& bank, std::vector<BankEntry> new_entries, const RefineOptions& options = {});

/// Appends entries with fresh ids, no competition.
void append_entries(BoxBank& bank, std::vector<BankEntry> entries);

/// manifest.json plus points/<id>.bin per entry.
void persist(const BoxBank& bank, const std::filesystem::path& dir);
/// Throws FormatError on a corrupt manifest or a missing point file.
BoxBank load_bank(const std::filesystem::path& dir);

}  // namespace ssal
