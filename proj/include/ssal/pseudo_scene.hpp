#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "ssal/box_bank.hpp"
#include "ssal/io.hpp"
#include "ssal/types.hpp"

namespace ssal {

struct PseudoScene {
  std::string scene_id;
  PointCloud points;
  std::vector<Detection> pseudo_labels;  // one-hot, source GroundTruth
  std::vector<std::pair<std::uint64_t, std::string>> provenance;  // (bank entry id, origin scene)

  bool operator==(const PseudoScene&) const = default;
};

inline constexpr double kDefaultRemovalFloor = 0.1;
inline constexpr double kPreserveMatchIou = 0.5;

/// Object-free background: points of every detection scoring at least
/// `removal_floor` are removed (box inflated by `margin`). Detections that
/// match a preserved false-positive box (iou_3d >= 0.5) keep their points.
PointCloud mine_background(const PointCloud& points, const std::vector<Detection>& dets,
                           double removal_floor = kDefaultRemovalFloor,
                           double margin = kDefaultPointMargin,
                           const std::vector<Box3D>& preserved_fp = {});

/// Pastes non-FP bank objects into a background at their original pose.
/// Candidates are visited class by class in round-robin (ascending class id),
/// each class list shuffled by `seed`. A candidate is rejected if its box
/// overlaps an already placed box or contains a background point; placing
/// stops at `max_objects`. Labels use `class_count`-way one-hot probs.
PseudoScene compose(const PointCloud& background, const BoxBank& bank, int max_objects, std::uint64_t seed,
                    const std::string& scene_id, int class_count);

/// Writes <id>.bin, <id>.labels.jsonl and pseudo_manifest.json under dir.
/// Returns the manifest. Throws IoError on write failure.
json emit_dataset(const std::vector<PseudoScene>& scenes, const std::filesystem::path& dir);

/// Reads a directory written by emit_dataset.
std::vector<PseudoScene> load_dataset(const std::filesystem::path& dir);

}  // namespace ssal
