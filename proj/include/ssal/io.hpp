#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ssal/types.hpp"

namespace ssal {

namespace fs = std::filesystem;
using nlohmann::json;

// ---- detection records (JSONL) ----------------------------------------------

/// Parses one JSONL record:
///   {"scene_id": "...", "class": 0, "score": 0.9, "probs": [...],
///    "box": {"cx":..,"cy":..,"cz":..,"dx":..,"dy":..,"dz":..,"yaw":..},
///    "feature": [...], "source": "cpsp"}
/// `feature` and `source` are optional. Probabilities within 1e-4 of summing
/// to one are renormalized. class_id is recomputed as argmax(probs).
Detection parse_detection_record(std::string_view line, Source default_source = Source::Surrogate);

json detection_to_json(const Detection& det);
Detection detection_from_json(const json& j, Source default_source = Source::Surrogate);
std::string serialize_detection(const Detection& det);

json box_to_json(const Box3D& box);
Box3D box_from_json(const json& j);

std::vector<Detection> read_detections(const fs::path& path, Source default_source = Source::Surrogate);
void write_detections(const fs::path& path, const std::vector<Detection>& dets);

/// Groups detections by scene_id, preserving file order within a scene.
std::map<std::string, std::vector<Detection>> group_by_scene(const std::vector<Detection>& dets);

// ---- point clouds -------------------------------------------------------------

/// KITTI-style little-endian float32 x,y,z,intensity records. Files ending in
/// `.csv` are read as 3 or 4 comma-separated columns (an optional header line
/// is skipped).
PointCloud load_point_cloud(const fs::path& path);
void save_point_cloud(const fs::path& path, const PointCloud& points);

// ---- pool manifest ------------------------------------------------------------

struct PoolManifest {
  Pool pool;
  ClassSet classes;
  std::map<std::string, std::vector<IgnoreRegion>> ignore_regions;
};

json ignore_region_to_json(const IgnoreRegion& region);
IgnoreRegion ignore_region_from_json(const json& j);

PoolManifest read_pool_manifest(const fs::path& path);
void write_pool_manifest(const fs::path& path, const PoolManifest& manifest);

// ---- DontCare frame exclusion ---------------------------------------------------

/// True when the detection center lies inside the region. ImageRect regions
/// project the center through the 3x4 matrix; points behind the camera never
/// hit. Throws ConfigError for an ImageRect without projection.
bool center_in_region(const Box3D& box, const IgnoreRegion& region);

/// Scene ids (input order) kept after dropping every scene where strictly
/// more than `max_hits` predicted box centers fall in an ignore region.
std::vector<std::string> filter_ignore_frames(
    const std::vector<Scene>& scenes,
    const std::map<std::string, std::vector<Detection>>& detections, int max_hits = 2);

// ---- small file helpers ---------------------------------------------------------

std::string read_text(const fs::path& path);
void write_text(const fs::path& path, std::string_view text);

}  // namespace ssal
