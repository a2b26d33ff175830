#include "ssal/io.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ssal/errors.hpp"

namespace ssal {

namespace {

static_assert(std::endian::native == std::endian::little,
              "point cloud I/O assumes a little-endian host");

double number_field(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_number())
    throw ParseError(std::string("missing numeric field '") + key + "'");
  return j[key].get<double>();
}

}  // namespace

json box_to_json(const Box3D& b) {
  return json{{"cx", b.cx}, {"cy", b.cy}, {"cz", b.cz}, {"dx", b.dx},
              {"dy", b.dy}, {"dz", b.dz}, {"yaw", b.yaw}};
}

Box3D box_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("box must be an object");
  return Box3D::make(number_field(j, "cx"), number_field(j, "cy"), number_field(j, "cz"),
                     number_field(j, "dx"), number_field(j, "dy"), number_field(j, "dz"),
                     number_field(j, "yaw"));
}

json detection_to_json(const Detection& d) {
  json j{{"scene_id", d.scene_id},
         {"class", d.class_id},
         {"score", d.score},
         {"probs", d.probs},
         {"box", box_to_json(d.box)},
         {"source", to_string(d.source)}};
  if (!d.feature.empty()) j["feature"] = d.feature;
  return j;
}

Detection detection_from_json(const json& j, Source default_source) {
  if (!j.is_object()) throw ParseError("detection record must be a JSON object");
  Detection d;
  if (!j.contains("scene_id") || !j["scene_id"].is_string())
    throw ParseError("missing string field 'scene_id'");
  d.scene_id = j["scene_id"].get<std::string>();
  if (!j.contains("probs") || !j["probs"].is_array() || j["probs"].empty())
    throw ParseError("missing array field 'probs'");
  try {
    d.probs = j["probs"].get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("probs: ") + e.what());
  }
  double sum = 0;
  for (double p : d.probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw InvariantError("class probability negative or non-finite");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-4) throw InvariantError("class probabilities deviate from 1 by more than 1e-4");
  if (std::abs(sum - 1.0) > 1e-12)
    for (double& p : d.probs) p /= sum;
  d.class_id = argmax(d.probs);
  d.score = number_field(j, "score");
  if (!j.contains("box")) throw ParseError("missing field 'box'");
  d.box = box_from_json(j["box"]);
  if (j.contains("feature")) {
    try {
      d.feature = j["feature"].get<std::vector<double>>();
    } catch (const json::exception& e) {
      throw ParseError(std::string("feature: ") + e.what());
    }
  }
  d.source = j.contains("source") ? source_from_string(j["source"].get<std::string>()) : default_source;
  validate(d);
  return d;
}

Detection parse_detection_record(std::string_view line, Source default_source) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed detection record: ") + e.what());
  }
  return detection_from_json(j, default_source);
}

std::string serialize_detection(const Detection& det) { return detection_to_json(det).dump(); }

std::vector<Detection> read_detections(const fs::path& path, Source default_source) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<Detection> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse_detection_record(line, default_source));
    } catch (const Error& e) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_detections(const fs::path& path, const std::vector<Detection>& dets) {
  std::string text;
  for (const auto& d : dets) {
    text += serialize_detection(d);
    text += '\n';
  }
  write_text(path, text);
}

std::map<std::string, std::vector<Detection>> group_by_scene(const std::vector<Detection>& dets) {
  std::map<std::string, std::vector<Detection>> out;
  for (const auto& d : dets) out[d.scene_id].push_back(d);
  return out;
}

// ---- point clouds ----------------------------------------------------------------

namespace {

void check_finite(const Point& p, const fs::path& path) {
  if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z) || !std::isfinite(p.intensity))
    throw FormatError("non-finite point coordinate in " + path.string());
}

PointCloud load_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  PointCloud out;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<double> cols;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      double v = std::strtod(cell.c_str(), &end);
      while (end && (*end == ' ' || *end == '\r' || *end == '\t')) ++end;
      if (end == cell.c_str() || (end && *end != '\0')) {
        numeric = false;
        break;
      }
      cols.push_back(v);
    }
    if (!numeric) {
      if (first) {
        first = false;
        continue;
      }
      throw FormatError("non-numeric CSV row in " + path.string());
    }
    first = false;
    if (cols.size() < 3 || cols.size() > 4)
      throw FormatError("CSV point rows need 3 or 4 columns in " + path.string());
    Point p{static_cast<float>(cols[0]), static_cast<float>(cols[1]), static_cast<float>(cols[2]),
            cols.size() == 4 ? static_cast<float>(cols[3]) : 0.0f};
    check_finite(p, path);
    out.push_back(p);
  }
  return out;
}

}  // namespace

PointCloud load_point_cloud(const fs::path& path) {
  if (path.extension() == ".csv") return load_csv(path);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() % 16 != 0)
    throw FormatError(path.string() + ": byte length " + std::to_string(bytes.size()) +
                      " is not a multiple of 16");
  PointCloud out(bytes.size() / 16);
  for (std::size_t i = 0; i < out.size(); ++i) {
    float v[4];
    std::memcpy(v, bytes.data() + 16 * i, 16);
    out[i] = Point{v[0], v[1], v[2], v[3]};
    check_finite(out[i], path);
  }
  return out;
}

void save_point_cloud(const fs::path& path, const PointCloud& points) {
  std::string bytes(points.size() * 16, '\0');
  for (std::size_t i = 0; i < points.size(); ++i) {
    const float v[4] = {points[i].x, points[i].y, points[i].z, points[i].intensity};
    std::memcpy(bytes.data() + 16 * i, v, 16);
  }
  write_text(path, bytes);
}

// ---- pool manifest -----------------------------------------------------------------

json ignore_region_to_json(const IgnoreRegion& r) {
  json j{{"kind", r.kind == IgnoreRegion::Kind::BevRect ? "bev" : "image"}, {"bounds", r.bounds}};
  if (r.projection) j["projection"] = *r.projection;
  return j;
}

IgnoreRegion ignore_region_from_json(const json& j) {
  IgnoreRegion r;
  try {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "bev")
      r.kind = IgnoreRegion::Kind::BevRect;
    else if (kind == "image")
      r.kind = IgnoreRegion::Kind::ImageRect;
    else
      throw ParseError("unknown ignore region kind '" + kind + "'");
    r.bounds = j.at("bounds").get<std::array<double, 4>>();
    if (j.contains("projection")) r.projection = j["projection"].get<std::array<double, 12>>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("ignore region: ") + e.what());
  }
  validate(r);
  return r;
}

PoolManifest read_pool_manifest(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  try {
    auto labeled = j.at("labeled").get<std::set<std::string>>();
    auto unlabeled = j.at("unlabeled").get<std::set<std::string>>();
    PoolManifest m{Pool(std::move(labeled), std::move(unlabeled)),
                   ClassSet(j.at("classes").get<std::vector<std::string>>()),
                   {}};
    if (j.contains("ignore_regions"))
      for (const auto& [id, regions] : j["ignore_regions"].items())
        for (const auto& r : regions) m.ignore_regions[id].push_back(ignore_region_from_json(r));
    return m;
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_pool_manifest(const fs::path& path, const PoolManifest& m) {
  json j{{"labeled", m.pool.labeled()}, {"unlabeled", m.pool.unlabeled()}, {"classes", m.classes.names}};
  if (!m.ignore_regions.empty()) {
    json regions = json::object();
    for (const auto& [id, list] : m.ignore_regions) {
      json arr = json::array();
      for (const auto& r : list) arr.push_back(ignore_region_to_json(r));
      regions[id] = arr;
    }
    j["ignore_regions"] = regions;
  }
  write_text(path, j.dump(2) + "\n");
}

// ---- DontCare ----------------------------------------------------------------------

bool center_in_region(const Box3D& box, const IgnoreRegion& r) {
  double a = box.cx, b = box.cy;
  if (r.kind == IgnoreRegion::Kind::ImageRect) {
    if (!r.projection) throw ConfigError("ImageRect ignore region without projection matrix");
    const auto& P = *r.projection;
    const double u = P[0] * box.cx + P[1] * box.cy + P[2] * box.cz + P[3];
    const double v = P[4] * box.cx + P[5] * box.cy + P[6] * box.cz + P[7];
    const double w = P[8] * box.cx + P[9] * box.cy + P[10] * box.cz + P[11];
    if (w <= 0) return false;
    a = u / w;
    b = v / w;
  }
  return a >= r.bounds[0] && a <= r.bounds[2] && b >= r.bounds[1] && b <= r.bounds[3];
}

std::vector<std::string> filter_ignore_frames(
    const std::vector<Scene>& scenes,
    const std::map<std::string, std::vector<Detection>>& detections, int max_hits) {
  std::vector<std::string> kept;
  for (const auto& scene : scenes) {
    int hits = 0;
    auto it = detections.find(scene.scene_id);
    if (it != detections.end() && !scene.ignore_regions.empty()) {
      for (const auto& det : it->second) {
        for (const auto& region : scene.ignore_regions) {
          if (center_in_region(det.box, region)) {
            ++hits;
            break;
          }
        }
      }
    } else {
      // ImageRect misconfiguration is still an error even without detections.
      for (const auto& region : scene.ignore_regions)
        if (region.kind == IgnoreRegion::Kind::ImageRect && !region.projection)
          throw ConfigError("ImageRect ignore region without projection matrix");
    }
    if (hits <= max_hits) kept.push_back(scene.scene_id);
  }
  return kept;
}

// ---- files ---------------------------------------------------------------------------

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_text(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace ssal
