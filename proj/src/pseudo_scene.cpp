#include "ssal/pseudo_scene.hpp"

#include <algorithm>
#include <map>
#include <random>

#include "ssal/errors.hpp"
#include "ssal/geometry.hpp"

namespace ssal {

PointCloud mine_background(const PointCloud& points, const std::vector<Detection>& dets, double removal_floor,
                           double margin, const std::vector<Box3D>& preserved_fp) {
  if (!(removal_floor >= 0.0 && removal_floor <= 1.0)) throw ConfigError("removal floor must lie in [0, 1]");
  std::vector<Box3D> removed;
  for (const auto& d : dets) {
    if (d.score < removal_floor) continue;
    const bool preserve = std::any_of(preserved_fp.begin(), preserved_fp.end(), [&](const Box3D& fp) {
      return iou_3d(fp, d.box) >= kPreserveMatchIou;
    });
    if (!preserve) removed.push_back(d.box);
  }
  return remove_points_in_boxes(points, removed, margin);
}

PseudoScene compose(const PointCloud& background, const BoxBank& bank, int max_objects, std::uint64_t seed,
                    const std::string& scene_id, int class_count) {
  if (max_objects < 0) throw ConfigError("max_objects must be >= 0");
  PseudoScene out;
  out.scene_id = scene_id;
  out.points = background;
  if (max_objects == 0) return out;

  std::map<int, std::vector<const BankEntry*>> by_class;
  for (const auto& e : bank.entries)
    if (!e.is_fp && !e.pc.empty()) by_class[e.cls].push_back(&e);
  std::mt19937_64 rng(seed);
  for (auto& [cls, list] : by_class) std::shuffle(list.begin(), list.end(), rng);

  std::vector<const BankEntry*> order;
  for (std::size_t round = 0;; ++round) {
    bool any = false;
    for (auto& [cls, list] : by_class)
      if (round < list.size()) {
        order.push_back(list[round]);
        any = true;
      }
    if (!any) break;
  }

  std::vector<Box3D> placed;
  for (const BankEntry* e : order) {
    if (static_cast<int>(placed.size()) >= max_objects) break;
    const bool collides = std::any_of(placed.begin(), placed.end(),
                                      [&](const Box3D& b) { return iou_3d(b, e->loc) > 0.0; });
    if (collides) continue;
    const bool occupied = std::any_of(background.begin(), background.end(),
                                      [&](const Point& p) { return point_in_box(p, e->loc, 0.0); });
    if (occupied) continue;
    const bool has_support =
        std::any_of(e->pc.begin(), e->pc.end(), [&](const Point& p) { return point_in_box(p, e->loc, 0.0); });
    if (!has_support) continue;

    placed.push_back(e->loc);
    out.points.insert(out.points.end(), e->pc.begin(), e->pc.end());
    Detection label;
    label.scene_id = scene_id;
    label.class_id = e->cls;
    label.probs = one_hot(e->cls, class_count);
    label.score = 1.0;
    label.box = e->loc;
    label.source = Source::GroundTruth;
    out.pseudo_labels.push_back(std::move(label));
    out.provenance.emplace_back(e->id, e->scene_id);
  }
  return out;
}

json emit_dataset(const std::vector<PseudoScene>& scenes, const fs::path& dir) {
  json list = json::array();
  for (const auto& s : scenes) {
    const std::string points = s.scene_id + ".bin";
    const std::string labels = s.scene_id + ".labels.jsonl";
    save_point_cloud(dir / points, s.points);
    write_detections(dir / labels, s.pseudo_labels);
    json prov = json::array();
    for (const auto& [id, origin] : s.provenance) prov.push_back(json{{"entry_id", id}, {"scene_id", origin}});
    list.push_back(json{{"scene_id", s.scene_id}, {"points", points}, {"labels", labels}, {"provenance", prov}});
  }
  json manifest{{"scenes", list}};
  write_text(dir / "pseudo_manifest.json", manifest.dump(2) + "\n");
  return manifest;
}

std::vector<PseudoScene> load_dataset(const fs::path& dir) {
  json manifest;
  try {
    manifest = json::parse(read_text(dir / "pseudo_manifest.json"));
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("corrupt pseudo manifest: ") + e.what());
  }
  std::vector<PseudoScene> out;
  try {
    for (const auto& j : manifest.at("scenes")) {
      PseudoScene s;
      s.scene_id = j.at("scene_id").get<std::string>();
      s.points = load_point_cloud(dir / j.at("points").get<std::string>());
      s.pseudo_labels = read_detections(dir / j.at("labels").get<std::string>(), Source::GroundTruth);
      for (const auto& p : j.at("provenance"))
        s.provenance.emplace_back(p.at("entry_id").get<std::uint64_t>(), p.at("scene_id").get<std::string>());
      out.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("corrupt pseudo manifest: ") + e.what());
  }
  return out;
}

}  // namespace ssal
