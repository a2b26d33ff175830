#include "ssal/box_bank.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <tuple>

#include "ssal/clustering.hpp"
#include "ssal/errors.hpp"
#include "ssal/io.hpp"
#include "ssal/uncertainty.hpp"

namespace ssal {

namespace {

PointCloud crop(const PointCloud& points, const Box3D& box, double margin) {
  PointCloud out;
  for (std::size_t i : points_in_box(points, box, margin)) out.push_back(points[i]);
  return out;
}

}  // namespace

std::vector<BankEntry> extract_confident(const Scene& scene, const std::vector<Detection>& dets, int k,
                                         std::uint64_t seed, double margin) {
  if (dets.empty()) return {};
  if (scene.points.empty()) throw MissingDataError("scene '" + scene.scene_id + "' has no points loaded");
  std::vector<double> entropies;
  entropies.reserve(dets.size());
  for (const auto& d : dets) entropies.push_back(box_entropy(d.probs));
  std::vector<BankEntry> out;
  for (std::size_t i : confident_group(entropies, k, seed)) {
    BankEntry e;
    e.cls = dets[i].class_id;
    e.loc = dets[i].box;
    e.score = entropies[i];
    e.scene_id = scene.scene_id;
    e.pc = crop(scene.points, dets[i].box, margin);
    if (e.pc.empty()) continue;
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<BankEntry> mine_false_positives(const Scene& scene, const std::vector<Detection>& dets,
                                            double fp_conf_floor, const std::vector<Detection>* verified,
                                            double margin) {
  if (!verified) {
    if (!scene.gt) throw MissingDataError("no verification set for false-positive mining in '" + scene.scene_id + "'");
    verified = &*scene.gt;
  }
  std::vector<BankEntry> out;
  for (const auto& d : dets) {
    if (d.score < fp_conf_floor) continue;
    double best = 0;
    for (const auto& v : *verified) best = std::max(best, iou_3d(d.box, v.box));
    if (best >= kFpMaxVerifiedIou) continue;
    BankEntry e;
    e.cls = d.class_id;
    e.loc = d.box;
    e.score = box_entropy(d.probs);
    e.scene_id = scene.scene_id;
    e.pc = crop(scene.points, d.box, margin);
    e.is_fp = true;
    out.push_back(std::move(e));
  }
  return out;
}

void append_entries(BoxBank& bank, std::vector<BankEntry> entries) {
  for (auto& e : entries) {
    e.id = bank.next_id++;
    bank.entries.push_back(std::move(e));
  }
}

BoxBank refine(const BoxBank& bank, std::vector<BankEntry> new_entries, const RefineOptions& options) {
  if (!(options.overlap > 0.0 && options.overlap < 1.0)) throw ConfigError("overlap threshold must lie in (0, 1)");
  BoxBank out;
  out.round = bank.round + 1;
  out.next_id = bank.next_id;
  const int round = out.round;
  for (auto& e : new_entries) {
    e.id = out.next_id++;
    e.last_seen_round = round;
  }

  std::set<std::string> revisited;
  if (options.revisited_scenes)
    revisited = *options.revisited_scenes;
  else
    for (const auto& e : new_entries) revisited.insert(e.scene_id);

  // Candidates: bank entries first (index < bank size), then new entries.
  const std::size_t nb = bank.entries.size();
  auto candidate = [&](std::size_t i) -> const BankEntry& {
    return i < nb ? bank.entries[i] : new_entries[i - nb];
  };
  std::map<std::pair<std::string, bool>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < nb + new_entries.size(); ++i) {
    const auto& e = candidate(i);
    groups[{e.scene_id, e.is_fp}].push_back(i);
  }

  std::vector<bool> kept(nb + new_entries.size(), false);
  std::vector<int> seen(nb);
  for (std::size_t i = 0; i < nb; ++i) seen[i] = bank.entries[i].last_seen_round;

  for (auto& [key, members] : groups) {
    std::vector<std::size_t> order = members;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      // Ties favor the bank side: a new entry must be strictly better.
      return std::make_tuple(candidate(a).score, a >= nb) < std::make_tuple(candidate(b).score, b >= nb);
    });
    std::vector<std::size_t> winners;
    for (std::size_t i : order) {
      const bool blocked = std::any_of(winners.begin(), winners.end(), [&](std::size_t w) {
        return iou_3d(candidate(w).loc, candidate(i).loc) >= options.overlap;
      });
      if (!blocked) {
        winners.push_back(i);
        kept[i] = true;
      }
    }
    if (!revisited.count(key.first)) continue;
    for (std::size_t i : members) {
      if (i >= nb) continue;
      for (std::size_t j : members)
        if (j >= nb && iou_3d(bank.entries[i].loc, new_entries[j - nb].loc) >= options.overlap) {
          seen[i] = round;
          break;
        }
    }
  }

  for (std::size_t i = 0; i < nb; ++i) {
    if (!kept[i]) continue;
    BankEntry e = bank.entries[i];
    e.last_seen_round = seen[i];
    const bool stale = revisited.count(e.scene_id) && options.stale_rounds != kNeverStale &&
                       round - e.last_seen_round >= options.stale_rounds;
    if (!stale) out.entries.push_back(std::move(e));
  }
  for (std::size_t j = 0; j < new_entries.size(); ++j)
    if (kept[nb + j]) out.entries.push_back(std::move(new_entries[j]));
  return out;
}

// ---- persistence -----------------------------------------------------------------

void persist(const BoxBank& bank, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir / "points", ec);
  if (ec) throw IoError("cannot create " + (dir / "points").string() + ": " + ec.message());
  json entries = json::array();
  for (const auto& e : bank.entries) {
    const std::string rel = "points/" + std::to_string(e.id) + ".bin";
    save_point_cloud(dir / rel, e.pc);
    entries.push_back(json{{"id", e.id},
                           {"cls", e.cls},
                           {"loc", box_to_json(e.loc)},
                           {"score", e.score},
                           {"scene_id", e.scene_id},
                           {"is_fp", e.is_fp},
                           {"last_seen_round", e.last_seen_round},
                           {"points", rel}});
  }
  const json manifest{{"round", bank.round}, {"next_id", bank.next_id}, {"entries", entries}};
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

BoxBank load_bank(const fs::path& dir) {
  json manifest;
  try {
    manifest = json::parse(read_text(dir / "manifest.json"));
  } catch (const json::parse_error& e) {
    throw FormatError("corrupt bank manifest: " + std::string(e.what()));
  } catch (const IoError& e) {
    throw FormatError(std::string("unreadable bank manifest: ") + e.what());
  }
  BoxBank bank;
  try {
    bank.round = manifest.at("round").get<int>();
    bank.next_id = manifest.at("next_id").get<std::uint64_t>();
    for (const auto& j : manifest.at("entries")) {
      BankEntry e;
      e.id = j.at("id").get<std::uint64_t>();
      e.cls = j.at("cls").get<int>();
      e.loc = box_from_json(j.at("loc"));
      e.score = j.at("score").get<double>();
      e.scene_id = j.at("scene_id").get<std::string>();
      e.is_fp = j.at("is_fp").get<bool>();
      e.last_seen_round = j.at("last_seen_round").get<int>();
      const fs::path pts = dir / j.at("points").get<std::string>();
      if (!fs::exists(pts)) throw FormatError("bank point file missing: " + pts.string());
      e.pc = load_point_cloud(pts);
      bank.entries.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw FormatError("corrupt bank manifest: " + std::string(e.what()));
  } catch (const ParseError& e) {
    throw FormatError("corrupt bank manifest: " + std::string(e.what()));
  } catch (const InvariantError& e) {
    throw FormatError("corrupt bank manifest: " + std::string(e.what()));
  }
  return bank;
}

}  // namespace ssal
