#include "ssal/cal_selector.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "ssal/errors.hpp"
#include "ssal/geometry.hpp"
#include "ssal/parallel.hpp"

namespace ssal {

void SelectionConfig::validate() const {
  if (budget_boxes < 0) throw ConfigError("budget must be >= 0");
  if (!(t_sim > 0.0 && t_sim <= 1.0)) throw ConfigError("T_sim must lie in (0, 1]");
  if (!(reduced_weight > 0.0 && reduced_weight < 1.0)) throw ConfigError("reduced weight must lie in (0, 1)");
  if (diversity_bank_size < 1) throw ConfigError("diversity bank size must be >= 1");
}

// ---- features ----------------------------------------------------------------------

Vector geometric_descriptor(const Box3D& box, const PointCloud& points) {
  Vector f(kGeometricFeatureDim, 0.0);
  f[0] = std::log(box.dx);
  f[1] = std::log(box.dy);
  f[2] = std::log(box.dz);
  f[3] = std::sin(box.yaw);
  f[4] = std::cos(box.yaw);
  f[5] = box.cz;
  const auto inside = points_in_box(points, box, 0.0);
  f[6] = std::log1p(static_cast<double>(inside.size()));
  const double half_diag = std::sqrt(box.dx * box.dx + box.dy * box.dy + box.dz * box.dz) / 2;
  if (!inside.empty()) {
    for (std::size_t i : inside) {
      const auto& p = points[i];
      const double r = std::sqrt((p.x - box.cx) * (p.x - box.cx) + (p.y - box.cy) * (p.y - box.cy) +
                                 (p.z - box.cz) * (p.z - box.cz)) /
                       half_diag;
      const int bin = std::min(7, static_cast<int>(r * 8));
      f[7 + bin] += 1.0;
    }
    for (int b = 0; b < 8; ++b) f[7 + b] /= static_cast<double>(inside.size());
  }
  f[15] = std::log1p(std::hypot(box.cx, box.cy));
  double norm = 0;
  for (double v : f) norm += v * v;
  norm = std::sqrt(norm);
  for (double& v : f) v /= norm;
  return f;
}

std::vector<Vector> box_features(const std::vector<Detection>& dets, const PointCloud& points) {
  std::vector<Vector> out;
  out.reserve(dets.size());
  for (const auto& d : dets) out.push_back(d.feature.empty() ? geometric_descriptor(d.box, points) : d.feature);
  return out;
}

Candidate make_candidate(const std::string& scene_id, const std::vector<Detection>& normal,
                         const std::vector<Detection>& cpsp, const PointCloud& points,
                         const CandidateOptions& options) {
  Candidate c;
  c.scene_id = scene_id;
  c.ensemble = ensemble_merge(normal, cpsp, options.conf_thresh, options.nms_iou);
  c.intersection = intersect_predictions(normal, cpsp, options.match_iou);
  c.features = box_features(c.ensemble, points);
  return c;
}

std::vector<Candidate> make_candidates(const std::vector<std::string>& scene_ids,
                                       const std::map<std::string, std::vector<Detection>>& normal,
                                       const std::map<std::string, std::vector<Detection>>& cpsp,
                                       const std::map<std::string, PointCloud>& points,
                                       const CandidateOptions& options, int threads) {
  static const std::vector<Detection> kNone;
  static const PointCloud kNoPoints;
  for (const auto& id : scene_ids)
    if (!normal.count(id) && !cpsp.count(id))
      throw MissingDataError("scene '" + id + "' has no detections from either model");
  std::vector<Candidate> out(scene_ids.size());
  parallel_for(scene_ids.size(), threads, [&](std::size_t i) {
    const auto& id = scene_ids[i];
    auto n = normal.find(id);
    auto c = cpsp.find(id);
    auto p = points.find(id);
    out[i] = make_candidate(id, n == normal.end() ? kNone : n->second, c == cpsp.end() ? kNone : c->second,
                            p == points.end() ? kNoPoints : p->second, options);
  });
  return out;
}

// ---- class balance and diversity -------------------------------------------------------

std::vector<double> class_caps(const std::vector<double>& labeled_counts, double budget, double min_cap) {
  if (labeled_counts.empty()) throw ConfigError("class caps need at least one class");
  if (budget < 0) throw ConfigError("budget must be >= 0");
  std::vector<double> n(labeled_counts.size());
  for (std::size_t c = 0; c < n.size(); ++c) n[c] = std::max(1.0, labeled_counts[c]);
  // (N/N_c) / sum_i (N/N_i) rewritten as 1 / sum_i (N_c/N_i): N cancels, and
  // equal counts give exactly B/|C|.
  std::vector<double> caps(n.size());
  for (std::size_t c = 0; c < n.size(); ++c) {
    double denom = 0;
    for (double v : n) denom += n[c] / v;
    caps[c] = std::max(budget / denom, min_cap);
  }
  return caps;
}

namespace {

double norm_of(const Vector& v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

double scene_similarity(const std::vector<Vector>& scene_features, const std::vector<Vector>& bank) {
  if (bank.empty() || scene_features.empty()) return -1.0;
  std::vector<double> bank_norms;
  bank_norms.reserve(bank.size());
  for (const auto& f : bank) {
    bank_norms.push_back(norm_of(f));
    if (bank_norms.back() <= 0) throw InvariantError("zero-length feature in selection bank");
  }
  double total = 0;
  for (const auto& f : scene_features) {
    const double nf = norm_of(f);
    if (nf <= 0) throw InvariantError("zero-length scene feature");
    double best = -1.0;
    for (std::size_t j = 0; j < bank.size(); ++j) {
      if (bank[j].size() != f.size()) throw InvariantError("feature dimension mismatch");
      double dot = 0;
      for (std::size_t d = 0; d < f.size(); ++d) dot += f[d] * bank[j][d];
      best = std::max(best, dot / (nf * bank_norms[j]));
    }
    total += best;
  }
  return total / static_cast<double>(scene_features.size());
}

void update_feature_bank(std::vector<Vector>& bank, const std::vector<Vector>& accepted, int m,
                         std::uint64_t seed) {
  if (m < 1) throw ConfigError("feature bank size must be >= 1");
  bank.insert(bank.end(), accepted.begin(), accepted.end());
  if (static_cast<int>(bank.size()) > m) bank = representative_features(bank, m, seed);
}

// ---- Algorithm ------------------------------------------------------------------------

const char* to_string(SelectionEvent::Kind kind) {
  switch (kind) {
    case SelectionEvent::Kind::Accept: return "accept";
    case SelectionEvent::Kind::Skip: return "skip";
    case SelectionEvent::Kind::Reweight: return "reweight";
    case SelectionEvent::Kind::Resort: return "resort";
    case SelectionEvent::Kind::Exhausted: return "exhausted";
  }
  return "accept";
}

SelectionResult select(const std::vector<Candidate>& pool, int class_count, const std::vector<double>& caps,
                       const SelectionConfig& config, int threads) {
  config.validate();
  if (class_count < 2) throw ConfigError("selection needs at least two classes");
  if (static_cast<int>(caps.size()) != class_count) throw ConfigError("one cap per class required");

  SelectionResult r;
  r.caps = caps;
  r.box_counts.assign(class_count, 0);
  ClassWeights weights(class_count);

  std::vector<double> score(pool.size());
  auto rescore = [&](const std::vector<std::size_t>& which) {
    parallel_for(which.size(), threads,
                 [&](std::size_t k) { score[which[k]] = scene_uncertainty(pool[which[k]].ensemble, class_count, weights); });
  };
  auto resort = [&](std::vector<std::size_t>& order) {
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (score[a] != score[b]) return score[a] > score[b];
      return pool[a].scene_id < pool[b].scene_id;
    });
  };

  std::vector<std::size_t> remaining(pool.size());
  std::iota(remaining.begin(), remaining.end(), 0);
  rescore(remaining);
  resort(remaining);

  std::vector<Vector> bank;
  int step = 0;
  auto log = [&](SelectionEvent::Kind kind, const std::string& id, double unc, double sim, int cls) {
    r.events.push_back({kind, step++, id, unc, sim, cls, r.box_counts, r.num_boxes});
  };

  std::size_t idx = 0;
  while (r.num_boxes < config.budget_boxes) {
    if (idx >= remaining.size()) {
      r.exhausted = true;
      log(SelectionEvent::Kind::Exhausted, "", 0, 0, -1);
      break;
    }
    const std::size_t cand = remaining[idx];
    const Candidate& scene = pool[cand];
    const double sim = config.diversity ? scene_similarity(scene.features, bank) : -1.0;
    if (sim >= config.t_sim) {
      log(SelectionEvent::Kind::Skip, scene.scene_id, score[cand], sim, -1);
      ++idx;
      continue;
    }

    // Accepted scenes leave the pool; the cursor then already points at the
    // next scene in sorted order.
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(idx));
    r.chosen.push_back(scene.scene_id);
    std::vector<int> added(class_count, 0);
    for (const auto& d : scene.intersection) {
      if (d.class_id < 0 || d.class_id >= class_count) throw InvariantError("detection class outside class set");
      ++added[d.class_id];
    }
    std::vector<int> crossed;
    if (config.class_balance)
      for (int c = 0; c < class_count; ++c)
        if (r.box_counts[c] < caps[c] && r.box_counts[c] + added[c] >= caps[c]) crossed.push_back(c);
    for (int c = 0; c < class_count; ++c) {
      r.box_counts[c] += added[c];
      r.num_boxes += added[c];
    }
    if (config.diversity)
      update_feature_bank(bank, scene.features, config.diversity_bank_size, config.seed);
    log(SelectionEvent::Kind::Accept, scene.scene_id, score[cand], sim, -1);

    if (!crossed.empty()) {
      for (int c : crossed) {
        weights.set(c, config.reduced_weight);
        log(SelectionEvent::Kind::Reweight, scene.scene_id, 0, 0, c);
      }
      rescore(remaining);
      resort(remaining);
      log(SelectionEvent::Kind::Resort, "", 0, 0, -1);
      idx = 0;
    }
  }
  r.weights = weights.values();
  return r;
}

json selection_report_json(const SelectionResult& r, const ClassSet& classes) {
  auto class_name = [&](int c) {
    return c >= 0 && c < classes.size() ? classes.names[c] : "class" + std::to_string(c);
  };
  json events = json::array();
  for (const auto& e : r.events) {
    json j{{"step", e.step}, {"type", to_string(e.kind)}, {"num_boxes", e.num_boxes}, {"box_counts", e.box_counts}};
    switch (e.kind) {
      case SelectionEvent::Kind::Accept:
      case SelectionEvent::Kind::Skip:
        j["scene_id"] = e.scene_id;
        j["uncertainty"] = e.uncertainty;
        j["similarity"] = e.similarity;
        break;
      case SelectionEvent::Kind::Reweight:
        j["scene_id"] = e.scene_id;
        j["class"] = class_name(e.class_id);
        break;
      default:
        break;
    }
    events.push_back(std::move(j));
  }
  json per_class = json::object();
  for (std::size_t c = 0; c < r.box_counts.size(); ++c)
    per_class[class_name(static_cast<int>(c))] =
        json{{"boxes", r.box_counts[c]}, {"cap", r.caps[c]}, {"weight", r.weights[c]}};
  return json{{"selected", r.chosen},
              {"exhausted", r.exhausted},
              {"num_boxes", r.num_boxes},
              {"classes", per_class},
              {"events", events}};
}

std::string selection_summary_csv(const SelectionResult& r, const ClassSet& classes) {
  std::string out = "class,selected_boxes,cap,weight\n";
  char line[256];
  for (std::size_t c = 0; c < r.box_counts.size(); ++c) {
    const std::string name = static_cast<int>(c) < classes.size() ? classes.names[c] : "class" + std::to_string(c);
    std::snprintf(line, sizeof line, "%s,%d,%.10g,%.10g\n", name.c_str(), r.box_counts[c], r.caps[c], r.weights[c]);
    out += line;
  }
  std::snprintf(line, sizeof line, "total,%d,,\n", r.num_boxes);
  out += line;
  return out;
}

}  // namespace ssal
