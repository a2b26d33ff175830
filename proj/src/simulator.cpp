#include "ssal/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <set>

#include "ssal/errors.hpp"
#include "ssal/geometry.hpp"
#include "ssal/parallel.hpp"
#include "ssal/pseudo_scene.hpp"
#include "ssal/uncertainty.hpp"

namespace ssal {

using Rng = std::mt19937_64;

namespace {

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
double gaussian(Rng& rng, double sigma) {
  return sigma > 0 ? std::normal_distribution<double>(0.0, sigma)(rng) : 0.0;
}

// Gap kept between generated structures so margin-inflated crops stay apart.
constexpr double kClearance = 0.3;
constexpr int kPlacementAttempts = 100;

Box3D inflated(const Box3D& b, double by) {
  Box3D o = b;
  o.dx += 2 * by;
  o.dy += 2 * by;
  return o;
}

bool collides(const Box3D& b, const std::vector<Box3D>& placed) {
  const Box3D grown = inflated(b, kClearance);
  return std::any_of(placed.begin(), placed.end(),
                     [&](const Box3D& p) { return bev_intersection_area(grown, p) > 0.0; });
}

// Uniform samples on the faces visible from the sensor at the origin,
// pulled 1% inward so they sit strictly inside the box.
void sample_surface(const Box3D& box, double density, Rng& rng, PointCloud& out) {
  const double c = std::cos(box.yaw), s = std::sin(box.yaw);
  struct Face {
    double nx, ny, nz;  // outward normal in box frame
    double area;
  };
  const std::array<Face, 6> faces{{{1, 0, 0, box.dy * box.dz},
                                   {-1, 0, 0, box.dy * box.dz},
                                   {0, 1, 0, box.dx * box.dz},
                                   {0, -1, 0, box.dx * box.dz},
                                   {0, 0, 1, box.dx * box.dy},
                                   {0, 0, -1, box.dx * box.dy}}};
  const std::array<double, 3> half{box.dx / 2, box.dy / 2, box.dz / 2};
  std::vector<int> visible;
  double area = 0;
  for (int f = 0; f < 6; ++f) {
    // face center and normal in world frame
    const Face& fc = faces[f];
    const double lx = fc.nx * half[0], ly = fc.ny * half[1], lz = fc.nz * half[2];
    const double wx = box.cx + c * lx - s * ly, wy = box.cy + s * lx + c * ly, wz = box.cz + lz;
    const double nx = c * fc.nx - s * fc.ny, ny = s * fc.nx + c * fc.ny, nz = fc.nz;
    if (nx * -wx + ny * -wy + nz * -wz > 0) {
      visible.push_back(f);
      area += fc.area;
    }
  }
  if (visible.empty()) return;
  const double range2 = std::max(1.0, box.cx * box.cx + box.cy * box.cy);
  const int n = std::max(3, static_cast<int>(std::lround(density * area / range2)));
  std::vector<double> weights;
  for (int f : visible) weights.push_back(faces[f].area);
  std::discrete_distribution<int> pick(weights.begin(), weights.end());
  for (int i = 0; i < n; ++i) {
    const Face& fc = faces[visible[pick(rng)]];
    double l[3];
    const double n3[3] = {fc.nx, fc.ny, fc.nz};
    for (int a = 0; a < 3; ++a)
      l[a] = n3[a] != 0 ? n3[a] * half[a] * 0.99 : uniform(rng, -half[a] * 0.99, half[a] * 0.99);
    out.push_back(Point{static_cast<float>(box.cx + c * l[0] - s * l[1]),
                        static_cast<float>(box.cy + s * l[0] + c * l[1]), static_cast<float>(box.cz + l[2]),
                        static_cast<float>(uniform(rng, 0.0, 1.0))});
  }
}

std::string scene_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "scene_%05d", i);
  return buf;
}

}  // namespace

void WorldConfig::validate() {
  if (n_scenes < 1) throw ConfigError("n_scenes must be >= 1");
  if (class_names.empty() || class_mix.size() != class_names.size() || class_extents.size() != class_names.size())
    throw ConfigError("class names, mix and extents must have equal nonzero length");
  double sum = 0;
  for (double f : class_mix) {
    if (!(f >= 0.0)) throw ConfigError("class frequencies must be nonnegative");
    sum += f;
  }
  if (!(sum > 0)) throw ConfigError("class frequencies must not all be zero");
  for (double& f : class_mix) f /= sum;
  for (const auto& e : class_extents)
    if (!(e[0] > 0 && e[1] > 0 && e[2] > 0)) throw ConfigError("class extents must be positive");
  if (min_objects < 0 || max_objects < min_objects) throw ConfigError("invalid objects-per-scene range");
  if (!(half_extent > min_range && min_range >= 0)) throw ConfigError("invalid spatial extent");
  if (point_density <= 0 || background_points < 0 || clutter_structures < 0)
    throw ConfigError("invalid point or clutter density");
}

World gen_world(WorldConfig config, int threads) {
  config.validate();
  World world;
  world.classes = ClassSet(config.class_names);
  const int C = world.classes.size();
  world.scenes.resize(config.n_scenes);
  world.clutter.resize(config.n_scenes);
  std::vector<int> dropped(config.n_scenes, 0);

  parallel_for(world.scenes.size(), threads, [&](std::size_t si) {
    Rng rng(mix_seed(config.seed, si));
    Scene& scene = world.scenes[si];
    scene.scene_id = scene_name(static_cast<int>(si));
    scene.gt.emplace();
    std::vector<Box3D> placed;
    const int n_obj = std::uniform_int_distribution<int>(config.min_objects, config.max_objects)(rng);
    std::discrete_distribution<int> pick_class(config.class_mix.begin(), config.class_mix.end());
    auto random_center = [&](double& x, double& y) {
      do {
        x = uniform(rng, -config.half_extent, config.half_extent);
        y = uniform(rng, -config.half_extent, config.half_extent);
      } while (std::hypot(x, y) < config.min_range);
    };
    for (int o = 0; o < n_obj; ++o) {
      const int cls = pick_class(rng);
      const auto& ext = config.class_extents[cls];
      bool ok = false;
      for (int attempt = 0; attempt < kPlacementAttempts && !ok; ++attempt) {
        double x, y;
        random_center(x, y);
        const double dx = ext[0] * uniform(rng, 0.9, 1.1), dy = ext[1] * uniform(rng, 0.9, 1.1),
                     dz = ext[2] * uniform(rng, 0.9, 1.1);
        const Box3D box = Box3D::make(x, y, dz / 2, dx, dy, dz, uniform(rng, -kPi, kPi));
        if (collides(box, placed)) continue;
        placed.push_back(box);
        sample_surface(box, config.point_density, rng, scene.points);
        Detection gt;
        gt.scene_id = scene.scene_id;
        gt.class_id = cls;
        gt.probs = one_hot(cls, C);
        gt.score = 1.0;
        gt.box = box;
        gt.source = Source::GroundTruth;
        scene.gt->push_back(std::move(gt));
        ok = true;
      }
      if (!ok) ++dropped[si];
    }
    for (int k = 0; k < config.clutter_structures; ++k) {
      for (int attempt = 0; attempt < kPlacementAttempts; ++attempt) {
        double x, y;
        random_center(x, y);
        const Box3D box = Box3D::make(x, y, 0, uniform(rng, 0.6, 1.2), uniform(rng, 0.6, 1.2),
                                      uniform(rng, 0.8, 2.0), uniform(rng, -kPi, kPi));
        Box3D grounded = box;
        grounded.cz = box.dz / 2;
        if (collides(grounded, placed)) continue;
        placed.push_back(grounded);
        world.clutter[si].push_back(grounded);
        sample_surface(grounded, config.point_density, rng, scene.points);
        break;
      }
    }
    // Ground returns sit below every box so they never enter a crop.
    for (int i = 0; i < config.background_points; ++i) {
      scene.points.push_back(Point{static_cast<float>(uniform(rng, -config.half_extent, config.half_extent)),
                                   static_cast<float>(uniform(rng, -config.half_extent, config.half_extent)),
                                   static_cast<float>(-0.25 + uniform(rng, -0.03, 0.03)),
                                   static_cast<float>(uniform(rng, 0.0, 0.3))});
    }
  });
  world.dropped_objects = std::accumulate(dropped.begin(), dropped.end(), 0);
  return world;
}

// ---- surrogate detector -----------------------------------------------------------------

const char* to_string(CalibrationMode mode) {
  switch (mode) {
    case CalibrationMode::Calibrated: return "calibrated";
    case CalibrationMode::Overconfident: return "overconfident";
    case CalibrationMode::Underconfident: return "underconfident";
  }
  return "calibrated";
}

CalibrationMode calibration_mode_from_string(const std::string& s) {
  for (auto m : {CalibrationMode::Calibrated, CalibrationMode::Overconfident, CalibrationMode::Underconfident})
    if (s == to_string(m)) return m;
  throw ConfigError("unknown calibration mode '" + s + "'");
}

DetectorSkill DetectorSkill::perfect(int C) {
  DetectorSkill s;
  s.recall_max.assign(C, 1.0);
  s.recall_half.assign(C, 0.0);
  s.quality_max.assign(C, 1.0);
  s.quality_half.assign(C, 0.0);
  s.quality_noise = 0;
  s.sigma_xy = s.sigma_yaw = s.sigma_extent = 0;
  s.confusion.assign(C, std::vector<double>(C, 0.0));
  for (int c = 0; c < C; ++c) s.confusion[c][c] = 1.0;
  s.fp_rate = 0;
  return s;
}

DetectorSkill DetectorSkill::typical(int C) {
  DetectorSkill s;
  for (int c = 0; c < C; ++c) {
    const double hard = C > 1 ? static_cast<double>(c) / (C - 1) : 0.0;  // 0 easy .. 1 hard
    s.recall_max.push_back(0.95 - 0.15 * hard);
    s.recall_half.push_back(5.0 + 7.0 * hard);
    s.quality_max.push_back(0.95 - 0.35 * hard);
    s.quality_half.push_back(10.0 + 15.0 * hard);
  }
  s.confusion.assign(C, std::vector<double>(C, 0.0));
  for (int c = 0; c < C; ++c) {
    const double keep = C > 1 ? (c == 0 ? 0.95 : 0.85) : 1.0;
    for (int k = 0; k < C; ++k) s.confusion[c][k] = k == c ? keep : (1.0 - keep) / (C - 1);
  }
  return s;
}

void DetectorSkill::validate(int C) const {
  auto check = [&](const std::vector<double>& v, const char* name, double lo, double hi) {
    if (static_cast<int>(v.size()) != C) throw ConfigError(std::string(name) + " needs one value per class");
    for (double x : v)
      if (!(x >= lo && x <= hi)) throw ConfigError(std::string(name) + " value out of range");
  };
  check(recall_max, "recall_max", 0, 1);
  check(quality_max, "quality_max", 0, 1);
  check(recall_half, "recall_half", 0, 1e9);
  check(quality_half, "quality_half", 0, 1e9);
  if (static_cast<int>(confusion.size()) != C) throw ConfigError("confusion matrix needs one row per class");
  for (const auto& row : confusion) {
    if (static_cast<int>(row.size()) != C) throw ConfigError("confusion row has wrong length");
    double sum = 0;
    for (double x : row) {
      if (!(x >= 0)) throw ConfigError("negative confusion entry");
      sum += x;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("confusion rows must sum to 1");
  }
  if (!fp_class_mix.empty()) {
    if (static_cast<int>(fp_class_mix.size()) != C) throw ConfigError("fp_class_mix needs one value per class");
    double sum = 0;
    for (double x : fp_class_mix) {
      if (!(x >= 0)) throw ConfigError("negative fp_class_mix entry");
      sum += x;
    }
    if (!(sum > 0)) throw ConfigError("fp_class_mix must not be all zero");
  }
  if (quality_noise < 0 || sigma_xy < 0 || sigma_yaw < 0 || sigma_extent < 0 || fp_rate < 0 || feature_dim < 0 ||
      feature_noise < 0 || !(fp_quality_max >= 0 && fp_quality_max <= 1))
    throw ConfigError("detector skill has a negative spread or rate");
}

DetectorSkill long_tail_skill(const WorldConfig& world, CalibrationMode mode, std::uint64_t seed) {
  DetectorSkill s = DetectorSkill::typical(static_cast<int>(world.class_names.size()));
  s.fp_class_mix = world.class_mix;
  s.calibration = mode;
  s.seed = seed;
  return s;
}

namespace {

double emitted_score(double q, CalibrationMode mode) {
  switch (mode) {
    case CalibrationMode::Calibrated: return q;
    case CalibrationMode::Overconfident: return std::pow(q, 0.3);
    case CalibrationMode::Underconfident: return std::pow(q, 3.0);
  }
  return q;
}

std::vector<double> class_probs(int predicted, double score, int C) {
  std::vector<double> p(C, (1.0 - score) / C);
  p[predicted] = 1.0 / C + (1.0 - 1.0 / C) * score;
  return p;
}

// Class prototypes are shared by every skill so embeddings of different
// models live in one space.
std::vector<Vector> class_prototypes(int C, int dim) {
  std::vector<Vector> protos;
  for (int c = 0; c < C; ++c) {
    Rng rng(mix_seed(0x50E7F00DULL, static_cast<std::uint64_t>(c)));
    Vector v(dim);
    double norm = 0;
    for (double& x : v) {
      x = gaussian(rng, 1.0);
      norm += x * x;
    }
    for (double& x : v) x /= std::sqrt(norm);
    protos.push_back(std::move(v));
  }
  return protos;
}

Vector embed(const Vector& proto, double noise, Rng& rng) {
  Vector v = proto;
  const double per_dim = noise / std::sqrt(static_cast<double>(v.size()));
  double norm = 0;
  for (double& x : v) {
    x += gaussian(rng, per_dim);
    norm += x * x;
  }
  norm = std::sqrt(norm);
  if (norm > 0)
    for (double& x : v) x /= norm;
  return v;
}

Box3D jitter(const Box3D& b, const DetectorSkill& s, Rng& rng) {
  Box3D o = b;
  o.cx += gaussian(rng, s.sigma_xy);
  o.cy += gaussian(rng, s.sigma_xy);
  o.cz += gaussian(rng, s.sigma_xy / 2);
  o.dx *= std::max(0.5, 1.0 + gaussian(rng, s.sigma_extent));
  o.dy *= std::max(0.5, 1.0 + gaussian(rng, s.sigma_extent));
  o.dz *= std::max(0.5, 1.0 + gaussian(rng, s.sigma_extent));
  o.yaw = normalize_yaw(o.yaw + gaussian(rng, s.sigma_yaw));
  return o;
}

}  // namespace

std::vector<Detection> surrogate_detect(const Scene& scene, const DetectorSkill& skill, int C,
                                        const std::vector<Box3D>& clutter) {
  if (!scene.gt) throw MissingDataError("surrogate detection needs ground truth for '" + scene.scene_id + "'");
  skill.validate(C);
  Rng rng(mix_seed(skill.seed, hash_string(scene.scene_id)));
  const auto protos = skill.feature_dim > 0 ? class_prototypes(C, skill.feature_dim) : std::vector<Vector>{};
  std::vector<Detection> out;

  auto emit = [&](int cls, const Box3D& box, double q) {
    Detection d;
    d.scene_id = scene.scene_id;
    d.score = std::clamp(emitted_score(q, skill.calibration), 0.0, 1.0);
    d.probs = class_probs(cls, d.score, C);
    d.class_id = argmax(d.probs);
    d.box = box;
    d.source = skill.source;
    if (!protos.empty()) d.feature = embed(protos[cls], skill.feature_noise, rng);
    out.push_back(std::move(d));
  };

  for (const auto& g : *scene.gt) {
    const int c = g.class_id;
    const double n = static_cast<double>(points_in_box(scene.points, g.box, 0.0).size());
    const double recall =
        skill.recall_half[c] > 0 ? skill.recall_max[c] * n / (n + skill.recall_half[c]) : skill.recall_max[c];
    if (!(uniform(rng, 0.0, 1.0) < recall)) continue;
    double q = skill.quality_half[c] > 0 ? skill.quality_max[c] * n / (n + skill.quality_half[c])
                                         : skill.quality_max[c];
    q = std::clamp(q + gaussian(rng, skill.quality_noise), 0.02, 1.0);
    const bool tp = uniform(rng, 0.0, 1.0) < q;

    Box3D box = g.box;
    int cls = c;
    if (tp) {
      bool good = false;
      for (int attempt = 0; attempt < 10 && !good; ++attempt) {
        Box3D cand = jitter(g.box, skill, rng);
        if (iou_3d(cand, g.box) >= 0.5) {
          box = cand;
          good = true;
        }
      }
    } else {
      // Drawing the diagonal means right class, wrong place.
      const auto& row = skill.confusion[c];
      cls = std::discrete_distribution<int>(row.begin(), row.end())(rng);
      if (cls != c) {
        box = jitter(g.box, skill, rng);
      } else {
        // Slide a full length along the heading, off the object.
        const double shift = 1.2 * std::max(g.box.dx, g.box.dy);
        box.cx += shift * std::cos(g.box.yaw);
        box.cy += shift * std::sin(g.box.yaw);
      }
    }
    emit(cls, box, q);
  }

  const int n_fp = skill.fp_rate > 0 ? std::poisson_distribution<int>(skill.fp_rate)(rng) : 0;
  for (int i = 0; i < n_fp; ++i) {
    const int cls = skill.fp_class_mix.empty()
                        ? std::uniform_int_distribution<int>(0, C - 1)(rng)
                        : std::discrete_distribution<int>(skill.fp_class_mix.begin(), skill.fp_class_mix.end())(rng);
    Box3D box;
    if (!clutter.empty()) {
      box = jitter(clutter[std::uniform_int_distribution<std::size_t>(0, clutter.size() - 1)(rng)], skill, rng);
    } else {
      const double r = uniform(rng, 5.0, 40.0), a = uniform(rng, -kPi, kPi);
      box = Box3D::make(r * std::cos(a), r * std::sin(a), 0.8, 1.0, 1.0, 1.6, uniform(rng, -kPi, kPi));
    }
    emit(cls, box, uniform(rng, 0.0, skill.fp_quality_max));
  }
  return out;
}

// ---- rounds -----------------------------------------------------------------------------

namespace {

struct RoundDetections {
  std::vector<std::vector<Detection>> normal, cpsp;
  double bonus = 0;
};

DetectorSkill scheduled(const DetectorSkill& base, const SkillSchedule& sched, int round) {
  DetectorSkill s = base;
  const double steps = round - 1;
  for (double& q : s.quality_max) q = std::min(1.0, q + sched.quality_step * steps);
  for (double& r : s.recall_max) r = std::min(1.0, r + sched.recall_step * steps);
  return s;
}

std::vector<int> gt_counts(const Scene& s, int C) {
  std::vector<int> n(C, 0);
  if (s.gt)
    for (const auto& g : *s.gt) ++n[g.class_id];
  return n;
}

TrackReport run_track(Strategy strategy, const World& world, const std::vector<RoundDetections>& dets,
                      const std::set<std::string>& initial_labeled, const RoundsConfig& cfg, int rare) {
  const int C = world.classes.size();
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < world.scenes.size(); ++i) index[world.scenes[i].scene_id] = i;

  std::set<std::string> unlabeled;
  for (const auto& s : world.scenes)
    if (!initial_labeled.count(s.scene_id)) unlabeled.insert(s.scene_id);
  Pool pool(initial_labeled, unlabeled);
  std::vector<double> labeled_counts(C, 0.0);
  for (const auto& id : initial_labeled) {
    const auto n = gt_counts(world.scenes[index[id]], C);
    for (int c = 0; c < C; ++c) labeled_counts[c] += n[c];
  }

  TrackReport track;
  track.strategy = strategy;
  track.total_gt_boxes.assign(C, 0);
  BoxBank bank;
  double entropy_sum = 0;
  int entropy_n = 0;

  for (int r = 1; r <= cfg.n_rounds; ++r) {
    const RoundDetections& rd = dets[r - 1];
    RoundStats st;
    st.round = r;
    st.selected_gt_boxes.assign(C, 0);
    st.cpsp_quality_bonus = rd.bonus;

    const std::vector<std::string> ids(pool.unlabeled().begin(), pool.unlabeled().end());
    std::vector<Candidate> cands(ids.size());
    parallel_for(ids.size(), cfg.threads, [&](std::size_t i) {
      const std::size_t si = index.at(ids[i]);
      cands[i] = make_candidate(ids[i], rd.normal[si], rd.cpsp[si], world.scenes[si].points, cfg.candidates);
    });

    int rare_pool = 0;
    for (const auto& id : ids) rare_pool += gt_counts(world.scenes[index[id]], C)[rare];

    std::vector<std::size_t> chosen;  // indices into cands
    if (strategy == Strategy::Cal) {
      const auto caps = class_caps(labeled_counts, cfg.selection.budget_boxes, cfg.selection.min_cap);
      SelectionConfig sel = cfg.selection;
      sel.seed = mix_seed(cfg.selection.seed, static_cast<std::uint64_t>(r));
      const auto res = select(cands, C, caps, sel, cfg.threads);
      std::map<std::string, std::size_t> pos;
      for (std::size_t i = 0; i < cands.size(); ++i) pos[cands[i].scene_id] = i;
      for (const auto& id : res.chosen) chosen.push_back(pos.at(id));
      st.counted_boxes = res.num_boxes;
      st.partial = res.exhausted;
    } else {
      std::vector<std::size_t> order(cands.size());
      std::iota(order.begin(), order.end(), 0);
      Rng rng(mix_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(r)));
      std::shuffle(order.begin(), order.end(), rng);
      std::size_t k = 0;
      while (st.counted_boxes < cfg.selection.budget_boxes && k < order.size()) {
        chosen.push_back(order[k]);
        st.counted_boxes += static_cast<int>(cands[order[k]].intersection.size());
        ++k;
      }
      st.partial = st.counted_boxes < cfg.selection.budget_boxes;
    }

    double round_entropy = 0;
    for (std::size_t i : chosen) {
      const auto& id = cands[i].scene_id;
      pool.annotate(id);
      st.selected.push_back(id);
      const auto n = gt_counts(world.scenes[index[id]], C);
      for (int c = 0; c < C; ++c) {
        st.selected_gt_boxes[c] += n[c];
        track.total_gt_boxes[c] += n[c];
        labeled_counts[c] += n[c];
      }
      const double h = scene_uncertainty(cands[i].ensemble, C);
      round_entropy += h;
      entropy_sum += h;
      ++entropy_n;
    }
    st.mean_selected_entropy = chosen.empty() ? 0.0 : round_entropy / static_cast<double>(chosen.size());
    st.rare_recall = rare_pool > 0 ? static_cast<double>(st.selected_gt_boxes[rare]) / rare_pool : 0.0;

    // Bank update over the scenes that stay unlabeled.
    const std::vector<std::string> rest(pool.unlabeled().begin(), pool.unlabeled().end());
    std::vector<std::vector<BankEntry>> found(rest.size());
    parallel_for(rest.size(), cfg.threads, [&](std::size_t i) {
      const std::size_t si = index.at(rest[i]);
      const Scene& scene = world.scenes[si];
      found[i] = extract_confident(scene, rd.cpsp[si], cfg.bank_k, mix_seed(cfg.seed, si * 31 + r));
      auto fps = mine_false_positives(scene, rd.cpsp[si], cfg.fp_conf_floor);
      found[i].insert(found[i].end(), std::make_move_iterator(fps.begin()), std::make_move_iterator(fps.end()));
    });
    std::vector<BankEntry> fresh;
    for (auto& f : found) fresh.insert(fresh.end(), std::make_move_iterator(f.begin()), std::make_move_iterator(f.end()));
    RefineOptions ropt = cfg.refine;
    ropt.revisited_scenes = std::set<std::string>(rest.begin(), rest.end());
    bank = refine(bank, std::move(fresh), ropt);
    st.bank_entries = static_cast<int>(bank.entries.size());
    for (const auto& e : bank.entries) st.bank_fp_entries += e.is_fp;

    const std::size_t n_pseudo = std::min<std::size_t>(rest.size(), std::max(cfg.pseudo_scenes, 0));
    std::vector<PseudoScene> pseudo(n_pseudo);
    parallel_for(n_pseudo, cfg.threads, [&](std::size_t j) {
      const std::size_t si = index.at(rest[j]);
      std::vector<Box3D> keep_fp;
      for (const auto& e : bank.entries)
        if (e.is_fp && e.scene_id == rest[j]) keep_fp.push_back(e.loc);
      std::vector<Detection> all = rd.normal[si];
      all.insert(all.end(), rd.cpsp[si].begin(), rd.cpsp[si].end());
      const auto bg = mine_background(world.scenes[si].points, all, cfg.removal_floor, kDefaultPointMargin, keep_fp);
      pseudo[j] = compose(bg, bank, cfg.pseudo_max_objects, mix_seed(cfg.seed, j + 7919 * r),
                          rest[j] + "_pseudo_r" + std::to_string(r), C);
    });
    st.pseudo_scenes = static_cast<int>(pseudo.size());
    for (const auto& p : pseudo) st.pseudo_labels += static_cast<int>(p.pseudo_labels.size());

    track.rounds.push_back(std::move(st));
  }
  track.mean_selected_entropy = entropy_n ? entropy_sum / entropy_n : 0.0;
  return track;
}

}  // namespace

Fixture make_fixture(const FixtureConfig& config, int threads) {
  Fixture fx;
  fx.world = gen_world(config.world, threads);
  const int C = fx.world.classes.size();
  const std::size_t n = fx.world.scenes.size();
  if (config.labeled_scenes < 0 || static_cast<std::size_t>(config.labeled_scenes) > n)
    throw ConfigError("labeled_scenes must lie in [0, n_scenes]");
  WorldConfig wc = config.world;
  wc.validate();
  DetectorSkill normal = long_tail_skill(wc, config.normal_mode, mix_seed(config.seed, 1));
  normal.source = Source::NormalModel;
  DetectorSkill cpsp = long_tail_skill(wc, config.cpsp_mode, mix_seed(config.seed, 2));
  cpsp.source = Source::CpspModel;
  fx.normal.resize(n);
  fx.cpsp.resize(n);
  parallel_for(n, threads, [&](std::size_t i) {
    fx.normal[i] = surrogate_detect(fx.world.scenes[i], normal, C, fx.world.clutter[i]);
    fx.cpsp[i] = surrogate_detect(fx.world.scenes[i], cpsp, C, fx.world.clutter[i]);
  });
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(config.seed, 3));
  std::shuffle(order.begin(), order.end(), rng);
  std::set<std::string> labeled, unlabeled;
  for (std::size_t k = 0; k < n; ++k)
    (static_cast<int>(k) < config.labeled_scenes ? labeled : unlabeled).insert(fx.world.scenes[order[k]].scene_id);
  fx.pool = Pool(std::move(labeled), std::move(unlabeled));
  return fx;
}

void write_fixture(const Fixture& fx, const std::filesystem::path& dir) {
  PoolManifest manifest;
  manifest.pool = fx.pool;
  manifest.classes = fx.world.classes;
  write_pool_manifest(dir / "pool.json", manifest);
  std::vector<Detection> gt, labels, normal, cpsp;
  for (std::size_t i = 0; i < fx.world.scenes.size(); ++i) {
    const Scene& s = fx.world.scenes[i];
    save_point_cloud(dir / "scenes" / (s.scene_id + ".bin"), s.points);
    gt.insert(gt.end(), s.gt->begin(), s.gt->end());
    if (fx.pool.labeled().count(s.scene_id)) labels.insert(labels.end(), s.gt->begin(), s.gt->end());
    normal.insert(normal.end(), fx.normal[i].begin(), fx.normal[i].end());
    cpsp.insert(cpsp.end(), fx.cpsp[i].begin(), fx.cpsp[i].end());
  }
  write_detections(dir / "gt.jsonl", gt);
  write_detections(dir / "labels.jsonl", labels);
  write_detections(dir / "normal.jsonl", normal);
  write_detections(dir / "cpsp.jsonl", cpsp);
}

RoundsReport run_rounds(const World& world, const DetectorSkill& normal, const DetectorSkill& cpsp,
                        const RoundsConfig& cfg) {
  const int C = world.classes.size();
  if (C < 2) throw ConfigError("simulation needs at least two classes");
  if (cfg.n_rounds < 0) throw ConfigError("n_rounds must be >= 0");
  cfg.selection.validate();
  normal.validate(C);
  cpsp.validate(C);

  RoundsReport report;
  std::vector<int> totals(C, 0);
  for (const auto& s : world.scenes) {
    const auto n = gt_counts(s, C);
    for (int c = 0; c < C; ++c) totals[c] += n[c];
  }
  report.rare_class = static_cast<int>(std::min_element(totals.begin(), totals.end()) - totals.begin());

  std::vector<std::size_t> order(world.scenes.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(cfg.seed, 1));
  std::shuffle(order.begin(), order.end(), rng);
  std::set<std::string> labeled;
  report.initial_labeled_boxes.assign(C, 0);
  int labeled_boxes = 0;
  for (std::size_t k = 0; k < order.size() && labeled_boxes < cfg.initial_boxes; ++k) {
    const Scene& s = world.scenes[order[k]];
    labeled.insert(s.scene_id);
    const auto n = gt_counts(s, C);
    for (int c = 0; c < C; ++c) {
      report.initial_labeled_boxes[c] += n[c];
      labeled_boxes += n[c];
    }
  }
  report.initial_labeled_scenes = static_cast<int>(labeled.size());
  report.initial_unlabeled_scenes = static_cast<int>(world.scenes.size() - labeled.size());

  // Detections are shared by both tracks so the comparison is paired.
  std::vector<RoundDetections> dets(cfg.n_rounds);
  for (int r = 1; r <= cfg.n_rounds; ++r) {
    auto& rd = dets[r - 1];
    DetectorSkill n_skill = normal;
    n_skill.seed = mix_seed(normal.seed, static_cast<std::uint64_t>(r));
    n_skill.source = Source::NormalModel;
    DetectorSkill c_skill = scheduled(cpsp, cfg.schedule, r);
    c_skill.seed = mix_seed(cpsp.seed, static_cast<std::uint64_t>(r));
    c_skill.source = Source::CpspModel;
    rd.bonus = cfg.schedule.quality_step * (r - 1);
    rd.normal.resize(world.scenes.size());
    rd.cpsp.resize(world.scenes.size());
    parallel_for(world.scenes.size(), cfg.threads, [&](std::size_t si) {
      rd.normal[si] = surrogate_detect(world.scenes[si], n_skill, C, world.clutter[si]);
      rd.cpsp[si] = surrogate_detect(world.scenes[si], c_skill, C, world.clutter[si]);
    });
  }

  report.cal = run_track(Strategy::Cal, world, dets, labeled, cfg, report.rare_class);
  if (cfg.random_baseline) report.random = run_track(Strategy::Random, world, dets, labeled, cfg, report.rare_class);
  return report;
}

// ---- reports ----------------------------------------------------------------------------

namespace {

json track_json(const TrackReport& t, const ClassSet& classes) {
  auto per_class = [&](const std::vector<int>& v) {
    json j = json::object();
    for (std::size_t c = 0; c < v.size(); ++c) j[classes.names[c]] = v[c];
    return j;
  };
  json rounds = json::array();
  for (const auto& r : t.rounds)
    rounds.push_back(json{{"round", r.round},
                          {"selected", r.selected},
                          {"selected_gt_boxes", per_class(r.selected_gt_boxes)},
                          {"counted_boxes", r.counted_boxes},
                          {"mean_selected_entropy", r.mean_selected_entropy},
                          {"rare_recall", r.rare_recall},
                          {"partial", r.partial},
                          {"bank_entries", r.bank_entries},
                          {"bank_fp_entries", r.bank_fp_entries},
                          {"pseudo_scenes", r.pseudo_scenes},
                          {"pseudo_labels", r.pseudo_labels},
                          {"cpsp_quality_bonus", r.cpsp_quality_bonus}});
  return json{{"strategy", t.strategy == Strategy::Cal ? "cal" : "random"},
              {"rounds", rounds},
              {"total_gt_boxes", per_class(t.total_gt_boxes)},
              {"mean_selected_entropy", t.mean_selected_entropy}};
}

}  // namespace

json rounds_report_json(const RoundsReport& report, const ClassSet& classes) {
  json initial{{"labeled_scenes", report.initial_labeled_scenes},
               {"unlabeled_scenes", report.initial_unlabeled_scenes},
               {"labeled_boxes", json::object()}};
  for (std::size_t c = 0; c < report.initial_labeled_boxes.size(); ++c)
    initial["labeled_boxes"][classes.names[c]] = report.initial_labeled_boxes[c];
  json j{{"rare_class", classes.names[report.rare_class]}, {"initial", initial}, {"cal", track_json(report.cal, classes)}};
  if (report.random) j["random"] = track_json(*report.random, classes);
  return j;
}

std::string rounds_report_csv(const RoundsReport& report, const ClassSet& classes) {
  std::string out = "strategy,round";
  for (const auto& n : classes.names) out += "," + n;
  out += ",counted_boxes,mean_entropy,rare_recall,partial\n";
  auto rows = [&](const TrackReport& t) {
    for (const auto& r : t.rounds) {
      out += t.strategy == Strategy::Cal ? "cal" : "random";
      out += "," + std::to_string(r.round);
      for (int v : r.selected_gt_boxes) out += "," + std::to_string(v);
      char tail[128];
      std::snprintf(tail, sizeof tail, ",%d,%.10g,%.10g,%d\n", r.counted_boxes, r.mean_selected_entropy,
                    r.rare_recall, r.partial ? 1 : 0);
      out += tail;
    }
  };
  rows(report.cal);
  if (report.random) rows(*report.random);
  return out;
}

}  // namespace ssal
