#include <doctest.h>

#include <cmath>
#include <random>

#include "ssal/cal_selector.hpp"
#include "ssal/errors.hpp"
#include "support.hpp"

using namespace ssal;
using testing::cube;

namespace {

constexpr int kCar = 0, kCyc = 2;

// Three-class distribution with the given entropy, peaked on `cls`,
// remaining mass on the next class. Bisection on the peak probability.
std::vector<double> probs_with_entropy(int cls, double h) {
  double lo = 0.5, hi = 1.0;
  for (int i = 0; i < 200; ++i) {
    const double p = (lo + hi) / 2;
    const double e = -p * std::log(p) - (1 - p) * std::log(1 - p);
    (e > h ? lo : hi) = p;
  }
  std::vector<double> probs(3, 0.0);
  probs[cls] = lo;
  probs[(cls + 1) % 3] = 1 - lo;
  return probs;
}

Vector basis(int i, int dim) {
  Vector v(dim, 0.0);
  v[i] = 1.0;
  return v;
}

// Scene of n boxes of one class at a fixed box entropy; every box gets its
// own orthogonal feature starting at `feature_offset`.
Candidate scene(const std::string& id, int cls, int n, double h, int feature_offset, int dim = 64) {
  Candidate c;
  c.scene_id = id;
  for (int i = 0; i < n; ++i) {
    Detection d = testing::det(id, probs_with_entropy(cls, h), cube(i * 3.0));
    c.ensemble.push_back(d);
    c.intersection.push_back(d);
    c.features.push_back(basis(feature_offset + i, dim));
  }
  return c;
}

SelectionConfig config(int budget) {
  SelectionConfig cfg;
  cfg.budget_boxes = budget;
  return cfg;
}

std::vector<Candidate> random_pool(std::mt19937_64& rng, int n) {
  std::uniform_int_distribution<int> boxes(0, 6), cls(0, 2);
  std::normal_distribution<double> g(0, 1);
  std::vector<Candidate> pool;
  for (int s = 0; s < n; ++s) {
    Candidate c;
    c.scene_id = "scene_" + std::to_string(1000 + s);
    const int nb = boxes(rng);
    for (int b = 0; b < nb; ++b) {
      std::vector<double> p = testing::random_probs(rng, 3);
      Detection d = testing::det(c.scene_id, p, cube(b * 3.0));
      c.ensemble.push_back(d);
      if (b % 2 == 0) c.intersection.push_back(d);
      Vector f(8);
      for (double& x : f) x = g(rng);
      c.features.push_back(f);
    }
    pool.push_back(std::move(c));
  }
  return pool;
}

}  // namespace

TEST_CASE("class caps") {
  const auto eq = class_caps({5, 5, 5}, 9, 0);
  for (double u : eq) CHECK(u == 3.0);
  for (int C = 1; C <= 9; ++C)
    for (double u : class_caps(std::vector<double>(C, 37.0), 12.3, 0)) CHECK(u == 12.3 / C);
  const auto lt = class_caps({80, 15, 5}, 10, 0);
  // Direct evaluation: weights 1/80, 1/15, 1/5 normalized, times 10.
  const double z = 1.0 / 80 + 1.0 / 15 + 1.0 / 5;
  CHECK(lt[0] == doctest::Approx(10 * (1.0 / 80) / z));
  CHECK(lt[0] == doctest::Approx(0.448).epsilon(1e-3));
  CHECK(lt[1] == doctest::Approx(2.388).epsilon(1e-3));
  CHECK(lt[2] == doctest::Approx(7.164).epsilon(1e-3));
  const auto clamped = class_caps({80, 15, 5}, 10, 1);
  CHECK(clamped[0] == 1.0);
  CHECK(clamped[1] == doctest::Approx(lt[1]));
  CHECK(clamped[2] == doctest::Approx(lt[2]));
  CHECK(class_caps({0, 4}, 10, 0)[0] == doctest::Approx(10 * 1.0 / (1 + 0.25)));
  CHECK_THROWS_AS(class_caps({}, 10, 0), ConfigError);
}

TEST_CASE("similarity") {
  const Vector f{0.6, 0.8, 0};
  CHECK(scene_similarity({f}, {Vector{0, 0, 1}, f}) == doctest::Approx(1.0));
  CHECK(scene_similarity({basis(0, 3), basis(1, 3)}, {basis(2, 3)}) == 0.0);
  CHECK(scene_similarity({basis(0, 2), Vector{1, std::sqrt(3.0)}}, {basis(0, 2)}) == doctest::Approx(0.75));
  CHECK(scene_similarity({f}, {}) == -1.0);
  CHECK(scene_similarity({}, {f}) == -1.0);
  CHECK_THROWS_AS(scene_similarity({Vector{0, 0, 0}}, {f}), InvariantError);
}

TEST_CASE("feature bank compaction") {
  std::vector<Vector> bank{basis(0, 4)};
  update_feature_bank(bank, {basis(1, 4)}, 4, 0);
  CHECK(bank.size() == 2);
  CHECK(bank[1] == basis(1, 4));

  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0, 1);
  std::vector<Vector> big;
  for (int i = 0; i < 8; ++i) big.push_back({g(rng), g(rng), g(rng)});
  std::vector<Vector> b2;
  update_feature_bank(b2, big, 4, 0);
  CHECK(b2.size() == 4);
}

TEST_CASE("compaction of tight blobs preserves probe similarity") {
  std::mt19937_64 rng(19);
  std::normal_distribution<double> g(0, 0.01);
  std::vector<Vector> feats;
  for (int i = 0; i < 60; ++i) {
    Vector v = basis(i % 3, 5);
    for (double& x : v) x += g(rng);
    feats.push_back(v);
  }
  std::vector<Vector> compact;
  update_feature_bank(compact, feats, 3, 0);
  REQUIRE(compact.size() == 3);
  const std::vector<std::vector<Vector>> probes{{basis(0, 5)}, {Vector{1, 1, 0, 0, 0}}, {basis(4, 5)},
                                                {Vector{0.2, 0, 1, 0.5, 0}}};
  std::vector<double> full_sim, compact_sim;
  for (const auto& p : probes) {
    full_sim.push_back(scene_similarity(p, feats));
    compact_sim.push_back(scene_similarity(p, compact));
    CHECK(std::abs(full_sim.back() - compact_sim.back()) < 0.05);
  }
  for (std::size_t i = 0; i < probes.size(); ++i)
    for (std::size_t j = 0; j < probes.size(); ++j)
      if (full_sim[i] > full_sim[j] + 0.1) CHECK(compact_sim[i] > compact_sim[j]);
}

TEST_CASE("three-scene trace: A, then Bscene after the Car reweight") {
  const std::vector<Candidate> pool{scene("A", kCar, 10, 0.30, 0), scene("Bscene", kCyc, 2, 0.25, 10),
                                    scene("C", kCar, 10, 0.28, 12)};
  const std::vector<double> caps{10, 100, 100};
  const SelectionResult r = select(pool, 3, caps, config(12));
  CHECK(r.chosen == std::vector<std::string>{"A", "Bscene"});
  CHECK_FALSE(r.exhausted);
  CHECK(r.num_boxes == 12);
  int reweights = 0;
  for (std::size_t i = 0; i < r.events.size(); ++i) {
    const auto& e = r.events[i];
    if (e.kind != SelectionEvent::Kind::Reweight) continue;
    ++reweights;
    CHECK(e.class_id == kCar);
    CHECK(e.scene_id == "A");
    REQUIRE(i > 0);
    CHECK(r.events[i - 1].kind == SelectionEvent::Kind::Accept);
    CHECK(r.events[i - 1].box_counts[kCar] == 10);
  }
  CHECK(reweights == 1);
  CHECK(r.weights[kCar] == 0.1);

  // Without class balance the Car scene C outranks Bscene.
  SelectionConfig no_cbs = config(12);
  no_cbs.class_balance = false;
  CHECK(select(pool, 3, caps, no_cbs).chosen == std::vector<std::string>{"A", "C"});
}

TEST_CASE("budget edge cases") {
  const std::vector<Candidate> pool{scene("only", kCar, 3, 0.2, 0)};
  const std::vector<double> caps{100, 100, 100};
  const auto none = select(pool, 3, caps, config(0));
  CHECK(none.chosen.empty());
  CHECK_FALSE(none.exhausted);
  const auto one = select(pool, 3, caps, config(2));
  CHECK(one.chosen == std::vector<std::string>{"only"});
  CHECK_FALSE(one.exhausted);
  const auto ex = select(pool, 3, caps, config(10));
  CHECK(ex.chosen == std::vector<std::string>{"only"});
  CHECK(ex.exhausted);
  CHECK(ex.events.back().kind == SelectionEvent::Kind::Exhausted);
  CHECK(select({}, 3, caps, config(1)).exhausted);
}

TEST_CASE("near-duplicate scenes are skipped") {
  // Same features as A: similarity 1 >= 0.9, so D is skipped.
  Candidate a = scene("A", kCar, 2, 0.5, 0), d = scene("D", kCar, 2, 0.4, 0), e = scene("E", kCar, 2, 0.3, 5);
  const auto r = select({a, d, e}, 3, {100, 100, 100}, config(4));
  CHECK(r.chosen == std::vector<std::string>{"A", "E"});
  bool skipped = false;
  for (const auto& ev : r.events)
    if (ev.kind == SelectionEvent::Kind::Skip) skipped = ev.scene_id == "D" && ev.similarity == doctest::Approx(1.0);
  CHECK(skipped);
}

TEST_CASE("selection invariants on random pools") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 40; ++trial) {
    const auto pool = random_pool(rng, 40);
    SelectionConfig cfg = config(5 + trial);
    cfg.t_sim = 0.6;
    const auto caps = class_caps({40, 8, 2}, cfg.budget_boxes, 1);
    const auto r = select(pool, 3, caps, cfg, 1 + trial % 4);

    int max_scene = 0;
    for (const auto& c : pool) max_scene = std::max(max_scene, static_cast<int>(c.intersection.size()));
    if (!r.exhausted) {
      CHECK(r.num_boxes >= cfg.budget_boxes);
      CHECK(r.num_boxes <= cfg.budget_boxes + max_scene);
    }
    // Replay the log: acceptances under T_sim, reweights exactly when a count first reaches its cap.
    std::vector<bool> reduced(3, false);
    std::vector<int> prev(3, 0);
    for (std::size_t i = 0; i < r.events.size(); ++i) {
      const auto& e = r.events[i];
      if (e.kind == SelectionEvent::Kind::Accept) {
        CHECK(e.similarity < cfg.t_sim);
        for (int c = 0; c < 3; ++c) {
          const bool first_cross = prev[c] < caps[c] && e.box_counts[c] >= caps[c];
          bool logged = false;
          for (std::size_t j = i + 1; j < r.events.size() && r.events[j].kind == SelectionEvent::Kind::Reweight; ++j)
            logged = logged || r.events[j].class_id == c;
          CHECK(logged == first_cross);
          if (first_cross) reduced[c] = true;
        }
        prev = e.box_counts;
      }
    }
    for (int c = 0; c < 3; ++c) CHECK((r.weights[c] < 1.0) == reduced[c]);
    // Deterministic and independent of the thread count.
    const auto again = select(pool, 3, caps, cfg, 1);
    CHECK(again.chosen == r.chosen);
    CHECK(selection_report_json(again, ClassSet({"Car", "Pedestrian", "Cyclist"})) ==
          selection_report_json(r, ClassSet({"Car", "Pedestrian", "Cyclist"})));
  }
}

TEST_CASE("reweighting never promotes capped-class scenes") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> h(0.05, 0.6);
  for (int trial = 0; trial < 100; ++trial) {
    const Candidate capped = scene("x", kCar, 3, h(rng), 0), free = scene("y", kCyc, 2, h(rng), 3);
    ClassWeights w(3);
    const double before_x = scene_uncertainty(capped.ensemble, 3, w), before_y = scene_uncertainty(free.ensemble, 3, w);
    w.set(kCar, 0.1);
    const double after_x = scene_uncertainty(capped.ensemble, 3, w), after_y = scene_uncertainty(free.ensemble, 3, w);
    CHECK(after_x <= before_x);
    CHECK(after_y == before_y);
    if (before_y >= before_x) CHECK(after_y >= after_x);
  }
}

TEST_CASE("geometric descriptor") {
  PointCloud pts;
  for (int i = 0; i < 50; ++i) pts.push_back({10.0f + 0.01f * i, 5.0f, 0.5f, 0});
  const Box3D box = Box3D::make(10.2, 5, 0.5, 4, 2, 1.5, 0.3);
  const Vector f = geometric_descriptor(box, pts);
  REQUIRE(f.size() == static_cast<std::size_t>(kGeometricFeatureDim));
  double n = 0;
  for (double x : f) n += x * x;
  CHECK(std::sqrt(n) == doctest::Approx(1.0));
  CHECK(geometric_descriptor(box, pts) == f);

  Detection with_feature = testing::det("s", {1, 0}, box);
  with_feature.feature = {3, 4};
  const auto feats = box_features({with_feature, testing::det("s", {1, 0}, box)}, pts);
  CHECK(feats[0] == Vector{3, 4});
  CHECK(feats[1] == f);
}

TEST_CASE("candidates need detections") {
  std::map<std::string, std::vector<Detection>> normal{{"a", {testing::det("a", {1, 0}, cube(0), 0.9)}}}, cpsp;
  const auto c = make_candidates({"a"}, normal, cpsp, {});
  REQUIRE(c.size() == 1);
  CHECK(c[0].ensemble.size() == 1);
  CHECK(c[0].intersection.empty());
  CHECK(c[0].features.size() == 1);
  CHECK_THROWS_AS(make_candidates({"a", "b"}, normal, cpsp, {}), MissingDataError);
}

TEST_CASE("config validation") {
  SelectionConfig cfg;
  cfg.t_sim = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = SelectionConfig{};
  cfg.reduced_weight = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = SelectionConfig{};
  cfg.budget_boxes = -1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
