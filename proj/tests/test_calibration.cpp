#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "ssal/calibration.hpp"
#include "ssal/errors.hpp"
#include "support.hpp"

using namespace ssal;
using testing::cube;
using testing::det;

TEST_CASE("matching") {
  const std::vector<Detection> gt{det("s", {1, 0}, cube(0)), det("s", {0, 1}, cube(5))};
  CHECK(match_predictions(gt, gt) == std::vector<bool>{true, true});
  CHECK(match_predictions(gt, {}) == std::vector<bool>{false, false});

  // Two detections on one object at IoU 0.8 and 0.7: the higher score wins.
  const double d08 = (1 - 0.8) / 1.8, d07 = (1 - 0.7) / 1.7;
  const std::vector<Detection> dets{det("s", {1, 0}, cube(d07), 0.6), det("s", {1, 0}, cube(d08), 0.9)};
  CHECK(match_predictions(dets, {gt[0]}) == std::vector<bool>{false, true});
  // Wrong class never matches.
  CHECK(match_predictions({det("s", {0, 1}, cube(0))}, {gt[0]}) == std::vector<bool>{false});
}

TEST_CASE("reliability examples") {
  std::vector<Detection> dets;
  std::vector<bool> m;
  for (int i = 0; i < 10; ++i) {
    dets.push_back(det("s", {1, 0}, cube(i * 3.0), 0.6));
    m.push_back(i < 6);
  }
  CHECK(reliability(dets, m).d_ece == doctest::Approx(0.0).epsilon(1e-12));

  for (auto& d : dets) d.score = 1.0;
  std::fill(m.begin(), m.end(), false);
  std::fill(m.begin(), m.begin() + 5, true);
  const auto half = reliability(dets, m);
  CHECK(half.d_ece == doctest::Approx(0.5));
  CHECK(half.bins.back().count == 10);

  const auto empty = reliability({}, {});
  CHECK(empty.d_ece == 0.0);
  CHECK(empty.total == 0);
  for (const auto& b : empty.bins) CHECK(b.count == 0);
}

TEST_CASE("bin edges") {
  std::vector<Detection> dets{det("s", {1, 0}, cube(0), 0.0), det("s", {1, 0}, cube(3), 0.3),
                              det("s", {1, 0}, cube(6), 0.31), det("s", {1, 0}, cube(9), 1.0)};
  const auto r = reliability(dets, {false, false, true, true});
  REQUIRE(r.bins.size() == 4);
  CHECK(r.bins[0].count == 2);  // 0 and the right-closed 0.3
  CHECK(r.bins[1].count == 1);
  CHECK(r.bins[3].count == 1);
  CHECK_THROWS_AS(reliability(dets, {false, false, true, true}, {0, 0.5, 0.4, 1}), ConfigError);
  CHECK_THROWS_AS(reliability(dets, {false, false, true, true}, {0.1, 1}), ConfigError);
  CHECK_THROWS_AS(reliability(dets, {true}), InvariantError);
}

TEST_CASE("d_ece range, permutation and refinement") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Detection> dets;
    std::vector<bool> m;
    for (int i = 0; i < 60; ++i) {
      dets.push_back(det("s", {1, 0}, cube(i * 3.0), u(rng)));
      m.push_back(u(rng) < 0.5);
    }
    const auto r = reliability(dets, m);
    CHECK(r.d_ece >= 0.0);
    CHECK(r.d_ece <= 1.0);

    std::vector<std::size_t> perm(dets.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<Detection> pd;
    std::vector<bool> pm;
    for (auto i : perm) pd.push_back(dets[i]), pm.push_back(m[i]);
    CHECK(reliability(pd, pm).d_ece == doctest::Approx(r.d_ece).epsilon(1e-12));

    const auto fine = reliability(dets, m, {0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1});
    std::size_t a = 0, b = 0;
    for (const auto& bin : r.bins) a += bin.count;
    for (const auto& bin : fine.bins) b += bin.count;
    CHECK(a == b);
  }
}

TEST_CASE("csv layout") {
  const auto csv = reliability_csv(reliability({det("s", {1, 0}, cube(0), 0.9)}, {true}));
  CHECK(csv.rfind("bin_lo,bin_hi,count,mean_conf,precision\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
}
