#include <doctest.h>

#include <cmath>
#include <random>

#include "ssal/geometry.hpp"
#include "support.hpp"

using namespace ssal;
using testing::cube;

namespace {

// Independent membership test: rotate into the box frame by hand.
bool inside(const Box3D& b, double x, double y, double z) {
  const double c = std::cos(b.yaw), s = std::sin(b.yaw);
  const double lx = c * (x - b.cx) + s * (y - b.cy);
  const double ly = -s * (x - b.cx) + c * (y - b.cy);
  return std::abs(lx) <= b.dx / 2 && std::abs(ly) <= b.dy / 2 && std::abs(z - b.cz) <= b.dz / 2;
}

double monte_carlo_iou(const Box3D& a, const Box3D& b, int samples, std::uint64_t seed) {
  double lo[3] = {1e300, 1e300, 1e300}, hi[3] = {-1e300, -1e300, -1e300};
  for (const Box3D* box : {&a, &b}) {
    const double r = std::hypot(box->dx, box->dy) / 2;
    lo[0] = std::min(lo[0], box->cx - r), hi[0] = std::max(hi[0], box->cx + r);
    lo[1] = std::min(lo[1], box->cy - r), hi[1] = std::max(hi[1], box->cy + r);
    lo[2] = std::min(lo[2], box->z_min()), hi[2] = std::max(hi[2], box->z_max());
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  long in_a = 0, in_b = 0, both = 0;
  for (int i = 0; i < samples; ++i) {
    const double x = lo[0] + u(rng) * (hi[0] - lo[0]), y = lo[1] + u(rng) * (hi[1] - lo[1]),
                 z = lo[2] + u(rng) * (hi[2] - lo[2]);
    const bool ia = inside(a, x, y, z), ib = inside(b, x, y, z);
    in_a += ia;
    in_b += ib;
    both += ia && ib;
  }
  const long uni = in_a + in_b - both;
  return uni ? static_cast<double>(both) / static_cast<double>(uni) : 0.0;
}

}  // namespace

TEST_CASE("identity and disjoint") {
  const Box3D a = Box3D::make(1, 2, 0.5, 3, 1.5, 1, 0.4);
  CHECK(iou_bev(a, a) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(iou_3d(a, a) == doctest::Approx(1.0).epsilon(1e-12));
  const Box3D far = Box3D::make(1 + 3.01, 2, 0.5, 1, 1.5, 1, 0);
  CHECK(iou_bev(Box3D::make(1, 2, 0.5, 3, 1.5, 1, 0), far) == 0.0);
}

TEST_CASE("octagon: unit squares at yaw 0 and pi/4") {
  const Box3D a = cube(0), b = cube(0, 0, 0, 1.0, kPi / 4);
  const double inter = 2 * (std::sqrt(2.0) - 1);
  CHECK(bev_intersection_area(a, b) == doctest::Approx(inter).epsilon(1e-12));
  CHECK(iou_bev(a, b) == doctest::Approx(inter / (2 - inter)).epsilon(1e-12));
  CHECK(iou_bev(a, b) == doctest::Approx(0.7071).epsilon(1e-4));
  // Monte-Carlo cross-check of the same configuration.
  CHECK(std::abs(monte_carlo_iou(a, b, 1000000, 1) - iou_3d(a, b)) < 0.003);
}

TEST_CASE("unit cubes offset by half a side") {
  CHECK(iou_3d(cube(0), cube(0.5)) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("axis-aligned analytic cases") {
  // [0,2]x[0,1]x[0,1] against [1,3]x[0,2]x[0.5,1.5]: overlap 0.5, union 5.5.
  const Box3D a = Box3D::make(1, 0.5, 0.5, 2, 1, 1, 0);
  const Box3D b = Box3D::make(2, 1, 1, 2, 2, 1, 0);
  CHECK(std::abs(iou_3d(a, b) - 1.0 / 11.0) <= 1e-9);
  // Nested boxes: ratio of volumes.
  CHECK(std::abs(iou_3d(Box3D::make(0, 0, 0, 4, 2, 2, 0), Box3D::make(0.5, 0, 0, 1, 1, 1, 0)) - 1.0 / 16) <= 1e-9);
  // Quarter-turn of a square is the same footprint.
  CHECK(std::abs(iou_3d(cube(0, 0, 0, 2.0), cube(0, 0, 0, 2.0, kPi / 2)) - 1.0) <= 1e-9);
}

TEST_CASE("disjoint height ranges") {
  CHECK(iou_3d(cube(0, 0, 0), cube(0, 0, 1.5)) == 0.0);
  CHECK(iou_bev(cube(0, 0, 0), cube(0, 0, 1.5)) == doctest::Approx(1.0));
}

TEST_CASE("symmetry and yaw periodicity") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 300; ++i) {
    const Box3D a = testing::random_box(rng), b = testing::random_box(rng);
    CHECK(iou_3d(a, b) == iou_3d(b, a));
    Box3D flipped = a;
    flipped.yaw = normalize_yaw(a.yaw + kPi);
    CHECK(iou_3d(flipped, b) == doctest::Approx(iou_3d(a, b)).epsilon(1e-9));
    Box3D swapped = a;
    std::swap(swapped.dx, swapped.dy);
    swapped.yaw = normalize_yaw(a.yaw + kPi / 2);
    CHECK(iou_3d(swapped, b) == doctest::Approx(iou_3d(a, b)).epsilon(1e-9));
  }
}

TEST_CASE("Monte-Carlo oracle on random pairs") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 40; ++i) {
    const Box3D a = testing::random_box(rng, 1.0), b = testing::random_box(rng, 1.0);
    CHECK(std::abs(iou_3d(a, b) - monte_carlo_iou(a, b, 100000, 100 + i)) <= 0.01);
  }
}

TEST_CASE("point membership") {
  const Box3D b = Box3D::make(2, 3, 0, 2, 1, 1, 0);
  CHECK(point_in_box({2, 3, 0, 0}, b));
  CHECK_FALSE(point_in_box({4, 3, 0, 0}, b));  // dx away along the box axis
  CHECK(point_in_box({3.05f, 3, 0, 0}, b, 0.1));
  // Rotated a quarter turn, the long axis runs along world y.
  const Box3D r = Box3D::make(0, 0, 0, 1, 0.2, 1, kPi / 2);
  CHECK(point_in_box({0, 0.4f, 0, 0}, r));
  CHECK_FALSE(point_in_box({0.4f, 0, 0, 0}, r));
}

TEST_CASE("nms examples") {
  const auto d = [](const Box3D& b, double s) { return testing::det("s", {1, 0}, b, s); };
  auto kept = nms({d(cube(0), 0.8), d(cube(0), 0.9)}, 0.5);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].score == 0.9);
  CHECK(nms({d(cube(0), 0.9), d(cube(5), 0.8), d(cube(10), 0.7)}, 0.5).size() == 3);
  // Chain: A-B and B-C overlap at 0.6, A-C at 1/3. B falls to A, so C survives.
  const Box3D A = cube(0), B = cube(0.25), C = cube(0.5);
  REQUIRE(iou_3d(A, B) == doctest::Approx(0.6));
  REQUIRE(iou_3d(B, C) == doctest::Approx(0.6));
  REQUIRE(iou_3d(A, C) < 0.5);
  kept = nms({d(B, 0.8), d(C, 0.7), d(A, 0.9)}, 0.5);
  REQUIRE(kept.size() == 2);
  CHECK(kept[0].box == A);
  CHECK(kept[1].box == C);
}

TEST_CASE("nms output is pairwise below the threshold") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<Detection> dets;
    for (int i = 0; i < 25; ++i) dets.push_back(testing::det("s", {1, 0}, testing::random_box(rng, 2.0), u(rng)));
    const auto kept = nms(dets, 0.4);
    for (std::size_t i = 0; i < kept.size(); ++i)
      for (std::size_t j = i + 1; j < kept.size(); ++j) CHECK(iou_3d(kept[i].box, kept[j].box) < 0.4);
  }
}

TEST_CASE("point removal") {
  PointCloud grid;
  for (int i = 0; i < 10; ++i) grid.push_back({static_cast<float>(i), 0, 0, 0});
  CHECK(remove_points_in_boxes(grid, {}, 0.0) == grid);
  const std::vector<Box3D> four{Box3D::make(1.5, 0, 0, 4, 1, 1, 0)};
  CHECK(remove_points_in_boxes(grid, four, 0.0).size() == 6);
  const std::vector<Box3D> all{Box3D::make(4.5, 0, 0, 20, 1, 1, 0)};
  CHECK(remove_points_in_boxes(grid, all, 0.0).empty());
}

TEST_CASE("removed and selected points partition the cloud") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<float> u(-3, 3);
  PointCloud pts;
  for (int i = 0; i < 2000; ++i) pts.push_back({u(rng), u(rng), u(rng), static_cast<float>(i)});
  const std::vector<Box3D> boxes{testing::random_box(rng), testing::random_box(rng), testing::random_box(rng)};
  const PointCloud rest = remove_points_in_boxes(pts, boxes, 0.1);
  std::set<float> selected;
  for (const auto& b : boxes)
    for (std::size_t i : points_in_box(pts, b, 0.1)) selected.insert(pts[i].intensity);
  std::set<float> remaining;
  for (const auto& p : rest) remaining.insert(p.intensity);
  CHECK(selected.size() + remaining.size() == pts.size());
  for (float id : remaining) CHECK(selected.count(id) == 0);
}
