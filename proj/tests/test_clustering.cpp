#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "ssal/clustering.hpp"
#include "ssal/errors.hpp"

using namespace ssal;

namespace {

// Best 2-way split of 1-D values by brute force over every labeling.
std::set<std::size_t> exhaustive_low_group(const std::vector<double>& x) {
  const std::size_t n = x.size();
  double best = 1e300;
  std::set<std::size_t> best_low;
  for (unsigned mask = 1; mask + 1 < (1u << n); ++mask) {
    double sum[2] = {0, 0}, cnt[2] = {0, 0};
    for (std::size_t i = 0; i < n; ++i) {
      const int g = (mask >> i) & 1;
      sum[g] += x[i];
      cnt[g] += 1;
    }
    double sse = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const int g = (mask >> i) & 1;
      sse += std::pow(x[i] - sum[g] / cnt[g], 2);
    }
    if (sse < best - 1e-12) {
      best = sse;
      const int low = sum[0] / cnt[0] < sum[1] / cnt[1] ? 0 : 1;
      best_low.clear();
      for (std::size_t i = 0; i < n; ++i)
        if (static_cast<int>((mask >> i) & 1) == low) best_low.insert(i);
    }
  }
  return best_low;
}

std::vector<Vector> column(const std::vector<double>& x) {
  std::vector<Vector> v;
  for (double a : x) v.push_back({a});
  return v;
}

}  // namespace

TEST_CASE("k = 1 gives the mean") {
  const std::vector<Vector> s{{1, 2}, {3, 4}, {5, 9}};
  const auto r = kmeans(s, 1, 0);
  REQUIRE(r.centers.size() == 1);
  CHECK(r.centers[0][0] == doctest::Approx(3.0));
  CHECK(r.centers[0][1] == doctest::Approx(5.0));
}

TEST_CASE("identical samples collapse to one center") {
  const std::vector<Vector> s(6, Vector{0.3, -1});
  const auto r = kmeans(s, 4, 7);
  CHECK(r.centers.size() == 1);
  CHECK(r.inertia == 0.0);
  CHECK(r.centers[0] == Vector{0.3, -1});
}

TEST_CASE("1-D split matches the exhaustive partition") {
  const std::vector<double> x{0, 0.1, 0.9, 1.0};
  const auto r = kmeans(column(x), 2, 1);
  CHECK(r.assignments[0] == r.assignments[1]);
  CHECK(r.assignments[2] == r.assignments[3]);
  CHECK(r.assignments[0] != r.assignments[2]);
  const auto low = confident_group(x, 2, 1);
  CHECK(std::set<std::size_t>(low.begin(), low.end()) == exhaustive_low_group(x));
}

TEST_CASE("confident group examples") {
  const std::vector<double> u{0.01, 0.02, 0.5, 0.9};
  const auto g = confident_group(u, 2, 3);
  CHECK(std::set<std::size_t>(g.begin(), g.end()) == exhaustive_low_group(u));
  CHECK(std::set<std::size_t>(g.begin(), g.end()) == std::set<std::size_t>{0, 1});
  CHECK(confident_group({0.4, 0.4, 0.4}, 2, 0).size() == 3);
  CHECK(confident_group({0.7}, 20, 0) == std::vector<std::size_t>{0});
}

TEST_CASE("confident group against brute force on separated data") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> lo(0.0, 0.1), hi(0.6, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x;
    const int n = 3 + trial % 7;
    for (int i = 0; i < n; ++i) x.push_back(i % 3 == 0 ? hi(rng) : lo(rng));
    const auto g = confident_group(x, 2, trial);
    CHECK(std::set<std::size_t>(g.begin(), g.end()) == exhaustive_low_group(x));
    // The kept group is never worse than the average.
    double mean_all = std::accumulate(x.begin(), x.end(), 0.0) / n, mean_g = 0;
    for (auto i : g) mean_g += x[i] / g.size();
    CHECK(mean_g < mean_all);
  }
}

TEST_CASE("determinism and monotone inertia") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0, 1);
  std::vector<Vector> s;
  for (int i = 0; i < 300; ++i) s.push_back({n(rng), n(rng), n(rng)});
  const auto a = kmeans(s, 6, 42), b = kmeans(s, 6, 42);
  CHECK(a.assignments == b.assignments);
  CHECK(a.centers == b.centers);
  for (std::size_t i = 1; i < a.inertia_trace.size(); ++i)
    CHECK(a.inertia_trace[i] <= a.inertia_trace[i - 1] + 1e-9);
}

TEST_CASE("bad input") {
  CHECK_THROWS_AS(kmeans({}, 2, 0), EmptyInputError);
  CHECK_THROWS_AS(kmeans({{1.0}}, 0, 0), ConfigError);
  CHECK_THROWS_AS(kmeans({{1.0}, {1.0, 2.0}}, 1, 0), ConfigError);
}

TEST_CASE("representative features") {
  const std::vector<Vector> f{{3, 4}, {0, 2}};
  const auto same = representative_features(f, 5, 0);
  REQUIRE(same.size() == 2);
  CHECK(same[0][0] == doctest::Approx(0.6));
  CHECK(same[0][1] == doctest::Approx(0.8));
  CHECK(same[1] == Vector{0, 1});

  std::vector<Vector> antipodal;
  for (int i = 0; i < 5; ++i) antipodal.push_back({1, 0}), antipodal.push_back({-1, 0});
  auto two = representative_features(antipodal, 2, 0);
  REQUIRE(two.size() == 2);
  std::sort(two.begin(), two.end());
  CHECK(two[0] == Vector{-1, 0});
  CHECK(two[1] == Vector{1, 0});
}

TEST_CASE("one center per blob") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n(0, 0.01);
  const std::vector<Vector> means{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  std::vector<Vector> s;
  for (int i = 0; i < 100; ++i) {
    Vector v = means[i % 3];
    for (double& x : v) x += n(rng);
    s.push_back(v);
  }
  const auto r = kmeans(s, 3, 5);
  // Purity: every blob maps to a single cluster.
  for (int b = 0; b < 3; ++b)
    for (std::size_t i = b; i < s.size(); i += 3) CHECK(r.assignments[i] == r.assignments[b]);
  const auto reps = representative_features(s, 3, 5);
  REQUIRE(reps.size() == 3);
  for (const auto& m : means) {
    double best = 1e9;
    for (const auto& c : reps) best = std::min(best, std::sqrt(squared_distance(c, m)));
    CHECK(best < 0.1);
  }
}
