#include "ssal/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>

#include "ssal/errors.hpp"

namespace ssal {

double squared_distance(const Vector& a, const Vector& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

namespace {

// Returns inertia; fills per-sample assignment and squared distance.
double assign(const std::vector<Vector>& samples, const std::vector<Vector>& centers,
              std::vector<int>& assignment, std::vector<double>& dist) {
  double inertia = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    int best = 0;
    double best_d = squared_distance(samples[i], centers[0]);
    for (std::size_t c = 1; c < centers.size(); ++c) {
      const double d = squared_distance(samples[i], centers[c]);
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(c);
      }
    }
    assignment[i] = best;
    dist[i] = best_d;
    inertia += best_d;
  }
  return inertia;
}

std::vector<Vector> kmeanspp_init(const std::vector<Vector>& samples, int k, std::mt19937_64& rng) {
  const std::size_t n = samples.size();
  std::vector<Vector> centers;
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  centers.push_back(samples[pick(rng)]);
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(samples[i], centers[0]);
  while (static_cast<int>(centers.size()) < k) {
    double total = 0;
    for (double d : d2) total += d;
    if (total <= 0) break;  // every sample coincides with a center
    std::uniform_real_distribution<double> u(0.0, total);
    const double target = u(rng);
    double acc = 0;
    std::size_t chosen = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (d2[i] <= 0) continue;
      acc += d2[i];
      chosen = i;
      if (acc >= target) break;
    }
    centers.push_back(samples[chosen]);
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(samples[i], centers.back()));
  }
  return centers;
}

}  // namespace

KMeansResult kmeans(const std::vector<Vector>& samples, int k, std::uint64_t seed,
                    const KMeansOptions& options) {
  if (samples.empty()) throw EmptyInputError("kmeans on empty sample set");
  if (k < 1) throw ConfigError("kmeans requires k >= 1");
  const std::size_t dim = samples[0].size();
  for (const auto& s : samples)
    if (s.size() != dim) throw ConfigError("kmeans samples have inconsistent dimension");

  const std::size_t n = samples.size();
  std::mt19937_64 rng(seed);
  KMeansResult r;
  r.centers = kmeanspp_init(samples, std::min<int>(k, static_cast<int>(n)), rng);
  const std::size_t kk = r.centers.size();
  r.assignments.assign(n, 0);
  std::vector<double> dist(n);

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    r.inertia_trace.push_back(assign(samples, r.centers, r.assignments, dist));
    ++r.iterations;

    std::vector<Vector> next(kk, Vector(dim, 0.0));
    std::vector<std::size_t> counts(kk, 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto& c = next[r.assignments[i]];
      for (std::size_t d = 0; d < dim; ++d) c[d] += samples[i][d];
      ++counts[r.assignments[i]];
    }
    std::vector<bool> taken(n, false);
    for (std::size_t c = 0; c < kk; ++c) {
      if (counts[c] > 0) {
        for (double& v : next[c]) v /= static_cast<double>(counts[c]);
        continue;
      }
      std::size_t far = 0;
      double far_d = -1;
      for (std::size_t i = 0; i < n; ++i)
        if (!taken[i] && dist[i] > far_d) {
          far_d = dist[i];
          far = i;
        }
      taken[far] = true;
      next[c] = samples[far];
    }

    double movement = 0;
    for (std::size_t c = 0; c < kk; ++c)
      movement = std::max(movement, std::sqrt(squared_distance(next[c], r.centers[c])));
    r.centers = std::move(next);
    if (movement < options.tolerance) break;
  }
  r.inertia = assign(samples, r.centers, r.assignments, dist);
  r.inertia_trace.push_back(r.inertia);
  return r;
}

std::vector<std::size_t> confident_group(const std::vector<double>& uncertainties, int k,
                                         std::uint64_t seed) {
  std::vector<Vector> samples;
  samples.reserve(uncertainties.size());
  for (double u : uncertainties) samples.push_back({u});
  const auto r = kmeans(samples, k, seed);
  int lowest = 0;
  for (std::size_t c = 1; c < r.centers.size(); ++c)
    if (r.centers[c][0] < r.centers[lowest][0]) lowest = static_cast<int>(c);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < r.assignments.size(); ++i)
    if (r.assignments[i] == lowest) out.push_back(i);
  return out;
}

std::vector<Vector> representative_features(const std::vector<Vector>& features, int m,
                                            std::uint64_t seed) {
  if (features.empty()) throw EmptyInputError("representative_features on empty input");
  if (m < 1) throw ConfigError("representative_features requires m >= 1");
  auto normalized = [](Vector v) -> std::optional<Vector> {
    double norm = 0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm <= 0) return std::nullopt;
    for (double& x : v) x /= norm;
    return v;
  };
  std::vector<Vector> source = static_cast<std::size_t>(m) >= features.size()
                                   ? features
                                   : kmeans(features, m, seed).centers;
  std::vector<Vector> out;
  out.reserve(source.size());
  for (const auto& v : source)
    if (auto u = normalized(v)) out.push_back(std::move(*u));
  return out;
}

}  // namespace ssal
