#pragma once

#include <cstdint>
#include <vector>

namespace ssal {

using Vector = std::vector<double>;

struct KMeansResult {
  std::vector<Vector> centers;
  std::vector<int> assignments;  // nearest center per sample, ties to the lowest index
  double inertia = 0;            // sum of squared distances to assigned centers
  std::vector<double> inertia_trace;  // inertia after each assignment step
  int iterations = 0;
};

struct KMeansOptions {
  double tolerance = 1e-6;  // max center movement that counts as converged
  int max_iterations = 100;
};

/// Seeded k-means: k-means++ seeding followed by Lloyd iterations. The
/// effective k never exceeds the number of distinct samples. Clusters that
/// empty out are re-seeded at the sample farthest from its center.
/// Throws EmptyInputError on empty input, ConfigError for k < 1 or ragged
/// sample dimensions.
KMeansResult kmeans(const std::vector<Vector>& samples, int k, std::uint64_t seed,
                    const KMeansOptions& options = {});

/// Indices whose 1-D k-means cluster has the smallest center.
std::vector<std::size_t> confident_group(const std::vector<double>& uncertainties, int k,
                                         std::uint64_t seed);

/// k-means centers (k = m) normalized to unit length. When m covers every
/// sample the normalized samples are returned in input order. Zero-length
/// centers are dropped.
std::vector<Vector> representative_features(const std::vector<Vector>& features, int m,
                                            std::uint64_t seed);

double squared_distance(const Vector& a, const Vector& b);

}  // namespace ssal
