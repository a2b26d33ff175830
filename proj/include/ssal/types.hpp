#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace ssal {

inline constexpr double kPi = 3.14159265358979323846;

/// Wraps an angle into (-pi, pi].
double normalize_yaw(double yaw);

/// Oriented 3D box: center, full extents, rotation about the vertical axis.
struct Box3D {
  double cx = 0, cy = 0, cz = 0;
  double dx = 1, dy = 1, dz = 1;
  double yaw = 0;

  /// Validating constructor: extents must be > 0 and finite, yaw is
  /// normalized. Throws InvariantError.
  static Box3D make(double cx, double cy, double cz, double dx, double dy,
                    double dz, double yaw);

  double volume() const { return dx * dy * dz; }
  double z_min() const { return cz - dz / 2; }
  double z_max() const { return cz + dz / 2; }

  bool operator==(const Box3D&) const = default;
};

/// Throws InvariantError unless the box satisfies the Box3D invariants.
void validate(const Box3D& box);

enum class Source { NormalModel, CpspModel, Ensemble, Intersection, Surrogate, GroundTruth };

const char* to_string(Source s);
Source source_from_string(const std::string& s);

/// One predicted (or ground-truth) object.
struct Detection {
  std::string scene_id;
  int class_id = 0;
  std::vector<double> probs;
  double score = 1.0;
  Box3D box;
  std::vector<double> feature;
  Source source = Source::Surrogate;

  bool operator==(const Detection&) const = default;
};

/// Index of the largest probability; ties resolve to the lowest index.
int argmax(const std::vector<double>& probs);

/// One-hot distribution of length `class_count` at `class_id`.
std::vector<double> one_hot(int class_id, int class_count);

/// Checks probs (nonnegative, sums to 1 +- 1e-6), score range and box.
void validate(const Detection& det);

struct Point {
  float x = 0, y = 0, z = 0, intensity = 0;
  bool operator==(const Point&) const = default;
};

using PointCloud = std::vector<Point>;

/// Region whose contents are unlabeled. ImageRect bounds are pixel
/// (u_min, v_min, u_max, v_max) and need a 3x4 projection (row-major);
/// BevRect bounds are (x_min, y_min, x_max, y_max) in meters.
struct IgnoreRegion {
  enum class Kind { ImageRect, BevRect };
  Kind kind = Kind::BevRect;
  std::array<double, 4> bounds{};
  std::optional<std::array<double, 12>> projection;

  bool operator==(const IgnoreRegion&) const = default;
};

void validate(const IgnoreRegion& region);

struct Scene {
  std::string scene_id;
  PointCloud points;
  std::map<std::string, std::vector<Detection>> detections_by_model;
  std::optional<std::vector<Detection>> gt;
  std::vector<IgnoreRegion> ignore_regions;
};

struct ClassSet {
  std::vector<std::string> names;

  /// Throws ConfigError on empty or duplicate names.
  explicit ClassSet(std::vector<std::string> names);
  ClassSet() = default;

  int size() const { return static_cast<int>(names.size()); }
  int index_of(const std::string& name) const;  // -1 when absent
};

/// Labeled/unlabeled split of scene ids. The two sets never intersect.
class Pool {
 public:
  Pool() = default;
  /// Throws InvariantError if the sets overlap.
  Pool(std::set<std::string> labeled, std::set<std::string> unlabeled);

  const std::set<std::string>& labeled() const { return labeled_; }
  const std::set<std::string>& unlabeled() const { return unlabeled_; }

  /// Moves an unlabeled id to labeled. Throws InvariantError when the id is
  /// not in the unlabeled set.
  void annotate(const std::string& scene_id);

 private:
  std::set<std::string> labeled_;
  std::set<std::string> unlabeled_;
};

}  // namespace ssal
