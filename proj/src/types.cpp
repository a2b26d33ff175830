#include "ssal/types.hpp"

#include <cmath>
#include <numeric>

#include "ssal/errors.hpp"

namespace ssal {

double normalize_yaw(double yaw) {
  if (!std::isfinite(yaw)) throw InvariantError("yaw is not finite");
  double a = std::remainder(yaw, 2 * kPi);  // [-pi, pi]
  if (a <= -kPi) a += 2 * kPi;
  return a;
}

Box3D Box3D::make(double cx, double cy, double cz, double dx, double dy, double dz,
                  double yaw) {
  Box3D b{cx, cy, cz, dx, dy, dz, normalize_yaw(yaw)};
  validate(b);
  return b;
}

void validate(const Box3D& b) {
  for (double v : {b.cx, b.cy, b.cz, b.dx, b.dy, b.dz, b.yaw})
    if (!std::isfinite(v)) throw InvariantError("box has non-finite field");
  if (b.dx <= 0 || b.dy <= 0 || b.dz <= 0)
    throw InvariantError("box extents must be strictly positive");
  if (b.yaw <= -kPi || b.yaw > kPi) throw InvariantError("box yaw outside (-pi, pi]");
}

const char* to_string(Source s) {
  switch (s) {
    case Source::NormalModel: return "normal";
    case Source::CpspModel: return "cpsp";
    case Source::Ensemble: return "ensemble";
    case Source::Intersection: return "intersection";
    case Source::Surrogate: return "surrogate";
    case Source::GroundTruth: return "gt";
  }
  return "surrogate";
}

Source source_from_string(const std::string& s) {
  for (Source v : {Source::NormalModel, Source::CpspModel, Source::Ensemble,
                   Source::Intersection, Source::Surrogate, Source::GroundTruth})
    if (s == to_string(v)) return v;
  throw ParseError("unknown detection source '" + s + "'");
}

int argmax(const std::vector<double>& probs) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(probs.size()); ++i)
    if (probs[i] > probs[best]) best = i;
  return best;
}

std::vector<double> one_hot(int class_id, int class_count) {
  if (class_id < 0 || class_id >= class_count)
    throw InvariantError("class id out of range for one-hot");
  std::vector<double> p(class_count, 0.0);
  p[class_id] = 1.0;
  return p;
}

void validate(const Detection& det) {
  validate(det.box);
  if (!(det.score >= 0.0 && det.score <= 1.0)) throw InvariantError("score outside [0,1]");
  if (det.probs.empty()) throw InvariantError("detection has no class probabilities");
  double sum = 0;
  for (double p : det.probs) {
    if (!(p >= 0.0)) throw InvariantError("negative or NaN class probability");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-6) throw InvariantError("class probabilities do not sum to 1");
  if (det.class_id != argmax(det.probs))
    throw InvariantError("class_id differs from argmax of probs");
}

void validate(const IgnoreRegion& r) {
  if (!(r.bounds[0] < r.bounds[2]) || !(r.bounds[1] < r.bounds[3]))
    throw InvariantError("ignore region requires min < max on both axes");
}

ClassSet::ClassSet(std::vector<std::string> n) : names(std::move(n)) {
  if (names.empty()) throw ConfigError("class set is empty");
  for (std::size_t i = 0; i < names.size(); ++i)
    for (std::size_t j = i + 1; j < names.size(); ++j)
      if (names[i] == names[j]) throw ConfigError("duplicate class name '" + names[i] + "'");
}

int ClassSet::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return static_cast<int>(i);
  return -1;
}

Pool::Pool(std::set<std::string> labeled, std::set<std::string> unlabeled)
    : labeled_(std::move(labeled)), unlabeled_(std::move(unlabeled)) {
  for (const auto& id : labeled_)
    if (unlabeled_.count(id)) throw InvariantError("scene '" + id + "' is both labeled and unlabeled");
}

void Pool::annotate(const std::string& scene_id) {
  auto it = unlabeled_.find(scene_id);
  if (it == unlabeled_.end()) throw InvariantError("scene '" + scene_id + "' is not unlabeled");
  unlabeled_.erase(it);
  labeled_.insert(scene_id);
}

}  // namespace ssal
