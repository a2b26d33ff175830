#pragma once

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "ssal/types.hpp"

namespace testing {

// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("ssal_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Concatenation of every regular file under dir, keyed by relative path.
inline std::string tree_bytes(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::string all;
  for (const auto& f : files) all += std::filesystem::relative(f, dir).string() + "\n" + slurp(f) + "\n";
  return all;
}

inline ssal::Detection det(const std::string& scene, const std::vector<double>& probs, const ssal::Box3D& box,
                           double score = -1.0) {
  ssal::Detection d;
  d.scene_id = scene;
  d.probs = probs;
  d.class_id = ssal::argmax(probs);
  d.score = score < 0 ? probs[d.class_id] : score;
  d.box = box;
  return d;
}

inline ssal::Box3D cube(double x, double y = 0, double z = 0, double side = 1.0, double yaw = 0.0) {
  return ssal::Box3D::make(x, y, z, side, side, side, yaw);
}

inline ssal::Box3D random_box(std::mt19937_64& rng, double spread = 2.0) {
  std::uniform_real_distribution<double> pos(-spread, spread), ext(0.3, 3.0), yaw(-ssal::kPi, ssal::kPi),
      z(-0.5, 0.5);
  return ssal::Box3D::make(pos(rng), pos(rng), z(rng), ext(rng), ext(rng), ext(rng), yaw(rng));
}

inline std::vector<double> random_probs(std::mt19937_64& rng, int C) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> p(C);
  double sum = 0;
  for (double& x : p) sum += (x = u(rng));
  for (double& x : p) x /= sum;
  return p;
}

}  // namespace testing
