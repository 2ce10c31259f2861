#pragma once

#include <cmath>
#include <filesystem>
#include <string>

#include "p6d/geometry.hpp"
#include "p6d/random.hpp"
#include "p6d/so3_sampling.hpp"

namespace p6d::test {

inline Vec3 random_vec(Rng& rng, double sigma = 1.0) {
  return {rng.normal(0.0, sigma), rng.normal(0.0, sigma), rng.normal(0.0, sigma)};
}

inline Pose random_pose(Rng& rng, double t_sigma = 1.0) {
  return Pose(random_rotation(rng), random_vec(rng, t_sigma));
}

inline double pose_gap(const Pose& a, const Pose& b) {
  return std::max(angular_distance(a.rotation, b.rotation), (a.translation - b.translation).norm());
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("p6d_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace p6d::test
