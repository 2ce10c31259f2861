#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "p6d/geometry.hpp"

namespace p6d {

struct PnPOptions {
  bool ransac = false;
  double inlier_threshold_px = 4.0;
  int ransac_iterations = 200;
  std::size_t ransac_sample_size = 6;
  std::uint64_t seed = 0;
  int refine_iterations = 50;
};

struct PnPResult {
  Pose pose;                          // model -> camera
  double rms = 0.0;                   // over inliers, pixels
  std::vector<std::uint8_t> inliers;  // all ones without RANSAC
  std::size_t inlier_count = 0;
};

/// Closed-form EPnP (Lepetit et al. 2009). Four control points in general
/// position, three for planar point sets. At least 4 correspondences.
Pose epnp(std::span<const Vec3> points3d, std::span<const Vec2> points2d,
          const CameraIntrinsics& k);

/// Levenberg-Marquardt on the reprojection error, left-multiplied SE(3)
/// increments.
Pose refine_pose(const Pose& initial, std::span<const Vec3> points3d,
                 std::span<const Vec2> points2d, const CameraIntrinsics& k, int iterations = 50);

/// Infinite if any point falls behind the camera.
double reprojection_rms(const Pose& pose, std::span<const Vec3> points3d,
                        std::span<const Vec2> points2d, const CameraIntrinsics& k);

/// EPnP followed by refinement, optionally inside a seeded RANSAC loop.
PnPResult solve_pnp(std::span<const Vec3> points3d, std::span<const Vec2> points2d,
                    const CameraIntrinsics& k, const PnPOptions& options = {});

}  // namespace p6d
