#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "p6d/geometry.hpp"
#include "p6d/image.hpp"
#include "p6d/mesh.hpp"

namespace p6d {

/// Nearest-surface buffer sampled at pixel centers.
struct DepthRender {
  int width = 0;
  int height = 0;
  std::vector<double> depth;        // camera z, +inf where empty
  std::vector<Vec3> model_points;   // metric model frame, valid where depth is finite
  std::vector<std::int32_t> triangle;  // -1 where empty

  bool hit(int x, int y) const {
    return triangle[static_cast<std::size_t>(y) * width + x] >= 0;
  }
};

/// Z-buffered rasterization of a posed mesh. Both windings are drawn.
/// Geometry in front of z = kNearPlane is clipped away.
DepthRender render_depth(const TriangleMesh& mesh, const Pose& pose, const CameraIntrinsics& k);

/// Silhouette with 2x2 supersampling: a pixel is set when at least two of the
/// sub-samples at (x + 0.25 | 0.75, y + 0.25 | 0.75) fall inside a triangle.
/// Edges count as inside. A mesh fully behind the camera gives an empty mask.
BinaryMask rasterize_silhouette(const TriangleMesh& mesh, const Pose& pose,
                                const CameraIntrinsics& k);

inline constexpr double kNearPlane = 1e-3;

}  // namespace p6d
