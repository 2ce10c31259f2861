#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "p6d/geometry.hpp"

namespace p6d {

/// Triangle mesh in arbitrary model units with an explicit metric scale.
struct TriangleMesh {
  std::vector<Vec3> vertices;                       // model units
  std::vector<std::array<std::uint32_t, 3>> triangles;
  double scale = 1.0;                               // meters per model unit

  Vec3 metric_vertex(std::size_t i) const { return vertices[i] * scale; }
  /// Metric corners of triangle i.
  std::array<Vec3, 3> metric_triangle(std::size_t i) const;
  /// Copy with vertices multiplied out so that scale == 1.
  TriangleMesh metric() const;
};

/// Index range, finiteness, scale > 0 and at least one triangle.
void validate(const TriangleMesh& mesh);

/// Surface area in square meters.
double surface_area(const TriangleMesh& mesh);

/// ASCII OBJ subset: `v x y z` and triangular `f` records. Texture and normal
/// indices (`f 1/2/3 ...`) are accepted and ignored; polygons are rejected.
TriangleMesh load_obj(const std::filesystem::path& path, double scale = 1.0);
void save_obj(const TriangleMesh& mesh, const std::filesystem::path& path);

/// Area-weighted uniform samples on the surface, metric model frame.
std::vector<Vec3> sample_mesh_surface(const TriangleMesh& mesh, std::size_t n,
                                      std::uint64_t seed);

/// Applies `pose` to every point.
std::vector<Vec3> transform_points(const Pose& pose, const std::vector<Vec3>& points);

}  // namespace p6d
