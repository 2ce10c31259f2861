#include <doctest.h>

#include "p6d/raster.hpp"
#include "p6d/synthetic.hpp"
#include "support.hpp"

using namespace p6d;

namespace {

TriangleMesh square(double half) {
  TriangleMesh m;
  m.vertices = {{-half, -half, 0}, {half, -half, 0}, {half, half, 0}, {-half, half, 0}};
  m.triangles = {{0, 1, 2}, {0, 2, 3}};
  return m;
}

bool inside(const Vec2& p, const Vec2& a, const Vec2& b, const Vec2& c) {
  const auto edge = [](const Vec2& u, const Vec2& v, const Vec2& q) {
    return (v.x() - u.x()) * (q.y() - u.y()) - (v.y() - u.y()) * (q.x() - u.x());
  };
  const double e0 = edge(a, b, p), e1 = edge(b, c, p), e2 = edge(c, a, p);
  return (e0 >= 0 && e1 >= 0 && e2 >= 0) || (e0 <= 0 && e1 <= 0 && e2 <= 0);
}

}  // namespace

TEST_SUITE("raster") {

TEST_CASE("square silhouette matches its projected area") {
  const CameraIntrinsics k = default_intrinsics(640, 480);
  const BinaryMask m = rasterize_silhouette(square(0.05), Pose(Rotation::identity(), Vec3(0.01, 0, 1.0)), k);
  const double side = 0.1 * k.f;
  CHECK(static_cast<double>(m.count()) == doctest::Approx(side * side).epsilon(0.02));
}

TEST_CASE("mesh behind the camera gives an empty mask") {
  const CameraIntrinsics k = default_intrinsics(64, 48);
  CHECK(rasterize_silhouette(square(0.05), Pose(Rotation::identity(), Vec3(0, 0, -1)), k).empty());
}

TEST_CASE("silhouette equals a brute-force point-in-triangle test") {
  CameraIntrinsics k;
  k.width = k.height = 64;
  k.f = 80;
  k.cx = k.cy = 32;
  Rng rng(61);
  for (int trial = 0; trial < 5; ++trial) {
    TriangleMesh mesh;
    for (int i = 0; i < 6; ++i) mesh.vertices.push_back(test::random_vec(rng, 0.3));
    mesh.triangles = {{0, 1, 2}, {3, 4, 5}, {0, 3, 5}};
    const Pose pose(random_rotation(rng), Vec3(0, 0, 2));
    const BinaryMask m = rasterize_silhouette(mesh, pose, k);

    std::vector<std::array<Vec2, 3>> tris;
    for (const auto& t : mesh.triangles)
      tris.push_back({project(pose * mesh.vertices[t[0]], k), project(pose * mesh.vertices[t[1]], k),
                      project(pose * mesh.vertices[t[2]], k)});
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x) {
        int covered = 0;
        for (double sy : {0.25, 0.75})
          for (double sx : {0.25, 0.75}) {
            const Vec2 p(x + sx, y + sy);
            bool hit = false;
            for (const auto& t : tris) hit = hit || inside(p, t[0], t[1], t[2]);
            covered += hit;
          }
        CHECK(m.at(x, y) == (covered >= 2 ? 1 : 0));
      }
  }
}

TEST_CASE("depth buffer keeps the nearest surface") {
  const CameraIntrinsics k = default_intrinsics(64, 48);
  TriangleMesh two = square(0.5);
  const std::size_t n = two.vertices.size();
  for (std::size_t i = 0; i < n; ++i) two.vertices.push_back(two.vertices[i] + Vec3(0, 0, 1));
  two.triangles.push_back({4, 5, 6});
  two.triangles.push_back({4, 6, 7});
  const DepthRender r = render_depth(two, Pose(Rotation::identity(), Vec3(0, 0, 2)), k);
  CHECK(r.depth[24 * 64 + 32] == doctest::Approx(2.0));
  CHECK(r.model_points[24 * 64 + 32].z() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("near-plane clipping keeps the visible part") {
  const CameraIntrinsics k = default_intrinsics(64, 48);
  TriangleMesh floor;
  floor.vertices = {{-1, 0.2, -1}, {1, 0.2, -1}, {1, 0.2, 3}, {-1, 0.2, 3}};
  floor.triangles = {{0, 1, 2}, {0, 2, 3}};
  const BinaryMask m = rasterize_silhouette(floor, Pose::identity(), k);
  CHECK(m.count() > 0);
  CHECK(m.at(32, 0) == 0);
}

}
