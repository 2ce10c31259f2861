#include "p6d/raster.hpp"

#include <algorithm>
#include <cmath>

namespace p6d {

namespace {

struct Polygon {
  std::array<Vec3, 4> v;
  std::size_t n = 0;
  void push_back(const Vec3& p) { v[n++] = p; }
  std::size_t size() const { return n; }
  const Vec3& operator[](std::size_t i) const { return v[i]; }
};

// Clips a camera-frame triangle to z >= kNearPlane (Sutherland-Hodgman).
Polygon clip_near(const std::array<Vec3, 3>& tri) {
  Polygon out;
  for (int i = 0; i < 3; ++i) {
    const Vec3& a = tri[i];
    const Vec3& b = tri[(i + 1) % 3];
    const bool ina = a.z() >= kNearPlane;
    const bool inb = b.z() >= kNearPlane;
    if (ina) out.push_back(a);
    if (ina != inb) {
      const double s = (kNearPlane - a.z()) / (b.z() - a.z());
      Vec3 p = a + s * (b - a);
      p.z() = kNearPlane;
      out.push_back(p);
    }
  }
  return out;
}

double edge(const Vec2& a, const Vec2& b, const Vec2& p) {
  return (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
}

// Visits samples at ((i + 0.5) / ss, (j + 0.5) / ss) inside the 2D triangle.
template <typename Fn>
void scan_triangle(Vec2 a, Vec2 b, Vec2 c, int cols, int rows, int ss, Fn&& fn) {
  double area = edge(a, b, c);
  if (area == 0.0 || !std::isfinite(area)) return;
  if (area < 0.0) std::swap(b, c);
  const double minx = std::min({a.x(), b.x(), c.x()});
  const double maxx = std::max({a.x(), b.x(), c.x()});
  const double miny = std::min({a.y(), b.y(), c.y()});
  const double maxy = std::max({a.y(), b.y(), c.y()});
  const int i0 = std::max(0, static_cast<int>(std::ceil(minx * ss - 0.5)));
  const int i1 = std::min(cols - 1, static_cast<int>(std::floor(maxx * ss - 0.5)));
  const int j0 = std::max(0, static_cast<int>(std::ceil(miny * ss - 0.5)));
  const int j1 = std::min(rows - 1, static_cast<int>(std::floor(maxy * ss - 0.5)));
  for (int j = j0; j <= j1; ++j) {
    for (int i = i0; i <= i1; ++i) {
      const Vec2 p((i + 0.5) / ss, (j + 0.5) / ss);
      if (edge(a, b, p) >= 0.0 && edge(b, c, p) >= 0.0 && edge(c, a, p) >= 0.0) fn(i, j, p);
    }
  }
}

Vec2 to_pixel(const Vec3& x, const CameraIntrinsics& k) {
  return {k.f * x.x() / x.z() + k.cx, k.f * x.y() / x.z() + k.cy};
}

// Calls fn(triangle index, camera-frame corners, projected clipped fan).
template <typename Fn>
void for_each_projected(const TriangleMesh& mesh, const Pose& pose, const CameraIntrinsics& k,
                        Fn&& fn) {
  const Mat3 r = pose.rotation.matrix();
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    std::array<Vec3, 3> cam = mesh.metric_triangle(t);
    for (auto& v : cam) v = r * v + pose.translation;
    if (cam[0].z() < kNearPlane && cam[1].z() < kNearPlane && cam[2].z() < kNearPlane) continue;
    const auto poly = clip_near(cam);
    for (std::size_t i = 1; i + 1 < poly.size(); ++i)
      fn(t, cam, to_pixel(poly[0], k), to_pixel(poly[i], k), to_pixel(poly[i + 1], k));
  }
}

}  // namespace

DepthRender render_depth(const TriangleMesh& mesh, const Pose& pose, const CameraIntrinsics& k) {
  validate(k);
  DepthRender out;
  out.width = k.width;
  out.height = k.height;
  const auto n = static_cast<std::size_t>(k.width) * k.height;
  out.depth.assign(n, std::numeric_limits<double>::infinity());
  out.model_points.assign(n, Vec3::Zero());
  out.triangle.assign(n, -1);
  const Pose inv = pose.inverse();

  for_each_projected(mesh, pose, k, [&](std::size_t t, const std::array<Vec3, 3>& cam,
                                        const Vec2& a, const Vec2& b, const Vec2& c) {
    const Vec3 normal = (cam[1] - cam[0]).cross(cam[2] - cam[0]);
    const double offset = normal.dot(cam[0]);
    scan_triangle(a, b, c, k.width, k.height, 1, [&](int x, int y, const Vec2& p) {
      const Vec3 ray((p.x() - k.cx) / k.f, (p.y() - k.cy) / k.f, 1.0);
      const double denom = normal.dot(ray);
      if (denom == 0.0) return;
      const double z = offset / denom;
      const auto i = static_cast<std::size_t>(y) * k.width + x;
      if (!(z >= kNearPlane) || z >= out.depth[i]) return;
      out.depth[i] = z;
      out.model_points[i] = inv * (z * ray);
      out.triangle[i] = static_cast<std::int32_t>(t);
    });
  });
  return out;
}

BinaryMask rasterize_silhouette(const TriangleMesh& mesh, const Pose& pose,
                                const CameraIntrinsics& k) {
  validate(k);
  const int sw = 2 * k.width, sh = 2 * k.height;
  std::vector<std::uint8_t> sub(static_cast<std::size_t>(sw) * sh, 0);
  for_each_projected(mesh, pose, k, [&](std::size_t, const std::array<Vec3, 3>&, const Vec2& a,
                                        const Vec2& b, const Vec2& c) {
    scan_triangle(a, b, c, sw, sh, 2, [&](int i, int j, const Vec2&) {
      sub[static_cast<std::size_t>(j) * sw + i] = 1;
    });
  });
  BinaryMask mask(k.width, k.height);
  for (int y = 0; y < k.height; ++y)
    for (int x = 0; x < k.width; ++x) {
      const auto r0 = static_cast<std::size_t>(2 * y) * sw + 2 * x;
      const int hits = sub[r0] + sub[r0 + 1] + sub[r0 + sw] + sub[r0 + sw + 1];
      mask.at(x, y) = hits >= 2;
    }
  return mask;
}

}  // namespace p6d
