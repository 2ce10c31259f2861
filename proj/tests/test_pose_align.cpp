#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "p6d/error.hpp"
#include "p6d/pose_align.hpp"
#include "p6d/raster.hpp"
#include "p6d/synthetic.hpp"
#include "support.hpp"

using namespace p6d;

namespace {

PatchGrid random_grid(Rng& rng, std::size_t rows, std::size_t cols, std::size_t dim) {
  PatchGrid g(rows, cols, dim);
  for (auto& x : g.data) x = static_cast<float>(rng.normal());
  for (auto& f : g.foreground) f = rng.uniform() < 0.6;
  g.foreground[0] = 1;
  return g;
}

// Mean cosine over the query's foreground patches, written out directly.
double naive_score(const PatchGrid& q, const PatchGrid& t) {
  double sum = 0.0;
  int n = 0;
  for (std::size_t k = 0; k < q.patch_count(); ++k) {
    if (!q.foreground[k]) continue;
    ++n;
    if (!t.foreground[k]) continue;
    double d = 0, nq = 0, nt = 0;
    for (std::size_t c = 0; c < q.dim; ++c) {
      const double a = q.data[k * q.dim + c], b = t.data[k * q.dim + c];
      d += a * b;
      nq += a * a;
      nt += b * b;
    }
    if (nq > 0 && nt > 0) sum += d / std::sqrt(nq * nt);
  }
  return sum / n;
}

}  // namespace

TEST_SUITE("pose_align") {

TEST_CASE("query equal to a template view matches it with score 1") {
  Rng rng(31);
  ObjectEntry e;
  e.object_id = "x";
  for (int v = 0; v < 40; ++v) e.views.push_back({random_rotation(rng), random_grid(rng, 5, 5, 8), {}, {1, 1, 1}});
  const auto m = estimate_rotation(e.views[17].grid, e);
  CHECK(m.view_index == 17);
  CHECK(m.score == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(angular_distance(m.rotation, e.views[17].rotation) < 1e-12);
}

TEST_CASE("orthogonal query scores zero and ties to view 0") {
  ObjectEntry e;
  for (int v = 0; v < 5; ++v) {
    PatchGrid g(2, 2, 2);
    std::fill(g.foreground.begin(), g.foreground.end(), 1);
    for (std::size_t k = 0; k < 4; ++k) g.data[k * 2] = 1.0f + static_cast<float>(v);
    e.views.push_back({Rotation::identity(), g, {}, {1, 1, 1}});
  }
  PatchGrid q(2, 2, 2);
  std::fill(q.foreground.begin(), q.foreground.end(), 1);
  for (std::size_t k = 0; k < 4; ++k) q.data[k * 2 + 1] = 1.0f;
  const auto m = estimate_rotation(q, e);
  CHECK(m.view_index == 0);
  CHECK(m.score == 0.0);
}

TEST_CASE("argmax equals an exhaustive naive loop over 600 templates") {
  Rng rng(32);
  ObjectEntry e;
  for (int v = 0; v < 600; ++v) e.views.push_back({random_rotation(rng), random_grid(rng, 6, 6, 12), {}, {1, 1, 1}});
  for (int trial = 0; trial < 5; ++trial) {
    const PatchGrid q = random_grid(rng, 6, 6, 12);
    std::size_t best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t v = 0; v < e.views.size(); ++v) {
      const double s = naive_score(q, e.views[v].grid);
      if (s > best_score) {
        best_score = s;
        best = v;
      }
    }
    const auto m = estimate_rotation(q, e);
    CHECK(m.view_index == best);
    CHECK(m.score == doctest::Approx(best_score).epsilon(1e-12));
    CHECK(patch_similarity(q, e.views[best].grid) == doctest::Approx(best_score).epsilon(1e-12));
  }
}

TEST_CASE("scaling all query tokens keeps the argmax") {
  Rng rng(33);
  ObjectEntry e;
  for (int v = 0; v < 100; ++v) e.views.push_back({random_rotation(rng), random_grid(rng, 4, 4, 6), {}, {1, 1, 1}});
  PatchGrid q = random_grid(rng, 4, 4, 6);
  const auto a = estimate_rotation(q, e);
  for (auto& x : q.data) x *= 42.0f;
  const auto b = estimate_rotation(q, e);
  CHECK(a.view_index == b.view_index);
  CHECK(a.score == doctest::Approx(b.score).epsilon(1e-9));
}

TEST_CASE("shape mismatch and empty foreground are data errors") {
  Rng rng(34);
  ObjectEntry e;
  e.views.push_back({Rotation::identity(), random_grid(rng, 4, 4, 6), {}, {1, 1, 1}});
  CHECK_THROWS_AS(estimate_rotation(random_grid(rng, 4, 4, 5), e), Error);
  PatchGrid q = random_grid(rng, 4, 4, 6);
  std::fill(q.foreground.begin(), q.foreground.end(), 0);
  CHECK_THROWS_AS(estimate_rotation(q, e), Error);
}

TEST_CASE("translation from a box: worked example and symmetries") {
  const CameraIntrinsics k{600, 320, 240, 640, 480};
  const Vec3 t = estimate_translation({320, 240, 100, 200}, {0.1, 0.2, 0.1}, k);
  CHECK((t - Vec3(0, 0, 0.6)).norm() < 1e-12);

  const Vec3 t2 = estimate_translation({320, 240, 200, 400}, {0.1, 0.2, 0.1}, k);
  CHECK(t2.z() == doctest::Approx(0.3));

  const Vec3 t3 = estimate_translation({320 + 600, 240, 100, 200}, {0.1, 0.2, 0.1}, k);
  CHECK(t3.x() == doctest::Approx(t3.z()).epsilon(1e-12));

  CHECK_THROWS_AS(estimate_translation({0, 0, 0, 10}, {1, 1, 1}, k), Error);
}

TEST_CASE("translation is projectively consistent on random cases") {
  Rng rng(35);
  for (int i = 0; i < 1000; ++i) {
    const CameraIntrinsics k{rng.uniform(200, 3000), rng.uniform(100, 900), rng.uniform(100, 700), 1000, 800};
    const BoundingBox b{rng.uniform(-200, 1200), rng.uniform(-200, 1000), rng.uniform(5, 500), rng.uniform(5, 500)};
    const Extents ex{rng.uniform(0.01, 2), rng.uniform(0.01, 2), rng.uniform(0.01, 2)};
    const Vec3 t = estimate_translation(b, ex, k);
    CHECK((project(t, k) - Vec2(b.cx, b.cy)).norm() < 1e-9);
    const Vec3 swapped = estimate_translation({b.cx, b.cy, b.h, b.w}, {ex.height, ex.width, ex.depth}, k);
    CHECK(swapped.z() == t.z());
    const Vec3 doubled = estimate_translation({b.cx, b.cy, 2 * b.w, 2 * b.h}, ex, k);
    CHECK(doubled.z() == doctest::Approx(t.z() / 2).epsilon(1e-15));
  }
}

TEST_CASE("default intrinsics") {
  CHECK(default_intrinsics(640, 480).f == 800.0);
  CHECK(default_intrinsics(1920, 1080).f == doctest::Approx(2202.907));
  CHECK(default_intrinsics(640, 480).cx == 320.0);
  CHECK_THROWS_AS(default_intrinsics(1000, 0), Error);
}

TEST_CASE("query crop and patch foreground") {
  const BoundingBox c = query_crop({50, 60, 20, 10}, 0.1);
  CHECK(c.w == doctest::Approx(24.0));
  CHECK(c.h == c.w);
  CHECK(c.cx == 50.0);

  BinaryMask m(8, 8);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 8; ++x) m.at(x, y) = 1;
  const auto fg = patch_foreground(m, {4, 4, 8, 8}, 2, 2);
  CHECK(fg == std::vector<std::uint8_t>{1, 1, 0, 0});
}

TEST_CASE("exact-feature forward render recovers the pose") {
  const TriangleMesh native = scaled(make_icosphere(2), {1.0, 0.6, 0.4});
  const FeatureField field(24, 2.0, 5);
  const ObjectEntry entry = make_object_entry("blob", native, field);
  REQUIRE(entry.views.size() == 600);

  TriangleMesh metric = native;
  metric.scale = 0.1;
  const double size = entry.characteristic_size() * metric.scale;
  const CameraIntrinsics k = default_intrinsics(640, 480);
  Rng rng(36);
  // 600 views leave up to ~25 degrees to the nearest template.
  double sum = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    const Pose truth(random_rotation(rng), Vec3(rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), rng.uniform(0.6, 1.2)));
    Proposal p;
    p.query_grid = render_query(metric, truth, k, field);
    p.bbox = *mask_bbox(rasterize_silhouette(metric, truth, k));
    const AlignmentResult r = estimate_pose(p, entry, k, size);
    const double err = angular_distance(r.pose.rotation, truth.rotation) * 180 / std::numbers::pi;
    CHECK(err <= 45.0);
    sum += err;
    CHECK(std::abs(r.pose.translation.z() / truth.translation.z() - 1.0) < 0.15);
    CHECK(r.score == doctest::Approx(patch_similarity(p.query_grid, entry.views[r.view_index].grid)).epsilon(1e-12));
  }
  CHECK(sum / 5 <= 25.0);
}

TEST_CASE("identity template with a centered box gives zero lateral offset") {
  ObjectEntry e;
  e.object_id = "c";
  PatchGrid g(1, 1, 1);
  g.foreground = {1};
  g.data = {1.0f};
  e.views.push_back({Rotation::identity(), g, {}, {2.0, 1.0, 1.0}});
  Proposal p;
  p.query_grid = g;
  const CameraIntrinsics k = default_intrinsics(640, 480);
  p.bbox = {k.cx, k.cy, 100, 50};
  const auto r = estimate_pose(p, e, k, 0.2);
  CHECK(r.pose.translation.x() == 0.0);
  CHECK(r.pose.translation.y() == 0.0);
  CHECK(r.pose.translation.z() == doctest::Approx(800 * 0.2 / 100));
}

}
