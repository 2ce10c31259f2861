#include <doctest.h>

#include <cmath>

#include "p6d/error.hpp"
#include "p6d/raster.hpp"
#include "p6d/synthetic.hpp"
#include "p6d/track.hpp"
#include "support.hpp"

using namespace p6d;

namespace {

constexpr double kDeg = 3.141592653589793 / 180.0;
const CameraIntrinsics kCam{600, 320, 240, 640, 480};

std::vector<Pose> moving_poses(int n) {
  std::vector<Pose> out;
  for (int f = 0; f < n; ++f)
    out.emplace_back(Rotation::about_axis(Vec3(0.3, 1, 0.2), 0.03 * f) * Rotation::about_axis(Vec3(1, 0, 0), 0.4),
                     Vec3(0.002 * f, -0.001 * f, 0.6 + 0.003 * f));
  return out;
}

CorrespondenceSet project_all(const std::vector<Vec3>& pts, const std::vector<Pose>& poses) {
  CorrespondenceSet c;
  c.points3d = pts;
  for (std::size_t f = 0; f < poses.size(); ++f) {
    TrackFrame tf;
    tf.index = static_cast<int>(f);
    for (const auto& p : pts) {
      tf.points.push_back(project(poses[f] * p, kCam));
      tf.visible.push_back(1);
    }
    c.frames.push_back(tf);
  }
  return c;
}

std::vector<Vec3> cloud(Rng& rng, std::size_t n) {
  std::vector<Vec3> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(test::random_vec(rng, 0.05));
  return out;
}

}  // namespace

TEST_SUITE("track") {

TEST_CASE("init frame is the best-scoring one") {
  std::vector<AlignmentResult> r(3);
  const double scores[] = {0.3, 0.9, 0.5};
  for (int i = 0; i < 3; ++i) {
    r[i].frame_index = i;
    r[i].score = scores[i];
  }
  CHECK(select_init_frame(r) == 1);
  r[2].score = 0.9;
  CHECK(select_init_frame(r) == 1);
  r[0].frame_index = 5;
  r[0].score = 0.9;
  CHECK(select_init_frame(r) == 1);
  CHECK_THROWS_AS(select_init_frame(std::vector<AlignmentResult>{}), Error);
}

TEST_CASE("sphere seeds lie on the visible hemisphere inside the mask box") {
  TriangleMesh sphere = make_icosphere(3);
  sphere.scale = 0.05;
  Rng rng(71);
  const Pose pose(random_rotation(rng), Vec3(0.02, -0.01, 0.5));
  const Seeds s = seed_correspondences(sphere, pose, kCam, 256, 3);
  REQUIRE(s.points3d.size() > 200);
  const BoundingBox box = *mask_bbox(rasterize_silhouette(sphere, pose, kCam));
  for (std::size_t i = 0; i < s.pixels.size(); ++i) {
    CHECK(std::abs(s.pixels[i].x() - box.cx) <= 0.5 * box.w + 1.0);
    CHECK(std::abs(s.pixels[i].y() - box.cy) <= 0.5 * box.h + 1.0);
    const Vec3 x = pose * s.points3d[i];
    // Facets near the rim may differ slightly from the sphere normal.
    const Vec3 normal = pose.rotation * s.points3d[i];
    CHECK(normal.normalized().dot(x.normalized()) < 0.1);
    CHECK((project(x, kCam) - s.pixels[i]).norm() < 1e-9);
  }
  const Seeds again = seed_correspondences(sphere, pose, kCam, 256, 3);
  CHECK(again.pixels == s.pixels);
}

TEST_CASE("seeding rejects bad inputs") {
  TriangleMesh sphere = make_icosphere(1);
  CHECK_THROWS_AS(seed_correspondences(sphere, Pose(Rotation::identity(), Vec3(0, 0, -1)), kCam), Error);
  CHECK_THROWS_AS(seed_correspondences(sphere, Pose(Rotation::identity(), Vec3(0, 0, 3)), kCam, 4), Error);
}

TEST_CASE("static object gives a constant trajectory") {
  Rng rng(72);
  const std::vector<Pose> poses(10, Pose(random_rotation(rng), Vec3(0.01, 0.02, 0.7)));
  const PoseTrajectory t = refine_trajectory(project_all(cloud(rng, 80), poses), kCam);
  REQUIRE(t.frames.size() == 10);
  for (const auto& f : t.frames) {
    CHECK(f.status == FrameStatus::Solved);
    CHECK(test::pose_gap(f.pose, poses[0]) < 1e-6);
  }
}

TEST_CASE("30 percent occlusion with noise stays under two degrees") {
  Rng rng(73);
  const auto poses = moving_poses(20);
  CorrespondenceSet c = project_all(cloud(rng, 200), poses);
  for (auto& f : c.frames)
    for (std::size_t i = 0; i < f.points.size(); ++i) {
      f.points[i] += Vec2(rng.normal(0, 1), rng.normal(0, 1));
      if (rng.uniform() < 0.3) f.visible[i] = 0;
    }
  const PoseTrajectory t = refine_trajectory(c, kCam);
  for (std::size_t f = 0; f < poses.size(); ++f)
    CHECK(angular_distance(t.frames[f].pose.rotation, poses[f].rotation) < 2 * kDeg);
}

TEST_CASE("fully occluded frames are interpolated on the geodesic") {
  Rng rng(74);
  const auto poses = moving_poses(7);
  CorrespondenceSet c = project_all(cloud(rng, 60), poses);
  std::fill(c.frames[3].visible.begin(), c.frames[3].visible.end(), 0);
  std::fill(c.frames[0].visible.begin(), c.frames[0].visible.end(), 0);
  const PoseTrajectory t = refine_trajectory(c, kCam);
  CHECK(t.frames[3].status == FrameStatus::Interpolated);
  CHECK(test::pose_gap(t.frames[3].pose, interpolate(t.frames[2].pose, t.frames[4].pose, 0.5)) < 1e-12);
  CHECK(t.frames[0].status == FrameStatus::Interpolated);
  CHECK(test::pose_gap(t.frames[0].pose, t.frames[1].pose) < 1e-12);
}

TEST_CASE("uneven frame spacing weights the interpolation") {
  Rng rng(75);
  const auto poses = moving_poses(3);
  CorrespondenceSet c = project_all(cloud(rng, 40), poses);
  c.frames[0].index = 0;
  c.frames[1].index = 1;
  c.frames[2].index = 4;
  std::fill(c.frames[1].visible.begin(), c.frames[1].visible.end(), 0);
  const PoseTrajectory t = refine_trajectory(c, kCam);
  CHECK(test::pose_gap(t.frames[1].pose, interpolate(t.frames[0].pose, t.frames[2].pose, 0.25)) < 1e-12);
}

TEST_CASE("no solvable frame is a numerical error") {
  Rng rng(76);
  CorrespondenceSet c = project_all(cloud(rng, 20), moving_poses(3));
  for (auto& f : c.frames) std::fill(f.visible.begin(), f.visible.end(), 0);
  CHECK_THROWS_AS(refine_trajectory(c, kCam), Error);
}

TEST_CASE("mismatched tracks are data errors") {
  Rng rng(77);
  CorrespondenceSet c = project_all(cloud(rng, 20), moving_poses(3));
  c.frames[1].points.pop_back();
  CHECK_THROWS_AS(refine_trajectory(c, kCam), Error);
  c = project_all(cloud(rng, 20), moving_poses(3));
  c.frames[2].index = 1;
  CHECK_THROWS_AS(refine_trajectory(c, kCam), Error);
}

TEST_CASE("result does not depend on the job count") {
  Rng rng(78);
  const auto poses = moving_poses(12);
  CorrespondenceSet c = project_all(cloud(rng, 100), poses);
  for (auto& f : c.frames)
    for (std::size_t i = 0; i < 25; ++i) f.points[i] = Vec2(rng.uniform(0, 640), rng.uniform(0, 480));
  TrackOptions one, four;
  four.jobs = 4;
  const PoseTrajectory a = refine_trajectory(c, kCam, one);
  const PoseTrajectory b = refine_trajectory(c, kCam, four);
  CHECK(canonical_dump(trajectory_to_json(a)) == canonical_dump(trajectory_to_json(b)));
}

TEST_CASE("track, trajectory and seed files round trip") {
  Rng rng(79);
  const CorrespondenceSet c = project_all(cloud(rng, 5), moving_poses(2));
  const auto tracks = tracks_from_json(tracks_to_json(c.frames));
  REQUIRE(tracks.size() == 2);
  CHECK(tracks[1].index == 1);
  CHECK(tracks[1].points[3].isApprox(c.frames[1].points[3], 1e-12));
  CHECK(tracks[1].visible == c.frames[1].visible);

  const PoseTrajectory t = refine_trajectory(project_all(cloud(rng, 30), moving_poses(3)), kCam);
  const PoseTrajectory u = trajectory_from_json(trajectory_to_json(t));
  REQUIRE(u.frames.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(u.frames[i].status == t.frames[i].status);
    CHECK(test::pose_gap(u.frames[i].pose, t.frames[i].pose) < 1e-12);
  }

  Seeds s;
  s.points3d = {Vec3(0.1, 0.2, 0.3)};
  s.pixels = {Vec2(4, 5)};
  const Seeds r = seeds_from_json(seeds_to_json(s));
  CHECK(r.points3d[0].isApprox(s.points3d[0]));
  CHECK(r.pixels[0].isApprox(s.pixels[0]));
  CHECK(parse_frame_status(to_string(FrameStatus::Interpolated)) == FrameStatus::Interpolated);
  CHECK_THROWS_AS(parse_frame_status("lost"), Error);
}

}
