#include "p6d/track.hpp"

#include <algorithm>
#include <cmath>

#include "p6d/error.hpp"
#include "p6d/parallel.hpp"
#include "p6d/raster.hpp"

namespace p6d {

void validate(const CorrespondenceSet& corr) {
  for (const auto& f : corr.frames) {
    if (f.points.size() != corr.points3d.size() || f.visible.size() != corr.points3d.size())
      throw_data("frame " + std::to_string(f.index) + " has " + std::to_string(f.points.size()) +
                 " tracks for " + std::to_string(corr.points3d.size()) + " model points");
  }
  for (std::size_t i = 1; i < corr.frames.size(); ++i)
    if (corr.frames[i].index <= corr.frames[i - 1].index)
      throw_data("track frame indices must be strictly increasing");
}

std::string to_string(FrameStatus s) {
  switch (s) {
    case FrameStatus::Solved: return "solved";
    case FrameStatus::Interpolated: return "interpolated";
    case FrameStatus::Missing: return "missing";
  }
  return "missing";
}

FrameStatus parse_frame_status(const std::string& s) {
  if (s == "solved") return FrameStatus::Solved;
  if (s == "interpolated") return FrameStatus::Interpolated;
  if (s == "missing") return FrameStatus::Missing;
  throw_data("unknown frame status '" + s + "'");
}

int select_init_frame(std::span<const AlignmentResult> results) {
  if (results.empty()) throw_data("no alignment results to initialize from");
  const AlignmentResult* best = &results[0];
  for (const auto& r : results)
    if (r.score > best->score || (r.score == best->score && r.frame_index < best->frame_index))
      best = &r;
  return best->frame_index;
}

Seeds seed_correspondences(const TriangleMesh& mesh, const Pose& pose, const CameraIntrinsics& k,
                           std::size_t n, std::uint64_t seed) {
  validate(mesh);
  validate(k);
  if (n < 8) throw_usage("seed count must be at least 8");
  if (!(pose.translation.z() > 0.0)) throw_data("object pose is behind the camera");

  TriangleMesh facing = mesh;
  facing.triangles.clear();
  const Mat3 r = pose.rotation.matrix();
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    auto c = mesh.metric_triangle(t);
    for (auto& v : c) v = r * v + pose.translation;
    if (c[0].z() <= 0.0 || c[1].z() <= 0.0 || c[2].z() <= 0.0) continue;
    const Vec3 normal = (c[1] - c[0]).cross(c[2] - c[0]);
    if (normal.dot(c[0] + c[1] + c[2]) < 0.0) facing.triangles.push_back(mesh.triangles[t]);
  }
  if (facing.triangles.empty() || surface_area(facing) <= 0.0)
    throw_numerical("insufficient visible seeds");

  const DepthRender zbuf = render_depth(mesh, pose, k);
  Seeds out;
  for (const Vec3& p : sample_mesh_surface(facing, n, seed)) {
    const Vec3 x = pose * p;
    const Vec2 u = project(x, k);
    const int px = static_cast<int>(std::floor(u.x()));
    const int py = static_cast<int>(std::floor(u.y()));
    if (px < 0 || py < 0 || px >= k.width || py >= k.height) continue;
    const double front = zbuf.depth[static_cast<std::size_t>(py) * k.width + px];
    // Allow for the pixel-center vs sample offset on slanted faces.
    if (std::isfinite(front) && x.z() > front + 0.02 * x.z()) continue;
    out.points3d.push_back(p);
    out.pixels.push_back(u);
  }
  if (out.points3d.size() < 8) throw_numerical("insufficient visible seeds");
  return out;
}

PoseTrajectory refine_trajectory(const CorrespondenceSet& corr, const CameraIntrinsics& k,
                                 const TrackOptions& options) {
  validate(corr);
  validate(k);
  const std::size_t nf = corr.frames.size();
  PoseTrajectory traj;
  traj.frames.resize(nf);

  parallel_for(nf, options.jobs, [&](std::size_t f) {
    const TrackFrame& tf = corr.frames[f];
    TrajectoryFrame& out = traj.frames[f];
    out.index = tf.index;
    std::vector<Vec3> p3;
    std::vector<Vec2> p2;
    for (std::size_t i = 0; i < tf.points.size(); ++i)
      if (tf.visible[i]) {
        p3.push_back(corr.points3d[i]);
        p2.push_back(tf.points[i]);
      }
    if (p3.size() < std::max<std::size_t>(options.min_visible, 4)) return;
    PnPOptions pnp = options.pnp;
    pnp.seed = options.pnp.seed + static_cast<std::uint64_t>(tf.index);
    try {
      const PnPResult r = solve_pnp(p3, p2, k, pnp);
      if (r.inlier_count < 4 || !(r.rms <= options.max_rms_px)) return;
      out.pose = r.pose;
      out.rms = r.rms;
      out.status = FrameStatus::Solved;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Numerical) throw;
    }
  });

  std::vector<std::size_t> solved;
  for (std::size_t f = 0; f < nf; ++f)
    if (traj.frames[f].status == FrameStatus::Solved) solved.push_back(f);
  if (solved.empty()) throw_numerical("no frame could be solved");

  std::size_t next = 0;  // position in `solved` of the first solved frame >= f
  for (std::size_t f = 0; f < nf; ++f) {
    while (next < solved.size() && solved[next] < f) ++next;
    TrajectoryFrame& out = traj.frames[f];
    if (out.status == FrameStatus::Solved) continue;
    out.status = FrameStatus::Interpolated;
    out.rms = 0.0;
    if (next == 0) {
      out.pose = traj.frames[solved.front()].pose;
    } else if (next == solved.size()) {
      out.pose = traj.frames[solved.back()].pose;
    } else {
      const TrajectoryFrame& a = traj.frames[solved[next - 1]];
      const TrajectoryFrame& b = traj.frames[solved[next]];
      const double alpha = static_cast<double>(out.index - a.index) / (b.index - a.index);
      out.pose = interpolate(a.pose, b.pose, alpha);
    }
  }
  return traj;
}

std::vector<TrackFrame> tracks_from_json(const Json& j) {
  try {
    const auto n = j.at("n_points").get<std::size_t>();
    std::vector<TrackFrame> frames;
    for (const auto& jf : j.at("frames")) {
      TrackFrame f;
      f.index = jf.at("idx").get<int>();
      const auto& pts = jf.at("pts");
      if (pts.size() != n)
        throw_data("track frame " + std::to_string(f.index) + " has " + std::to_string(pts.size()) +
                   " points, expected " + std::to_string(n));
      for (const auto& p : pts) {
        if (p.size() != 3) throw_data("track points must be [x, y, vis]");
        f.points.emplace_back(p[0].get<double>(), p[1].get<double>());
        f.visible.push_back(p[2].get<double>() > 0.5 ? 1 : 0);
      }
      frames.push_back(std::move(f));
    }
    return frames;
  } catch (const Json::exception& e) {
    throw_data(std::string("malformed track file: ") + e.what());
  }
}

Json tracks_to_json(std::span<const TrackFrame> frames) {
  Json out;
  out["n_points"] = frames.empty() ? 0 : frames.front().points.size();
  out["frames"] = Json::array();
  for (const auto& f : frames) {
    Json pts = Json::array();
    for (std::size_t i = 0; i < f.points.size(); ++i)
      pts.push_back({f.points[i].x(), f.points[i].y(), f.visible[i] ? 1 : 0});
    out["frames"].push_back({{"idx", f.index}, {"pts", pts}});
  }
  return out;
}

Json trajectory_to_json(const PoseTrajectory& traj) {
  Json frames = Json::array();
  for (const auto& f : traj.frames) {
    Json jf = pose_to_json(f.pose);
    jf["frame"] = f.index;
    jf["status"] = to_string(f.status);
    jf["rms"] = f.rms;
    frames.push_back(jf);
  }
  return {{"frames", frames}};
}

PoseTrajectory trajectory_from_json(const Json& j) {
  try {
    PoseTrajectory traj;
    for (const auto& jf : j.at("frames")) {
      TrajectoryFrame f;
      f.index = jf.at("frame").get<int>();
      f.pose = pose_from_json(jf);
      f.status = jf.contains("status") ? parse_frame_status(jf["status"].get<std::string>())
                                       : FrameStatus::Solved;
      f.rms = jf.value("rms", 0.0);
      if (!traj.frames.empty() && f.index <= traj.frames.back().index)
        throw_data("trajectory frame indices must be strictly increasing");
      traj.frames.push_back(f);
    }
    return traj;
  } catch (const Json::exception& e) {
    throw_data(std::string("malformed trajectory: ") + e.what());
  }
}

Json seeds_to_json(const Seeds& seeds) {
  Json p3 = Json::array(), p2 = Json::array();
  for (const auto& p : seeds.points3d) p3.push_back({p.x(), p.y(), p.z()});
  for (const auto& p : seeds.pixels) p2.push_back({p.x(), p.y()});
  return {{"points3d", p3}, {"pixels", p2}};
}

Seeds seeds_from_json(const Json& j) {
  try {
    Seeds s;
    for (const auto& p : j.at("points3d")) s.points3d.push_back(vec3_from_json(p));
    for (const auto& p : j.at("pixels")) s.pixels.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
    if (s.points3d.size() != s.pixels.size()) throw_data("seed points3d and pixels differ in length");
    return s;
  } catch (const Json::exception& e) {
    throw_data(std::string("malformed seeds: ") + e.what());
  }
}

}  // namespace p6d
