#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "p6d/geometry.hpp"
#include "p6d/io.hpp"
#include "p6d/mesh.hpp"
#include "p6d/pnp.hpp"
#include "p6d/pose_align.hpp"

namespace p6d {

/// 2D positions of every tracked point in one frame.
struct TrackFrame {
  int index = 0;
  std::vector<Vec2> points;
  std::vector<std::uint8_t> visible;
};

/// Model-frame points and their image tracks.
struct CorrespondenceSet {
  std::vector<Vec3> points3d;  // metric model frame
  std::vector<TrackFrame> frames;
};

void validate(const CorrespondenceSet& corr);

enum class FrameStatus { Solved, Interpolated, Missing };

std::string to_string(FrameStatus s);
FrameStatus parse_frame_status(const std::string& s);

struct TrajectoryFrame {
  int index = 0;
  Pose pose;
  FrameStatus status = FrameStatus::Missing;
  double rms = 0.0;  // reprojection RMS in pixels, solved frames only
};

struct PoseTrajectory {
  std::vector<TrajectoryFrame> frames;  // strictly increasing indices
};

/// Frame with the highest alignment score; ties go to the earliest frame.
int select_init_frame(std::span<const AlignmentResult> results);

struct Seeds {
  std::vector<Vec3> points3d;  // metric model frame
  std::vector<Vec2> pixels;
};

/// Area-weighted samples on the camera-facing, unoccluded part of the posed
/// mesh, kept when they project inside the image.
Seeds seed_correspondences(const TriangleMesh& mesh, const Pose& pose, const CameraIntrinsics& k,
                           std::size_t n = 256, std::uint64_t seed = 0);

struct TrackOptions {
  PnPOptions pnp{.ransac = true};
  double max_rms_px = 8.0;
  std::size_t min_visible = 4;
  unsigned jobs = 1;
};

/// Per-frame PnP. Frames that cannot be solved are filled along the SE(3)
/// geodesic between the nearest solved neighbours; leading and trailing
/// gaps hold the nearest solved pose. The RANSAC seed of frame f is
/// options.pnp.seed + f.
PoseTrajectory refine_trajectory(const CorrespondenceSet& corr, const CameraIntrinsics& k,
                                 const TrackOptions& options = {});

/// {"n_points", "frames": [{"idx", "pts": [[x, y, vis], ...]}]}.
std::vector<TrackFrame> tracks_from_json(const Json& j);
Json tracks_to_json(std::span<const TrackFrame> frames);

/// {"frames": [{"frame", "quat", "t", "status", "rms"}]}.
Json trajectory_to_json(const PoseTrajectory& traj);
PoseTrajectory trajectory_from_json(const Json& j);

Json seeds_to_json(const Seeds& seeds);
Seeds seeds_from_json(const Json& j);

}  // namespace p6d
