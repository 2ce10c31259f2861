#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "p6d/descriptor.hpp"
#include "p6d/io.hpp"
#include "p6d/metrics.hpp"
#include "p6d/pose_align.hpp"
#include "p6d/raster.hpp"
#include "p6d/scale.hpp"
#include "p6d/track.hpp"

namespace p6d {

/// One entry of a proposals file with its resolved inputs.
struct ProposalRecord {
  Proposal proposal;
  std::optional<std::filesystem::path> depth;
};

/// Proposals file:
///   {"image": {"width", "height"}, "intrinsics"?: {...},
///    "frames"?: [{"index", "depth"?}],
///    "proposals": [{"frame", "instance", "mask"?, "bbox"?: [cx, cy, w, h],
///                   "grid", "clip"?: [...]}]}
/// Paths are relative to the proposals file. With a mask the box and the
/// patch foreground are derived from it; without one every patch is
/// foreground unless the grid file comes with "fg".
struct ProposalSet {
  CameraIntrinsics intrinsics;
  bool intrinsics_from_prior = false;
  std::vector<ProposalRecord> records;
};

ProposalSet load_proposals(const std::filesystem::path& path, double padding = 0.1);

struct AlignConfig {
  std::filesystem::path index;
  std::filesystem::path bundles;
  std::optional<std::filesystem::path> scale_db;
  std::optional<std::filesystem::path> scale_db_embeddings;
  std::size_t k_neighbors = 5;
  ExtentMode extent_mode = ExtentMode::HalfExtent;
  double constant_scale = 0.10;  // meters, used when no depth is available
  unsigned jobs = 1;
};

enum class ScaleSource {
  Depth,     // relative scale times the global ratio
  Constant,  // no depth or no metric prior anywhere; AlignConfig::constant_scale
};

std::string to_string(ScaleSource s);
ScaleSource parse_scale_source(const std::string& s);

struct AlignedProposal {
  int frame = 0;
  int instance = 0;
  std::string object_id;
  double retrieval_score = 0.0;
  AlignmentResult alignment;
  std::optional<double> relative_scale;
  std::optional<double> metric_prior;
  double scale = 0.0;  // meters, per instance
  ScaleSource scale_source = ScaleSource::Constant;
};

struct AlignOutput {
  CameraIntrinsics intrinsics;
  bool intrinsics_from_prior = false;
  std::optional<double> rho;
  std::vector<AlignedProposal> results;
};

/// Relative scales, metric priors and the global ratio. An instance's scale
/// is the median of its fused per-proposal scales. Leaves retrieval and
/// alignment fields empty.
AlignOutput estimate_scales(const ProposalSet& proposals, const AlignConfig& config);

/// estimate_scales, then retrieval, rotation and translation per proposal.
AlignOutput run_alignment(const ProposalSet& proposals, const AlignConfig& config);

Json scale_report_to_json(const AlignOutput& out);
Json align_output_to_json(const AlignOutput& out);
AlignOutput align_output_from_json(const Json& j);

/// Template-bundle mesh in native units plus the bundle's characteristic size.
struct BundleMesh {
  TriangleMesh mesh;
  double characteristic_size = 0.0;
};

BundleMesh load_bundle_mesh(const std::filesystem::path& bundles, const std::string& object_id);

/// Native mesh rescaled so that its characteristic size equals `size` meters.
TriangleMesh metric_mesh(const BundleMesh& bundle, double size);

struct InstanceSeeds {
  int instance = 0;
  std::string object_id;
  int init_frame = 0;
  double scale = 0.0;
  Pose init_pose;
  Seeds seeds;
};

/// Picks each instance's best frame and seeds it from the retrieved mesh.
std::vector<InstanceSeeds> seed_instances(const AlignOutput& aligned,
                                          const std::filesystem::path& bundles, std::size_t n,
                                          std::uint64_t seed);

Json seeds_file_to_json(const std::vector<InstanceSeeds>& seeds, const CameraIntrinsics& k);
std::vector<InstanceSeeds> seeds_file_from_json(const Json& j);

/// Ground truth as written by the fixture generator.
struct GroundTruthObject {
  int instance = 0;
  std::string object_id;
  TriangleMesh mesh;  // metric through mesh.scale
  double size = 0.0;
  SymmetrySet symmetry;
  std::map<int, Pose> poses;
};

struct GroundTruth {
  CameraIntrinsics intrinsics;
  std::vector<GroundTruthObject> objects;

  const GroundTruthObject& instance(int i) const;
};

GroundTruth load_ground_truth(const std::filesystem::path& path);

struct FrameErrors {
  int frame = 0;
  int instance = 0;
  InstanceErrors errors;
};

struct SingleFrameReport {
  ArThresholds thresholds;
  std::vector<FrameErrors> rows;
  ArSummary summary;
};

/// CoU, CH and pCH of every aligned proposal against the ground truth, with
/// the retrieved mesh at the estimated scale as the prediction.
SingleFrameReport evaluate_alignment(const AlignOutput& aligned, const GroundTruth& gt,
                                     const std::filesystem::path& bundles,
                                     std::size_t samples = 1000, std::uint64_t seed = 0,
                                     unsigned jobs = 1);

/// Tracking errors over the frames of `traj`; every frame needs a GT pose.
TrackingErrors evaluate_trajectory(const PoseTrajectory& traj, const CameraIntrinsics& k, double scale,
                                   const GroundTruthObject& gt, const CameraIntrinsics& k_gt);

Json single_frame_report_to_json(const SingleFrameReport& report);
Json tracking_errors_to_json(const TrackingErrors& e);

}  // namespace p6d
