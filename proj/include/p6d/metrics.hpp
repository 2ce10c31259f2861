#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "p6d/geometry.hpp"
#include "p6d/image.hpp"
#include "p6d/io.hpp"
#include "p6d/mesh.hpp"

namespace p6d {

/// 1 - IoU. Two empty masks give 1.
double cou(const BinaryMask& gt, const BinaryMask& pred);

/// Mean of the two one-sided mean nearest-neighbour distances between the
/// posed surface samples, meters. Both meshes are sampled with `seed`.
double chamfer(const TriangleMesh& mesh_gt, const Pose& pose_gt, const TriangleMesh& mesh_pred,
               const Pose& pose_pred, std::size_t n_samples = 1000, std::uint64_t seed = 0);

/// Sum of the two one-sided means of squared 2D nearest-neighbour distances
/// between projected samples, pixels^2. Samples behind the camera are dropped.
double projected_chamfer(const TriangleMesh& mesh_gt, const Pose& pose_gt,
                         const TriangleMesh& mesh_pred, const Pose& pose_pred,
                         const CameraIntrinsics& k, std::size_t n_samples = 1000,
                         std::uint64_t seed = 0);
/// Each side projected with its own camera.
double projected_chamfer(const TriangleMesh& mesh_gt, const Pose& pose_gt, const CameraIntrinsics& k_gt,
                         const TriangleMesh& mesh_pred, const Pose& pose_pred,
                         const CameraIntrinsics& k_pred, std::size_t n_samples = 1000,
                         std::uint64_t seed = 0);

/// Mean over thresholds of the fraction of errors strictly below it.
double average_recall(std::span<const double> errors, std::span<const double> thresholds);

std::vector<double> linspace(double lo, double hi, std::size_t n);

struct ArThresholds {
  std::vector<double> cou;
  std::vector<double> ch;   // meters
  std::vector<double> pch;  // pixels^2
};

/// CoU 0.05..0.5, CH 0.01..0.1 m, pCH (0.01 diag)^2..(0.1 diag)^2, ten each.
ArThresholds default_thresholds(double image_diagonal);

struct InstanceErrors {
  std::string id;
  double cou = 0.0;
  double ch = 0.0;
  double pch = 0.0;
};

struct ArSummary {
  double ar = 0.0;  // mean of the three below
  double ar_cou = 0.0;
  double ar_ch = 0.0;
  double ar_pch = 0.0;
};

ArSummary summarize(std::span<const InstanceErrors> instances, const ArThresholds& thresholds);

/// Ten values rounded from linspace(1, floor(n/2)), duplicates removed.
std::vector<int> gamma_set(int n_frames);

/// Discretized symmetry group; always contains the identity first.
using SymmetrySet = std::vector<Rotation>;

/// `count` rotations about `axis` (model frame), evenly spaced.
SymmetrySet continuous_symmetry(const Vec3& axis, int count = 64);

/// {"axis": [...], "count": n} or {"rotations": [[w, x, y, z], ...]}; null gives {I}.
SymmetrySet symmetry_from_json(const Json& j);

/// Gamma-averaged relative-rotation velocity error, degrees per frame.
double track_rot_error(std::span<const Pose> pred, std::span<const Pose> gt, const SymmetrySet& sym);

struct OriginCorrection {
  Vec3 origin = Vec3::Zero();  // o*, predicted model frame
  bool clamped = false;
  std::vector<Vec3> translations;  // t*
};

/// Shifts the predicted model origin towards the GT origin rays; |o*| is
/// limited to scale / 2.
OriginCorrection correct_origin(std::span<const Pose> pred, std::span<const Pose> gt, double scale);

struct ProjError {
  double value = 0.0;  // percent of the image diagonal per frame
  std::size_t skipped_pairs = 0;
};

/// Gamma-averaged projected-origin velocity error. Pairs with an origin
/// behind either camera are skipped and counted.
ProjError track_proj_error(std::span<const Vec3> corrected, std::span<const Pose> gt,
                           const CameraIntrinsics& k, const CameraIntrinsics& k_gt);

/// Gamma-averaged depth velocity error normalized by the object scales.
double track_depth_error(std::span<const Vec3> corrected, std::span<const Pose> gt, double scale,
                         double scale_gt);

struct TrackingErrors {
  double e_rot = 0.0;
  double e_proj = 0.0;
  double e_depth = 0.0;
  std::size_t skipped_pairs = 0;
  OriginCorrection origin;
  std::vector<int> gamma;
};

TrackingErrors evaluate_tracking(std::span<const Pose> pred, std::span<const Pose> gt,
                                 const SymmetrySet& sym, const CameraIntrinsics& k,
                                 const CameraIntrinsics& k_gt, double scale, double scale_gt);

}  // namespace p6d
