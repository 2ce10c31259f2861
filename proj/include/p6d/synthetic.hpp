#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "p6d/descriptor.hpp"
#include "p6d/geometry.hpp"
#include "p6d/image.hpp"
#include "p6d/mesh.hpp"
#include "p6d/random.hpp"
#include "p6d/track.hpp"

namespace p6d {

/// Unit-radius icosphere; 20 * 4^subdivisions faces, outward winding.
TriangleMesh make_icosphere(int subdivisions);
/// Axis-aligned box centered at the origin.
TriangleMesh make_box(const Vec3& half_extents);
/// Capped cylinder along z.
TriangleMesh make_cylinder(double radius, double half_height, int segments = 24);
/// Vertices multiplied per axis.
TriangleMesh scaled(TriangleMesh mesh, const Vec3& factors);

/// Random Fourier features cos(W p + b) of native-unit model points; a
/// stand-in for patch tokens that is smooth over the surface.
class FeatureField {
 public:
  FeatureField(std::size_t dim, double frequency, std::uint64_t seed);

  std::size_t dim() const { return static_cast<std::size_t>(w_.rows()); }
  void accumulate(const Vec3& p, double* out) const;

 private:
  Eigen::MatrixXd w_;
  Eigen::VectorXd b_;
};

/// Continuous bounding box of the projected vertices.
BoundingBox projected_bbox(const TriangleMesh& mesh, const Pose& pose, const CameraIntrinsics& k);

/// Patch tokens of the posed mesh inside `crop`, rendered at `pixels_per_patch`
/// samples per patch side. A patch is foreground when at least half of its
/// samples hit the surface; its token is the mean field value over the hits.
PatchGrid render_patch_grid(const TriangleMesh& mesh, const Pose& pose, const CameraIntrinsics& k,
                            const BoundingBox& crop, const FeatureField& field, std::size_t rows,
                            std::size_t cols, int pixels_per_patch = 2);

/// Extents of the native-unit mesh rotated into a view frame.
Extents view_extents(const TriangleMesh& mesh, const Rotation& r);

struct TemplateOptions {
  std::size_t views = 600;
  std::size_t rows = 30;
  std::size_t cols = 30;
  int pixels_per_patch = 1;
  double padding = 0.1;
};

/// Template bundle of `mesh` over sample_so3(views) with descriptors filled.
/// Rendering uses the mesh in native units (its scale field is ignored).
ObjectEntry make_object_entry(const std::string& id, const TriangleMesh& mesh,
                              const FeatureField& field, const TemplateOptions& options = {});

/// Query grid of a posed metric mesh in a full camera: square padded crop
/// around the projected silhouette.
PatchGrid render_query(const TriangleMesh& mesh, const Pose& pose, const CameraIntrinsics& k,
                       const FeatureField& field, const TemplateOptions& options = {});

/// First intersection of the camera ray through `pixel` with the posed mesh,
/// in the metric model frame.
std::optional<Vec3> raycast(const TriangleMesh& mesh, const Pose& pose, const CameraIntrinsics& k,
                            const Vec2& pixel);

struct OracleTrackOptions {
  double occlusion = 0.0;   // per point and frame drop probability
  double noise_px = 0.0;    // Gaussian pixel noise
  std::uint64_t seed = 0;
};

/// Stand-in for an external point tracker: each seed pixel is lifted onto the
/// true surface at `init_frame` and followed through the true poses. Points
/// that leave the image, turn away or are self-occluded become invisible.
std::vector<TrackFrame> oracle_tracks(const TriangleMesh& mesh, std::span<const Pose> poses,
                                      std::span<const int> frame_indices, const CameraIntrinsics& k,
                                      std::span<const Vec2> seed_pixels, std::size_t init_frame,
                                      const OracleTrackOptions& options = {});

struct SceneOptions {
  int frames = 30;
  int width = 640;
  int height = 480;
  int keyframe_stride = 10;   // frames with depth, masks and proposals
  std::size_t feature_dim = 16;
  std::size_t clip_dim = 32;
  std::size_t distractors = 200;
  TemplateOptions templates;
  std::uint64_t seed = 7;
};

/// Writes a three-object synthetic scene with everything the pipeline
/// consumes: object bundles and meshes, descriptor index, scale database,
/// per-keyframe masks, depth and query grids, a proposals file, ground truth
/// and a pipeline config. Returns the config path.
std::filesystem::path write_scene_fixture(const std::filesystem::path& dir,
                                          const SceneOptions& options = {});

/// Reads the fixture ground truth and produces oracle tracks for the seeds of
/// one object instance.
std::vector<TrackFrame> fixture_tracks(const std::filesystem::path& gt_path, int instance,
                                       const Seeds& seeds, int init_frame,
                                       const OracleTrackOptions& options);

}  // namespace p6d
