#pragma once

#include <optional>
#include <string>
#include <vector>

#include "p6d/descriptor.hpp"
#include "p6d/geometry.hpp"
#include "p6d/image.hpp"

namespace p6d {

/// One detected object instance in one frame.
struct Proposal {
  BoundingBox bbox;
  std::optional<BinaryMask> mask;
  PatchGrid query_grid;
  std::vector<float> clip_embedding;
  int frame_index = 0;
  int instance = 0;
};

struct RotationMatch {
  Rotation rotation;
  std::size_t view_index = 0;
  double score = 0.0;
};

struct AlignmentResult {
  Pose pose;
  std::size_t view_index = 0;
  double score = 0.0;
  std::string object_id;
  int frame_index = 0;
};

/// Per-patch L2 normalization with background patches zeroed.
PatchGrid normalize_patches(const PatchGrid& grid);

/// Mean over the query's foreground patches of the cosine between
/// corresponding query and template patches. Template background counts as 0.
double patch_similarity(const PatchGrid& query, const PatchGrid& tmpl);

/// Best-scoring template view; ties go to the lowest view index.
RotationMatch estimate_rotation(const PatchGrid& query, const ObjectEntry& entry);

/// Depth from the mean of the width and height ratios, x/y from the box
/// center. `extents` are metric.
Vec3 estimate_translation(const BoundingBox& bbox, const Extents& extents,
                          const CameraIntrinsics& k);

/// f = sqrt(w^2 + h^2) and the image center.
CameraIntrinsics default_intrinsics(int width, int height);

/// `object_size` is the object's largest dimension in meters; the winning
/// view's extents are rescaled by object_size / entry.characteristic_size().
AlignmentResult estimate_pose(const Proposal& proposal, const ObjectEntry& entry,
                              const CameraIntrinsics& k, double object_size);

/// Square crop around a box, padded by `padding` times the longer side on
/// each side. Returned as a center-based box with w == h.
BoundingBox query_crop(const BoundingBox& bbox, double padding = 0.1);

/// Marks a patch as foreground when at least `min_coverage` of its area
/// (sampled at pixel centers) lies on the mask.
std::vector<std::uint8_t> patch_foreground(const BinaryMask& mask, const BoundingBox& crop,
                                           std::size_t rows, std::size_t cols,
                                           double min_coverage = 0.5);

}  // namespace p6d
