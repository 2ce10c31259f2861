#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "p6d/geometry.hpp"

namespace p6d {

/// rows x cols grid of dim-channel patch tokens with a per-patch foreground flag.
struct PatchGrid {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t dim = 0;
  std::vector<float> data;                // rows * cols * dim, row-major
  std::vector<std::uint8_t> foreground;   // rows * cols

  PatchGrid() = default;
  PatchGrid(std::size_t rows, std::size_t cols, std::size_t dim);

  std::size_t patch_count() const { return rows * cols; }
  std::size_t foreground_count() const;
  std::span<const float> patch(std::size_t k) const {
    return {data.data() + k * dim, dim};
  }
  std::span<float> patch(std::size_t k) { return {data.data() + k * dim, dim}; }
};

/// Shape and mask consistency.
void validate(const PatchGrid& grid);

/// Axis-aligned extents of the model under a view rotation, camera frame,
/// in the model's native units.
struct Extents {
  double width = 0.0;   // o_w
  double height = 0.0;  // o_h
  double depth = 0.0;   // o_d
};

struct ViewRecord {
  Rotation rotation;
  PatchGrid grid;
  std::vector<float> cls_token;
  Extents extents;
};

struct ObjectEntry {
  std::string object_id;
  std::vector<ViewRecord> views;
  std::vector<float> ffa_descriptor;
  std::vector<float> cls_descriptor;
  std::string mesh_ref;
  double native_scale = 1.0;           // meters per model unit
  bool native_scale_trusted = false;

  /// Largest extent over all views; approximates the model's largest
  /// dimension in native units.
  double characteristic_size() const;
};

enum class DescriptorMode { Ffa, Cls };

DescriptorMode parse_descriptor_mode(const std::string& s);
std::string to_string(DescriptorMode mode);

/// Per-view mean of foreground tokens, averaged over views, L2-normalized.
Eigen::VectorXd ffa_aggregate(std::span<const PatchGrid> views);
/// Mean of per-view class tokens, L2-normalized.
Eigen::VectorXd cls_aggregate(std::span<const std::vector<float>> tokens);

/// Fills both descriptors from the views.
void compute_descriptors(ObjectEntry& entry);

/// Flat, row-major table of unit-norm descriptors sorted by object id.
class DescriptorIndex {
 public:
  static constexpr std::uint32_t kVersion = 1;

  DescriptorIndex() = default;
  explicit DescriptorIndex(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }
  const std::vector<std::string>& ids() const { return ids_; }
  std::span<const float> row(std::size_t i) const {
    return {rows_.data() + i * dim_, dim_};
  }

  /// Appends a row; the descriptor is normalized on the way in.
  void add(const std::string& id, std::span<const float> descriptor);
  /// Stable sort of rows by id.
  void sort_by_id();

  /// Binary layout, little-endian:
  ///   "P6DX" | u32 version | u32 dim | u64 count |
  ///   count x (u32 byte length | UTF-8 id) | zero padding to 4 bytes |
  ///   count x dim float32
  void save(const std::filesystem::path& path) const;
  static DescriptorIndex load(const std::filesystem::path& path);

 private:
  std::size_t dim_ = 0;
  std::vector<std::string> ids_;
  std::vector<float> rows_;
};

DescriptorIndex build_index(std::span<const ObjectEntry> entries, DescriptorMode mode);

struct RetrievalHit {
  std::string object_id;
  double score = 0.0;
};

/// Top-k rows by dot product with the normalized query; ties go to the
/// smaller object id.
std::vector<RetrievalHit> retrieve(std::span<const float> query, const DescriptorIndex& index,
                                   std::size_t k);
std::vector<RetrievalHit> retrieve(const Eigen::VectorXd& query, const DescriptorIndex& index,
                                   std::size_t k);

/// Object bundle directory: views.tnsr [M,rows,cols,dim], fg_masks.tnsr
/// [M,rows,cols], cls.tnsr [M,dim], rotations.json, extents.json and an
/// optional object.json with {object_id, mesh, native_scale,
/// native_scale_trusted}. The directory name is the default object id.
ObjectEntry load_object_bundle(const std::filesystem::path& dir);
void save_object_bundle(const ObjectEntry& entry, const std::filesystem::path& dir);

std::vector<float> to_float(const Eigen::VectorXd& v);

}  // namespace p6d
