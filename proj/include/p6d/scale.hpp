#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "p6d/geometry.hpp"
#include "p6d/image.hpp"

namespace p6d {

/// Per-pixel depth; affine or metric units are both fine since only ratios
/// survive global rescaling.
struct DepthMap {
  int width = 0;
  int height = 0;
  std::vector<double> values;
  std::vector<std::uint8_t> valid;

  DepthMap() = default;
  DepthMap(int w, int h)
      : width(w), height(h), values(static_cast<std::size_t>(w) * h, 0.0),
        valid(static_cast<std::size_t>(w) * h, 0) {}

  double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
  void set(int x, int y, double d);
};

/// TNSR [h, w]; non-positive or non-finite values are invalid.
DepthMap read_depth(const std::filesystem::path& path);
void write_depth(const std::filesystem::path& path, const DepthMap& depth);

enum class ExtentMode {
  HalfExtent,  // furthest point from the center along the principal axis
  FullRange,   // max - min of the projections (largest-dimension variant)
};

ExtentMode parse_extent_mode(const std::string& s);

/// Extent of the back-projected masked cloud along its principal axis.
/// Requires at least 10 valid masked pixels.
double relative_scale(const DepthMap& depth, const BinaryMask& mask, const CameraIntrinsics& k,
                      ExtentMode mode = ExtentMode::HalfExtent);

/// Text descriptions with typical largest dimension and unit-norm embeddings.
struct ScaleDatabase {
  std::vector<std::string> texts;
  std::vector<double> scales;       // meters
  std::size_t dim = 0;
  std::vector<float> embeddings;    // size() x dim, rows unit-norm

  std::size_t size() const { return texts.size(); }
  std::span<const float> embedding(std::size_t i) const {
    return {embeddings.data() + i * dim, dim};
  }
  /// Normalizes the embedding before storing it.
  void add(const std::string& text, double scale_m, std::span<const float> embedding);
};

/// JSON lines {"text", "scale_m"} plus a sibling TNSR [n, dim] of embeddings.
ScaleDatabase load_scale_database(const std::filesystem::path& jsonl,
                                  const std::filesystem::path& embeddings);
void save_scale_database(const ScaleDatabase& db, const std::filesystem::path& jsonl,
                         const std::filesystem::path& embeddings);

/// Lower median of the scales of the k entries with the largest dot product.
double lookup_metric_scale(std::span<const float> embedding, const ScaleDatabase& db,
                           std::size_t k_neighbors = 5);

struct ScaleObservation {
  double relative = 0.0;               // r_i
  std::optional<double> metric;        // m_i
};

struct GlobalScale {
  double rho = 0.0;
  std::vector<double> scales;          // s_i = r_i * rho
};

/// rho = median of m_i / r_i over objects with both values.
GlobalScale global_rescale(std::span<const ScaleObservation> observations);

struct ScaleEstimate {
  std::string object_id;
  double relative = 0.0;
  std::optional<double> metric;
  double fused = 0.0;
  std::optional<double> ratio;         // m_i / r_i
};

double median(std::vector<double> values);
double lower_median(std::vector<double> values);

}  // namespace p6d
