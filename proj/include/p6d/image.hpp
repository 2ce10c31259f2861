#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "p6d/geometry.hpp"

namespace p6d {

/// Binary occupancy image, row-major. Pixel (x, y) covers [x, x+1) x [y, y+1);
/// its center is (x + 0.5, y + 0.5) in the pixel coordinates used by project().
struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  BinaryMask() = default;
  BinaryMask(int w, int h) : width(w), height(h), bits(static_cast<std::size_t>(w) * h, 0) {}

  std::uint8_t& at(int x, int y) { return bits[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x]; }
  std::size_t count() const;
  bool empty() const { return count() == 0; }
};

/// Center-based box in pixels.
struct BoundingBox {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;
};

/// Tight box around the set pixels, or nullopt for an empty mask.
std::optional<BoundingBox> mask_bbox(const BinaryMask& mask);

/// TNSR [h, w] with values > 0.5 treated as set.
BinaryMask read_mask(const std::filesystem::path& path);
void write_mask(const std::filesystem::path& path, const BinaryMask& mask);

}  // namespace p6d
