#include "p6d/image.hpp"

#include <algorithm>

#include "p6d/error.hpp"
#include "p6d/io.hpp"

namespace p6d {

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count_if(bits.begin(), bits.end(),
                                                [](std::uint8_t b) { return b != 0; }));
}

std::optional<BoundingBox> mask_bbox(const BinaryMask& mask) {
  int x0 = mask.width, y0 = mask.height, x1 = -1, y1 = -1;
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x)
      if (mask.at(x, y)) {
        x0 = std::min(x0, x);
        x1 = std::max(x1, x);
        y0 = std::min(y0, y);
        y1 = std::max(y1, y);
      }
  if (x1 < 0) return std::nullopt;
  return BoundingBox{0.5 * (x0 + x1 + 1), 0.5 * (y0 + y1 + 1),
                     static_cast<double>(x1 - x0 + 1), static_cast<double>(y1 - y0 + 1)};
}

BinaryMask read_mask(const std::filesystem::path& path) {
  const Tensor t = read_tensor(path);
  if (t.shape.size() != 2) throw_data(path.string() + ": mask must have shape [h, w]");
  BinaryMask m(static_cast<int>(t.shape[1]), static_cast<int>(t.shape[0]));
  for (std::size_t i = 0; i < t.data.size(); ++i) m.bits[i] = t.data[i] > 0.5f ? 1 : 0;
  return m;
}

void write_mask(const std::filesystem::path& path, const BinaryMask& mask) {
  Tensor t{{static_cast<std::size_t>(mask.height), static_cast<std::size_t>(mask.width)}, {}};
  t.data.reserve(mask.bits.size());
  for (auto b : mask.bits) t.data.push_back(b ? 1.0f : 0.0f);
  write_tensor(path, t);
}

}  // namespace p6d
