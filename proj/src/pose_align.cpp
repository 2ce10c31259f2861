#include "p6d/pose_align.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "p6d/error.hpp"

namespace p6d {

PatchGrid normalize_patches(const PatchGrid& grid) {
  validate(grid);
  PatchGrid out = grid;
  for (std::size_t k = 0; k < out.patch_count(); ++k) {
    auto p = out.patch(k);
    if (!out.foreground[k]) {
      std::fill(p.begin(), p.end(), 0.0f);
      continue;
    }
    double n2 = 0.0;
    for (float x : p) n2 += static_cast<double>(x) * x;
    const double n = std::sqrt(n2);
    if (n > 0.0)
      for (float& x : p) x = static_cast<float>(x / n);
  }
  return out;
}

namespace {

void check_same_shape(const PatchGrid& a, const PatchGrid& b) {
  if (a.rows != b.rows || a.cols != b.cols || a.dim != b.dim)
    throw_data("query grid " + std::to_string(a.rows) + "x" + std::to_string(a.cols) + "x" +
               std::to_string(a.dim) + " does not match template grid " + std::to_string(b.rows) + "x" +
               std::to_string(b.cols) + "x" + std::to_string(b.dim));
}

// Query patches as unit double vectors (zero for background and null tokens).
struct PreparedQuery {
  std::vector<double> tokens;
  std::vector<std::size_t> active;  // foreground patch indices with non-zero norm
  std::size_t foreground = 0;
  std::size_t dim = 0;
};

PreparedQuery prepare(const PatchGrid& query) {
  validate(query);
  PreparedQuery q;
  q.dim = query.dim;
  q.tokens.assign(query.data.size(), 0.0);
  for (std::size_t k = 0; k < query.patch_count(); ++k) {
    if (!query.foreground[k]) continue;
    ++q.foreground;
    const auto p = query.patch(k);
    double n2 = 0.0;
    for (float x : p) n2 += static_cast<double>(x) * x;
    if (!(n2 > 0.0)) continue;
    const double inv = 1.0 / std::sqrt(n2);
    for (std::size_t c = 0; c < q.dim; ++c) q.tokens[k * q.dim + c] = p[c] * inv;
    q.active.push_back(k);
  }
  if (q.foreground == 0) throw_data("empty foreground");
  return q;
}

double score_against(const PreparedQuery& q, const PatchGrid& tmpl) {
  double total = 0.0;
  for (auto k : q.active) {
    if (!tmpl.foreground[k]) continue;
    const float* t = tmpl.data.data() + k * q.dim;
    const double* a = q.tokens.data() + k * q.dim;
    double d = 0.0, n2 = 0.0;
    for (std::size_t c = 0; c < q.dim; ++c) {
      d += a[c] * t[c];
      n2 += static_cast<double>(t[c]) * t[c];
    }
    if (n2 > 0.0) total += d / std::sqrt(n2);
  }
  return total / static_cast<double>(q.foreground);
}

}  // namespace

double patch_similarity(const PatchGrid& query, const PatchGrid& tmpl) {
  check_same_shape(query, tmpl);
  validate(tmpl);
  return score_against(prepare(query), tmpl);
}

RotationMatch estimate_rotation(const PatchGrid& query, const ObjectEntry& entry) {
  if (entry.views.empty()) throw_data("object '" + entry.object_id + "' has no views");
  const PreparedQuery q = prepare(query);
  RotationMatch best;
  best.score = -std::numeric_limits<double>::infinity();
  for (std::size_t v = 0; v < entry.views.size(); ++v) {
    const PatchGrid& tmpl = entry.views[v].grid;
    check_same_shape(query, tmpl);
    const double s = score_against(q, tmpl);
    if (s > best.score) {
      best.score = s;
      best.view_index = v;
    }
  }
  best.rotation = entry.views[best.view_index].rotation;
  return best;
}

Vec3 estimate_translation(const BoundingBox& bbox, const Extents& extents,
                          const CameraIntrinsics& k) {
  validate(k);
  if (!(bbox.w > 0.0) || !(bbox.h > 0.0)) throw_data("bounding box must have positive size");
  if (!(extents.width > 0.0) || !(extents.height > 0.0))
    throw_data("object extents must be positive");
  const double tz = 0.5 * (k.f * extents.width / bbox.w + k.f * extents.height / bbox.h);
  return {(bbox.cx - k.cx) * tz / k.f, (bbox.cy - k.cy) * tz / k.f, tz};
}

CameraIntrinsics default_intrinsics(int width, int height) {
  if (width <= 0 || height <= 0) throw_data("image size must be positive");
  CameraIntrinsics k;
  k.width = width;
  k.height = height;
  k.f = std::hypot(static_cast<double>(width), static_cast<double>(height));
  k.cx = 0.5 * width;
  k.cy = 0.5 * height;
  return k;
}

AlignmentResult estimate_pose(const Proposal& proposal, const ObjectEntry& entry,
                              const CameraIntrinsics& k, double object_size) {
  if (!(object_size > 0.0)) throw_data("object scale must be positive");
  const double native = entry.characteristic_size();
  if (!(native > 0.0)) throw_data("object '" + entry.object_id + "' has no view extents");

  const RotationMatch match = estimate_rotation(proposal.query_grid, entry);
  const Extents& e = entry.views[match.view_index].extents;
  const double factor = object_size / native;
  const Extents metric{e.width * factor, e.height * factor, e.depth * factor};

  AlignmentResult r;
  r.pose = Pose(match.rotation, estimate_translation(proposal.bbox, metric, k));
  r.view_index = match.view_index;
  r.score = match.score;
  r.object_id = entry.object_id;
  r.frame_index = proposal.frame_index;
  return r;
}

BoundingBox query_crop(const BoundingBox& bbox, double padding) {
  const double side = std::max(bbox.w, bbox.h) * (1.0 + 2.0 * padding);
  return {bbox.cx, bbox.cy, side, side};
}

std::vector<std::uint8_t> patch_foreground(const BinaryMask& mask, const BoundingBox& crop,
                                           std::size_t rows, std::size_t cols,
                                           double min_coverage) {
  std::vector<std::size_t> hit(rows * cols, 0), total(rows * cols, 0);
  const double x0 = crop.cx - 0.5 * crop.w;
  const double y0 = crop.cy - 0.5 * crop.h;
  for (int y = 0; y < mask.height; ++y) {
    const double v = (y + 0.5 - y0) / crop.h;
    if (v < 0.0 || v >= 1.0) continue;
    const auto r = static_cast<std::size_t>(v * static_cast<double>(rows));
    for (int x = 0; x < mask.width; ++x) {
      const double u = (x + 0.5 - x0) / crop.w;
      if (u < 0.0 || u >= 1.0) continue;
      const auto c = static_cast<std::size_t>(u * static_cast<double>(cols));
      ++total[r * cols + c];
      if (mask.at(x, y)) ++hit[r * cols + c];
    }
  }
  std::vector<std::uint8_t> out(rows * cols, 0);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = total[i] > 0 && static_cast<double>(hit[i]) >= min_coverage * static_cast<double>(total[i]);
  return out;
}

}  // namespace p6d
