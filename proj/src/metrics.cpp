#include "p6d/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>

#include "p6d/error.hpp"
#include "p6d/kdtree.hpp"

namespace p6d {

double cou(const BinaryMask& gt, const BinaryMask& pred) {
  if (gt.width != pred.width || gt.height != pred.height)
    throw_data("CoU masks differ in size: " + std::to_string(gt.width) + "x" +
               std::to_string(gt.height) + " vs " + std::to_string(pred.width) + "x" +
               std::to_string(pred.height));
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < gt.bits.size(); ++i) {
    inter += gt.bits[i] && pred.bits[i];
    uni += gt.bits[i] || pred.bits[i];
  }
  if (uni == 0) return 1.0;
  return 1.0 - static_cast<double>(inter) / static_cast<double>(uni);
}

namespace {

template <typename P>
double mean_of(const std::vector<double>& v, P&& f) {
  double s = 0.0;
  for (double x : v) s += f(x);
  return s / static_cast<double>(v.size());
}

std::vector<Vec2> project_visible(const std::vector<Vec3>& pts, const Pose& pose,
                                  const CameraIntrinsics& k) {
  std::vector<Vec2> out;
  out.reserve(pts.size());
  for (const Vec3& p : pts) {
    const Vec3 x = pose * p;
    if (x.z() > 0.0) out.push_back(project(x, k));
  }
  return out;
}

}  // namespace

double chamfer(const TriangleMesh& mesh_gt, const Pose& pose_gt, const TriangleMesh& mesh_pred,
               const Pose& pose_pred, std::size_t n_samples, std::uint64_t seed) {
  const auto a = transform_points(pose_gt, sample_mesh_surface(mesh_gt, n_samples, seed));
  const auto b = transform_points(pose_pred, sample_mesh_surface(mesh_pred, n_samples, seed));
  const auto id = [](double d) { return d; };
  return 0.5 * (mean_of(nearest_distances(a, b), id) + mean_of(nearest_distances(b, a), id));
}

double projected_chamfer(const TriangleMesh& mesh_gt, const Pose& pose_gt,
                         const TriangleMesh& mesh_pred, const Pose& pose_pred,
                         const CameraIntrinsics& k, std::size_t n_samples, std::uint64_t seed) {
  return projected_chamfer(mesh_gt, pose_gt, k, mesh_pred, pose_pred, k, n_samples, seed);
}

double projected_chamfer(const TriangleMesh& mesh_gt, const Pose& pose_gt, const CameraIntrinsics& k_gt,
                         const TriangleMesh& mesh_pred, const Pose& pose_pred,
                         const CameraIntrinsics& k_pred, std::size_t n_samples, std::uint64_t seed) {
  validate(k_gt);
  validate(k_pred);
  const auto a = project_visible(sample_mesh_surface(mesh_gt, n_samples, seed), pose_gt, k_gt);
  const auto b = project_visible(sample_mesh_surface(mesh_pred, n_samples, seed), pose_pred, k_pred);
  if (a.empty() || b.empty()) throw_numerical("all surface samples are behind the camera");
  const auto sq = [](double d) { return d * d; };
  return mean_of(nearest_distances(a, b), sq) + mean_of(nearest_distances(b, a), sq);
}

double average_recall(std::span<const double> errors, std::span<const double> thresholds) {
  if (errors.empty()) throw_data("average recall of an empty error list");
  if (thresholds.empty()) throw_data("average recall needs at least one threshold");
  double total = 0.0;
  for (double t : thresholds) {
    std::size_t below = 0;
    for (double e : errors) below += e < t;
    total += static_cast<double>(below) / static_cast<double>(errors.size());
  }
  return total / static_cast<double>(thresholds.size());
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = lo;
    return out;
  }
  for (std::size_t i = 0; i < n; ++i)
    out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return out;
}

ArThresholds default_thresholds(double diag) {
  return {linspace(0.05, 0.5, 10), linspace(0.01, 0.1, 10),
          linspace(std::pow(0.01 * diag, 2), std::pow(0.1 * diag, 2), 10)};
}

ArSummary summarize(std::span<const InstanceErrors> instances, const ArThresholds& t) {
  std::vector<double> c, h, p;
  for (const auto& i : instances) {
    c.push_back(i.cou);
    h.push_back(i.ch);
    p.push_back(i.pch);
  }
  ArSummary s;
  s.ar_cou = average_recall(c, t.cou);
  s.ar_ch = average_recall(h, t.ch);
  s.ar_pch = average_recall(p, t.pch);
  s.ar = (s.ar_cou + s.ar_ch + s.ar_pch) / 3.0;
  return s;
}

std::vector<int> gamma_set(int n_frames) {
  if (n_frames < 4) throw_data("tracking metrics need at least 4 frames");
  std::vector<int> out;
  for (double v : linspace(1.0, std::floor(n_frames / 2.0), 10)) {
    const int r = static_cast<int>(std::lround(v));
    if (std::find(out.begin(), out.end(), r) == out.end()) out.push_back(r);
  }
  return out;
}

SymmetrySet continuous_symmetry(const Vec3& axis, int count) {
  if (count < 1) throw_data("symmetry count must be positive");
  if (!(axis.norm() > 0.0)) throw_data("symmetry axis must be non-zero");
  SymmetrySet out;
  for (int i = 0; i < count; ++i)
    out.push_back(Rotation::about_axis(axis.normalized(), 2.0 * std::numbers::pi * i / count));
  return out;
}

SymmetrySet symmetry_from_json(const Json& j) {
  if (j.is_null()) return {Rotation::identity()};
  try {
    if (j.contains("axis")) return continuous_symmetry(vec3_from_json(j["axis"]), j.value("count", 64));
    SymmetrySet out{Rotation::identity()};
    for (const auto& q : j.at("rotations")) {
      const auto v = q.get<std::vector<double>>();
      if (v.size() != 4) throw_data("symmetry rotations must be [w, x, y, z]");
      out.emplace_back(v[0], v[1], v[2], v[3]);
    }
    return out;
  } catch (const Json::exception& e) {
    throw_data(std::string("malformed symmetry: ") + e.what());
  }
}

namespace {

void check_lengths(std::size_t a, std::size_t b) {
  if (a != b)
    throw_data("trajectory lengths differ: " + std::to_string(a) + " vs " + std::to_string(b));
  if (a < 4) throw_data("tracking metrics need at least 4 frames");
}

// (1/|G|) sum_d (1/(N-d)) sum_i e(i, i+d) / d over pairs where e is defined.
template <typename Fn>
double gamma_average(std::size_t n, Fn&& pair_error, std::size_t* skipped = nullptr) {
  const auto gamma = gamma_set(static_cast<int>(n));
  double total = 0.0;
  std::size_t used = 0;
  for (int d : gamma) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i + d < n; ++i) {
      const std::optional<double> e = pair_error(i, i + d);
      if (!e) {
        if (skipped) ++*skipped;
        continue;
      }
      sum += *e / d;
      ++count;
    }
    if (count == 0) continue;
    total += sum / static_cast<double>(count);
    ++used;
  }
  if (used == 0) throw_numerical("no valid frame pairs");
  return total / static_cast<double>(used);
}

}  // namespace

double track_rot_error(std::span<const Pose> pred, std::span<const Pose> gt, const SymmetrySet& sym) {
  check_lengths(pred.size(), gt.size());
  if (sym.empty()) throw_data("symmetry set must contain the identity");
  const double rad = gamma_average(pred.size(), [&](std::size_t i, std::size_t j) -> std::optional<double> {
    const Vec3 w = so3_log(pred[i].rotation * pred[j].rotation.inverse());
    double best = std::numeric_limits<double>::infinity();
    for (const Rotation& s : sym)
      best = std::min(best, (w - so3_log(gt[i].rotation * s * gt[j].rotation.inverse())).norm());
    return best;
  });
  return rad * 180.0 / std::numbers::pi;
}

OriginCorrection correct_origin(std::span<const Pose> pred, std::span<const Pose> gt, double scale) {
  if (pred.size() != gt.size())
    throw_data("trajectory lengths differ: " + std::to_string(pred.size()) + " vs " + std::to_string(gt.size()));
  if (pred.empty()) throw_data("empty trajectory");
  if (!(scale > 0.0)) throw_data("object scale must be positive");
  OriginCorrection out;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double ng = gt[i].translation.norm();
    if (!(ng > 0.0)) throw_data("ground-truth translation has zero norm");
    const Vec3 p = gt[i].translation / ng * pred[i].translation.norm();
    out.origin += pred[i].inverse() * p;
  }
  out.origin /= static_cast<double>(pred.size());
  const double limit = 0.5 * scale;
  if (out.origin.norm() > limit) {
    out.origin *= limit / out.origin.norm();
    out.clamped = true;
  }
  for (const Pose& p : pred) out.translations.push_back(p.translation + p.rotation * out.origin);
  return out;
}

ProjError track_proj_error(std::span<const Vec3> corrected, std::span<const Pose> gt,
                           const CameraIntrinsics& k, const CameraIntrinsics& k_gt) {
  check_lengths(corrected.size(), gt.size());
  validate(k);
  validate(k_gt);
  const double norm = 100.0 / k_gt.diagonal();
  ProjError out;
  out.value = gamma_average(
      corrected.size(),
      [&](std::size_t i, std::size_t j) -> std::optional<double> {
        if (!(corrected[i].z() > 0.0) || !(corrected[j].z() > 0.0) ||
            !(gt[i].translation.z() > 0.0) || !(gt[j].translation.z() > 0.0))
          return std::nullopt;
        const Vec2 v = project(corrected[i], k) - project(corrected[j], k);
        const Vec2 vg = project(gt[i].translation, k_gt) - project(gt[j].translation, k_gt);
        return norm * (v - vg).norm();
      },
      &out.skipped_pairs);
  return out;
}

double track_depth_error(std::span<const Vec3> corrected, std::span<const Pose> gt, double scale,
                         double scale_gt) {
  check_lengths(corrected.size(), gt.size());
  if (!(scale > 0.0) || !(scale_gt > 0.0)) throw_data("object scales must be positive");
  return gamma_average(corrected.size(), [&](std::size_t i, std::size_t j) -> std::optional<double> {
    const double d = (corrected[i].norm() - corrected[j].norm()) / scale;
    const double dg = (gt[i].translation.norm() - gt[j].translation.norm()) / scale_gt;
    return std::abs(d - dg);
  });
}

TrackingErrors evaluate_tracking(std::span<const Pose> pred, std::span<const Pose> gt,
                                 const SymmetrySet& sym, const CameraIntrinsics& k,
                                 const CameraIntrinsics& k_gt, double scale, double scale_gt) {
  check_lengths(pred.size(), gt.size());
  TrackingErrors out;
  out.gamma = gamma_set(static_cast<int>(pred.size()));
  out.e_rot = track_rot_error(pred, gt, sym);
  out.origin = correct_origin(pred, gt, scale);
  const ProjError p = track_proj_error(out.origin.translations, gt, k, k_gt);
  out.e_proj = p.value;
  out.skipped_pairs = p.skipped_pairs;
  out.e_depth = track_depth_error(out.origin.translations, gt, scale, scale_gt);
  return out;
}

}  // namespace p6d
