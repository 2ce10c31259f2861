#include "p6d/pnp.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include "p6d/error.hpp"
#include "p6d/random.hpp"

namespace p6d {

namespace {

struct ControlFrame {
  int count = 4;                             // 3 for planar sets
  double flatness = 0.0;                     // smallest over largest variance
  std::array<Vec3, 4> world;
  std::vector<std::array<double, 4>> alphas;  // barycentric weights per point
};

ControlFrame control_frame(std::span<const Vec3> pts, bool planar = false) {
  const auto n = static_cast<double>(pts.size());
  Vec3 c0 = Vec3::Zero();
  for (const auto& p : pts) c0 += p;
  c0 /= n;
  Mat3 cov = Mat3::Zero();
  for (const auto& p : pts) cov += (p - c0) * (p - c0).transpose();
  cov /= n;
  const Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
  const Vec3 lambda = es.eigenvalues().cwiseMax(0.0);  // ascending
  const double spread = std::sqrt(lambda[2]);
  if (!(spread > 1e-12 * std::max(1.0, c0.norm())) || lambda[1] < 1e-12 * lambda[2])
    throw_numerical("degenerate configuration");

  ControlFrame cf;
  cf.flatness = lambda[0] / lambda[2];
  cf.count = planar || cf.flatness < 1e-10 ? 3 : 4;
  cf.world[0] = c0;
  std::array<Vec3, 3> axes;
  std::array<double, 3> len;
  for (int k = 0; k < cf.count - 1; ++k) {
    axes[k] = es.eigenvectors().col(2 - k);
    len[k] = std::sqrt(lambda[2 - k]);
    cf.world[k + 1] = c0 + len[k] * axes[k];
  }
  cf.alphas.reserve(pts.size());
  for (const auto& p : pts) {
    std::array<double, 4> a{0, 0, 0, 0};
    double rest = 1.0;
    for (int k = 0; k < cf.count - 1; ++k) {
      a[k + 1] = axes[k].dot(p - c0) / len[k];
      rest -= a[k + 1];
    }
    a[0] = rest;
    cf.alphas.push_back(a);
  }
  return cf;
}

Pose absolute_orientation(std::span<const Vec3> world, const std::vector<Vec3>& camera) {
  Eigen::Matrix3Xd src(3, static_cast<Eigen::Index>(world.size()));
  Eigen::Matrix3Xd dst(3, static_cast<Eigen::Index>(world.size()));
  for (std::size_t i = 0; i < world.size(); ++i) {
    src.col(static_cast<Eigen::Index>(i)) = world[i];
    dst.col(static_cast<Eigen::Index>(i)) = camera[i];
  }
  const Mat4 t = Eigen::umeyama(src, dst, false);
  return Pose(t);
}

// Distances between camera-frame control points must match the world ones.
std::vector<Eigen::VectorXd> solve_betas(const std::vector<Eigen::VectorXd>& kernel, int n_kernel,
                            const ControlFrame& cf) {
  std::vector<std::pair<int, int>> pairs;
  for (int a = 0; a < cf.count; ++a)
    for (int b = a + 1; b < cf.count; ++b) pairs.emplace_back(a, b);
  const auto np = static_cast<Eigen::Index>(pairs.size());

  // diff[k][p] = V_k[a] - V_k[b]
  std::vector<std::vector<Vec3>> diff(static_cast<std::size_t>(n_kernel));
  Eigen::VectorXd rho(np);
  for (Eigen::Index p = 0; p < np; ++p) {
    const auto [a, b] = pairs[static_cast<std::size_t>(p)];
    rho[p] = (cf.world[a] - cf.world[b]).squaredNorm();
    for (int k = 0; k < n_kernel; ++k)
      diff[k].push_back(kernel[k].segment<3>(3 * a) - kernel[k].segment<3>(3 * b));
  }

  // Gauss-Newton on the original quadratic constraints. Returns the
  // refined betas and the squared constraint residual.
  const auto gauss_newton = [&](Eigen::VectorXd beta) {
    double cost = 0.0;
    for (int it = 0; it < 30; ++it) {
      Eigen::MatrixXd j(np, n_kernel);
      Eigen::VectorXd r(np);
      for (Eigen::Index p = 0; p < np; ++p) {
        Vec3 s = Vec3::Zero();
        for (int k = 0; k < n_kernel; ++k) s += beta[k] * diff[k][static_cast<std::size_t>(p)];
        r[p] = s.squaredNorm() - rho[p];
        for (int k = 0; k < n_kernel; ++k) j(p, k) = 2.0 * s.dot(diff[k][static_cast<std::size_t>(p)]);
      }
      cost = r.squaredNorm();
      const Eigen::VectorXd step = j.completeOrthogonalDecomposition().solve(-r);
      beta += step;
      if (step.norm() < 1e-14 * (1.0 + beta.norm())) break;
    }
    return std::make_pair(beta, cost);
  };

  Eigen::VectorXd beta(n_kernel);
  std::vector<std::pair<int, int>> prods;
  for (int k = 0; k < n_kernel; ++k)
    for (int l = k; l < n_kernel; ++l) prods.emplace_back(k, l);
  if (static_cast<Eigen::Index>(prods.size()) > np) {
    // Too few constraints to linearize; start from each smaller kernel's
    // solutions. Mirrored control points also meet the constraints, so every
    // candidate is kept for the reprojection check.
    std::vector<Eigen::VectorXd> out;
    for (int m = 1; m < n_kernel; ++m)
      for (const Eigen::VectorXd& sub : solve_betas(kernel, m, cf))
        // Sign patterns of the trailing coefficients.
        for (int flips = 0; flips < (1 << (m - 1)); ++flips) {
          Eigen::VectorXd init = Eigen::VectorXd::Zero(n_kernel);
          init.head(m) = sub;
          for (int k = 1; k < m; ++k)
            if (flips & (1 << (k - 1))) init[k] = -init[k];
          out.push_back(gauss_newton(init).first);
        }
    return out;
  }
  {
    // Linearize over products beta_k * beta_l, k <= l.
    Eigen::MatrixXd lmat(np, static_cast<Eigen::Index>(prods.size()));
    for (Eigen::Index p = 0; p < np; ++p)
      for (std::size_t u = 0; u < prods.size(); ++u) {
        const auto [k, l] = prods[u];
        const double d = diff[k][static_cast<std::size_t>(p)].dot(diff[l][static_cast<std::size_t>(p)]);
        lmat(p, static_cast<Eigen::Index>(u)) = k == l ? d : 2.0 * d;
      }
    const Eigen::VectorXd prod = lmat.completeOrthogonalDecomposition().solve(rho);

    auto prod_at = [&](int k, int l) {
      for (std::size_t u = 0; u < prods.size(); ++u)
        if (prods[u] == std::make_pair(k, l)) return prod[static_cast<Eigen::Index>(u)];
      return 0.0;
    };
    beta[0] = std::sqrt(std::abs(prod_at(0, 0)));
    for (int k = 1; k < n_kernel; ++k) {
      const double mag = std::sqrt(std::abs(prod_at(k, k)));
      beta[k] = prod_at(0, k) < 0.0 ? -mag : mag;
    }
  }

  return {gauss_newton(beta).first};
}

}  // namespace

double reprojection_rms(const Pose& pose, std::span<const Vec3> points3d,
                        std::span<const Vec2> points2d, const CameraIntrinsics& k) {
  if (points3d.empty()) return 0.0;
  const Mat3 r = pose.rotation.matrix();
  double sum = 0.0;
  for (std::size_t i = 0; i < points3d.size(); ++i) {
    const Vec3 x = r * points3d[i] + pose.translation;
    if (!(x.z() > 0.0)) return std::numeric_limits<double>::infinity();
    const Vec2 u(k.f * x.x() / x.z() + k.cx, k.f * x.y() / x.z() + k.cy);
    sum += (u - points2d[i]).squaredNorm();
  }
  return std::sqrt(sum / static_cast<double>(points3d.size()));
}

namespace {

void add_candidates(const ControlFrame& cf, std::span<const Vec3> points3d,
                    std::span<const Vec2> points2d, const CameraIntrinsics& k,
                    std::vector<std::pair<double, Pose>>& out);

// Every EPnP hypothesis with its reprojection RMS, best first.
std::vector<std::pair<double, Pose>> epnp_candidates(std::span<const Vec3> points3d,
                                                     std::span<const Vec2> points2d,
                                                     const CameraIntrinsics& k) {
  if (points3d.size() != points2d.size()) throw_data("3D and 2D point counts differ");
  if (points3d.size() < 4) throw_data("PnP needs at least 4 correspondences");
  validate(k);
  std::vector<std::pair<double, Pose>> out;
  const ControlFrame cf = control_frame(points3d);
  add_candidates(cf, points3d, points2d, k, out);
  // Nearly flat sets are ill-conditioned with four control points.
  if (cf.count == 4 && cf.flatness < 1e-2)
    add_candidates(control_frame(points3d, true), points3d, points2d, k, out);
  if (out.empty()) throw_numerical("degenerate configuration");
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  return out;
}

void add_candidates(const ControlFrame& cf, std::span<const Vec3> points3d,
                    std::span<const Vec2> points2d, const CameraIntrinsics& k,
                    std::vector<std::pair<double, Pose>>& out) {
  const int nc = cf.count;
  const auto n = static_cast<Eigen::Index>(points3d.size());

  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(2 * n, 3 * nc);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& a = cf.alphas[static_cast<std::size_t>(i)];
    const Vec2& u = points2d[static_cast<std::size_t>(i)];
    for (int j = 0; j < nc; ++j) {
      m(2 * i, 3 * j) = a[j] * k.f;
      m(2 * i, 3 * j + 2) = a[j] * (k.cx - u.x());
      m(2 * i + 1, 3 * j + 1) = a[j] * k.f;
      m(2 * i + 1, 3 * j + 2) = a[j] * (k.cy - u.y());
    }
  }
  const Eigen::MatrixXd mtm = m.transpose() * m;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(mtm);
  std::vector<Eigen::VectorXd> kernel;
  for (int c = 0; c < 4; ++c) kernel.push_back(es.eigenvectors().col(c));

  const int max_kernel = nc == 4 ? 4 : 2;
  for (int nk = 1; nk <= max_kernel; ++nk) {
    for (const Eigen::VectorXd& beta : solve_betas(kernel, nk, cf)) {
      Eigen::VectorXd x = Eigen::VectorXd::Zero(3 * nc);
      for (int c = 0; c < nk; ++c) x += beta[c] * kernel[c];

      std::vector<Vec3> cam(points3d.size());
      double mean_z = 0.0;
      for (std::size_t i = 0; i < points3d.size(); ++i) {
        Vec3 p = Vec3::Zero();
        for (int j = 0; j < nc; ++j) p += cf.alphas[i][j] * x.segment<3>(3 * j);
        cam[i] = p;
        mean_z += p.z();
      }
      if (mean_z < 0.0)
        for (auto& p : cam) p = -p;
      if (!std::all_of(cam.begin(), cam.end(), [](const Vec3& p) { return p.allFinite(); })) continue;

      const Pose pose = absolute_orientation(points3d, cam);
      const double err = reprojection_rms(pose, points3d, points2d, k);
      if (std::isfinite(err)) out.emplace_back(err, pose);

      // Depth-reversed twin: reflecting depths about their mean while keeping
      // every ray fixed gives the other weak-perspective interpretation.
      const double zbar = mean_z < 0.0 ? -mean_z / static_cast<double>(cam.size())
                                       : mean_z / static_cast<double>(cam.size());
      std::vector<Vec3> twin(cam.size());
      bool valid = true;
      for (std::size_t i = 0; i < cam.size(); ++i) {
        const double z = 2.0 * zbar - cam[i].z();
        valid = valid && z > 0.0 && cam[i].z() > 0.0;
        twin[i] = valid ? Vec3(cam[i] * (z / cam[i].z())) : Vec3::Zero();
      }
      if (valid) {
        const Pose flipped = absolute_orientation(points3d, twin);
        const double e = reprojection_rms(flipped, points3d, points2d, k);
        if (std::isfinite(e)) out.emplace_back(e, flipped);
      }
    }
  }
}

}  // namespace

Pose epnp(std::span<const Vec3> points3d, std::span<const Vec2> points2d,
          const CameraIntrinsics& k) {
  return epnp_candidates(points3d, points2d, k).front().second;
}

Pose refine_pose(const Pose& initial, std::span<const Vec3> points3d,
                 std::span<const Vec2> points2d, const CameraIntrinsics& k, int iterations) {
  using Mat26 = Eigen::Matrix<double, 2, 6>;
  Pose pose = initial;
  auto cost_of = [&](const Pose& p) {
    const double rms = reprojection_rms(p, points3d, points2d, k);
    return rms * rms * static_cast<double>(points3d.size());
  };
  double cost = cost_of(pose);
  if (!std::isfinite(cost)) return pose;
  double lambda = 1e-4;

  for (int it = 0; it < iterations; ++it) {
    Mat6 h = Mat6::Zero();
    Vec6 g = Vec6::Zero();
    const Mat3 r = pose.rotation.matrix();
    for (std::size_t i = 0; i < points3d.size(); ++i) {
      const Vec3 x = r * points3d[i] + pose.translation;
      const double iz = 1.0 / x.z();
      const Vec2 res(k.f * x.x() * iz + k.cx - points2d[i].x(), k.f * x.y() * iz + k.cy - points2d[i].y());
      Eigen::Matrix<double, 2, 3> jp;
      jp << k.f * iz, 0.0, -k.f * x.x() * iz * iz,  //
          0.0, k.f * iz, -k.f * x.y() * iz * iz;
      Mat26 j;
      j.leftCols<3>() = -jp * hat(x);
      j.rightCols<3>() = jp;
      h += j.transpose() * j;
      g += j.transpose() * res;
    }

    bool accepted = false;
    Vec6 delta = Vec6::Zero();
    while (lambda < 1e12) {
      Mat6 damped = h;
      damped.diagonal() += lambda * h.diagonal().cwiseMax(1e-12);
      delta = damped.ldlt().solve(-g);
      const Pose candidate = se3_exp(delta) * pose;
      const double c = cost_of(candidate);
      if (c < cost) {
        const double gain = cost - c;
        pose = candidate;
        cost = c;
        lambda = std::max(lambda * 0.1, 1e-12);
        accepted = true;
        if (gain < 1e-16 * (1.0 + cost)) return pose;
        break;
      }
      lambda *= 10.0;
    }
    if (!accepted || delta.norm() < 1e-14) break;
  }
  return pose;
}

namespace {

std::vector<std::uint8_t> inlier_mask(const Pose& pose, std::span<const Vec3> p3,
                                      std::span<const Vec2> p2, const CameraIntrinsics& k,
                                      double threshold, std::size_t& count, double& sq_sum) {
  std::vector<std::uint8_t> mask(p3.size(), 0);
  count = 0;
  sq_sum = 0.0;
  const Mat3 r = pose.rotation.matrix();
  const double t2 = threshold * threshold;
  for (std::size_t i = 0; i < p3.size(); ++i) {
    const Vec3 x = r * p3[i] + pose.translation;
    if (!(x.z() > 0.0)) continue;
    const Vec2 u(k.f * x.x() / x.z() + k.cx, k.f * x.y() / x.z() + k.cy);
    const double e = (u - p2[i]).squaredNorm();
    if (e < t2) {
      mask[i] = 1;
      ++count;
      sq_sum += e;
    }
  }
  return mask;
}

template <typename T>
std::vector<T> select(std::span<const T> v, const std::vector<std::uint8_t>& mask) {
  std::vector<T> out;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (mask[i]) out.push_back(v[i]);
  return out;
}

}  // namespace

PnPResult solve_pnp(std::span<const Vec3> points3d, std::span<const Vec2> points2d,
                    const CameraIntrinsics& k, const PnPOptions& options) {
  if (points3d.size() != points2d.size()) throw_data("3D and 2D point counts differ");
  if (points3d.size() < 4) throw_data("PnP needs at least 4 correspondences");

  PnPResult result;
  if (!options.ransac || points3d.size() <= options.ransac_sample_size) {
    // Few points can leave the best closed-form hypothesis in the wrong basin;
    // refine the leading ones and keep the best.
    std::vector<Pose> starts;
    for (const auto& [err, pose] : epnp_candidates(points3d, points2d, k)) {
      const bool seen = std::any_of(starts.begin(), starts.end(), [&](const Pose& p) {
        return angular_distance(p.rotation, pose.rotation) < 1e-3;
      });
      if (!seen) starts.push_back(pose);
      if (starts.size() == 8) break;
    }
    result.rms = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < starts.size(); ++c) {
      const Pose pose = refine_pose(starts[c], points3d, points2d, k, options.refine_iterations);
      const double rms = reprojection_rms(pose, points3d, points2d, k);
      if (c == 0 || rms < result.rms) {
        result.pose = pose;
        result.rms = rms;
      }
    }
    result.inliers.assign(points3d.size(), 1);
    result.inlier_count = points3d.size();
    return result;
  }

  Rng rng(options.seed);
  const std::size_t n = points3d.size();
  const std::size_t s = std::max<std::size_t>(options.ransac_sample_size, 4);
  std::vector<std::size_t> idx(n);
  std::size_t best_count = 0;
  double best_sq = std::numeric_limits<double>::infinity();
  Pose best_pose;
  std::vector<Vec3> s3(s);
  std::vector<Vec2> s2(s);
  for (int it = 0; it < options.ransac_iterations; ++it) {
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < s; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.index(n - i));
      std::swap(idx[i], idx[j]);
      s3[i] = points3d[idx[i]];
      s2[i] = points2d[idx[i]];
    }
    Pose hyp;
    try {
      hyp = epnp(s3, s2, k);
    } catch (const Error&) {
      continue;
    }
    std::size_t count;
    double sq;
    inlier_mask(hyp, points3d, points2d, k, options.inlier_threshold_px, count, sq);
    if (count > best_count || (count == best_count && sq < best_sq)) {
      best_count = count;
      best_sq = sq;
      best_pose = hyp;
    }
  }
  if (best_count < 4) throw_numerical("RANSAC found no consensus set");

  Pose pose = best_pose;
  std::vector<std::uint8_t> mask;
  for (int round = 0; round < 2; ++round) {
    std::size_t count;
    double sq;
    mask = inlier_mask(pose, points3d, points2d, k, options.inlier_threshold_px, count, sq);
    if (count < 4) break;
    const auto in3 = select(points3d, mask);
    const auto in2 = select(points2d, mask);
    Pose start = pose;
    try {
      const Pose fresh = epnp(in3, in2, k);
      if (reprojection_rms(fresh, in3, in2, k) < reprojection_rms(start, in3, in2, k)) start = fresh;
    } catch (const Error&) {
    }
    pose = refine_pose(start, in3, in2, k, options.refine_iterations);
  }
  std::size_t count;
  double sq;
  mask = inlier_mask(pose, points3d, points2d, k, options.inlier_threshold_px, count, sq);
  result.pose = pose;
  result.inliers = mask;
  result.inlier_count = count;
  result.rms = count > 0 ? std::sqrt(sq / static_cast<double>(count))
                         : std::numeric_limits<double>::infinity();
  return result;
}

}  // namespace p6d
