#include "p6d/so3_sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "p6d/error.hpp"

namespace p6d {

std::vector<Rotation> sample_so3(std::size_t n) {
  if (n == 0) throw_data("sample count must be positive");
  constexpr double phi = std::numbers::sqrt2;
  constexpr double psi = 1.533751168755204288118041;
  constexpr double two_pi = 2.0 * std::numbers::pi;
  std::vector<Rotation> out;
  out.reserve(n);
  const double nd = static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double s = static_cast<double>(i) + 0.5;
    const double r = std::sqrt(s / nd);
    const double big_r = std::sqrt(1.0 - s / nd);
    const double alpha = two_pi * s / phi;
    const double beta = two_pi * s / psi;
    out.emplace_back(r * std::sin(alpha), r * std::cos(alpha),
                     big_r * std::sin(beta), big_r * std::cos(beta));
  }
  return out;
}

Rotation random_rotation(Rng& rng) {
  // Normalized 4D Gaussian is uniform on S^3, hence Haar on SO(3).
  double w, x, y, z, n;
  do {
    w = rng.normal();
    x = rng.normal();
    y = rng.normal();
    z = rng.normal();
    n = std::sqrt(w * w + x * x + y * y + z * z);
  } while (n < 1e-12);
  return Rotation(w, x, y, z);
}

namespace {

// Geodesic angle from |<q1, q2>|.
double angle_from_dot(double d) {
  return 2.0 * std::acos(std::clamp(std::abs(d), 0.0, 1.0));
}

}  // namespace

So3Coverage so3_coverage(const std::vector<Rotation>& samples, std::size_t n_queries,
                         std::uint64_t seed) {
  if (samples.empty()) throw_data("empty rotation set");
  std::vector<Eigen::Vector4d> q;
  q.reserve(samples.size());
  for (const auto& s : samples) q.push_back(s.quaternion().coeffs());

  constexpr double deg = 180.0 / std::numbers::pi;
  So3Coverage cov;
  Rng rng(seed);
  for (std::size_t i = 0; i < n_queries; ++i) {
    const Eigen::Vector4d query = random_rotation(rng).quaternion().coeffs();
    double best = 0.0;
    for (const auto& s : q) best = std::max(best, std::abs(query.dot(s)));
    const double a = angle_from_dot(best) * deg;
    cov.mean_query_to_nearest += a;
    cov.max_query_to_nearest = std::max(cov.max_query_to_nearest, a);
  }
  if (n_queries > 0) cov.mean_query_to_nearest /= static_cast<double>(n_queries);

  if (q.size() > 1) {
    for (std::size_t i = 0; i < q.size(); ++i) {
      double best = 0.0;
      for (std::size_t j = 0; j < q.size(); ++j)
        if (j != i) best = std::max(best, std::abs(q[i].dot(q[j])));
      cov.mean_sample_spacing += angle_from_dot(best) * deg;
    }
    cov.mean_sample_spacing /= static_cast<double>(q.size());
  }
  return cov;
}

}  // namespace p6d
