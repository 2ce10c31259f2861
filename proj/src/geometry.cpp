#include "p6d/geometry.hpp"

#include <cmath>
#include <numbers>

#include "p6d/error.hpp"

namespace p6d {

namespace {

constexpr double kSmallAngle = 1e-6;

bool finite(const Vec3& v) { return v.allFinite(); }

}  // namespace

Rotation::Rotation(const Eigen::Quaterniond& q) : q_(q) {
  const double n = q_.norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw_data("invalid quaternion");
  q_.coeffs() /= n;
}

Rotation::Rotation(const Mat3& m) : Rotation(Eigen::Quaterniond(m)) {}

Rotation::Rotation(double w, double x, double y, double z)
    : Rotation(Eigen::Quaterniond(w, x, y, z)) {}

Rotation Rotation::about_axis(const Vec3& axis, double angle) {
  return so3_exp(axis.normalized() * angle);
}

std::array<double, 4> Rotation::wxyz() const {
  const Rotation c = canonical();
  return {c.q_.w(), c.q_.x(), c.q_.y(), c.q_.z()};
}

Rotation Rotation::canonical() const {
  if (q_.w() < 0.0) return Rotation(Eigen::Quaterniond(-q_.coeffs()));
  return *this;
}

double angular_distance(const Rotation& a, const Rotation& b) {
  return so3_log(a.inverse() * b).norm();
}

Pose::Pose(const Mat4& m)
    : rotation(Mat3(m.topLeftCorner<3, 3>())),
      translation(m.topRightCorner<3, 1>()) {}

Pose Pose::inverse() const {
  const Rotation inv = rotation.inverse();
  return Pose(inv, -(inv * translation));
}

Pose Pose::operator*(const Pose& other) const {
  return Pose(rotation * other.rotation,
              rotation * other.translation + translation);
}

Mat4 Pose::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rotation.matrix();
  m.topRightCorner<3, 1>() = translation;
  return m;
}

Mat3 hat(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),  //
      v.z(), 0.0, -v.x(),   //
      -v.y(), v.x(), 0.0;
  return m;
}

Rotation so3_exp(const Vec3& omega) {
  const double theta = omega.norm();
  const double half = 0.5 * theta;
  // sin(theta/2)/theta, series below the threshold.
  const double k = theta < kSmallAngle
                       ? 0.5 - theta * theta / 48.0
                       : std::sin(half) / theta;
  return Rotation(std::cos(half), k * omega.x(), k * omega.y(), k * omega.z());
}

Vec3 so3_log(const Rotation& r) {
  const Eigen::Quaterniond q = r.canonical().quaternion();
  const Vec3 v(q.x(), q.y(), q.z());
  const double s = v.norm();
  if (s < kSmallAngle) {
    // atan2(s, w) ~ s / w, so angle/s ~ 2 / w.
    return (2.0 / q.w()) * v;
  }
  // atan2 stays well conditioned at w -> 0 (angle pi): the axis comes straight
  // from the imaginary part.
  const double angle = 2.0 * std::atan2(s, q.w());
  return (angle / s) * v;
}

Mat3 so3_left_jacobian(const Vec3& omega) {
  const double theta = omega.norm();
  const Mat3 w = hat(omega);
  if (theta < kSmallAngle) return Mat3::Identity() + 0.5 * w + w * w / 6.0;
  const double t2 = theta * theta;
  return Mat3::Identity() + (1.0 - std::cos(theta)) / t2 * w +
         (theta - std::sin(theta)) / (t2 * theta) * w * w;
}

Mat3 so3_left_jacobian_inverse(const Vec3& omega) {
  const double theta = omega.norm();
  const Mat3 w = hat(omega);
  if (theta < kSmallAngle) return Mat3::Identity() - 0.5 * w + w * w / 12.0;
  const double t2 = theta * theta;
  // (1 + cos)/sin written as cot(theta/2): finite at theta = pi.
  const double half = 0.5 * theta;
  const double c = 1.0 / t2 - std::cos(half) / (2.0 * theta * std::sin(half));
  return Mat3::Identity() - 0.5 * w + c * w * w;
}

Pose se3_exp(const Twist& xi) {
  const Vec3 omega = xi.head<3>();
  const Vec3 rho = xi.tail<3>();
  return Pose(so3_exp(omega), so3_left_jacobian(omega) * rho);
}

Twist se3_log(const Pose& pose) {
  const Vec3 omega = so3_log(pose.rotation);
  Twist xi;
  xi.head<3>() = omega;
  xi.tail<3>() = so3_left_jacobian_inverse(omega) * pose.translation;
  return xi;
}

Mat6 se3_left_jacobian(const Twist& xi) {
  const Vec3 phi = xi.head<3>();
  const Vec3 rho = xi.tail<3>();
  const double theta = phi.norm();
  const Mat3 p = hat(phi);
  const Mat3 r = hat(rho);

  double c1, c2, c3;
  if (theta < 1e-4) {
    const double t2 = theta * theta;
    c1 = 1.0 / 6.0 - t2 / 120.0;
    c2 = 1.0 / 24.0 - t2 / 720.0;
    c3 = 1.0 / 120.0 - t2 / 2520.0;
  } else {
    const double s = std::sin(theta);
    const double c = std::cos(theta);
    const double t2 = theta * theta;
    c1 = (theta - s) / (t2 * theta);
    c2 = (t2 + 2.0 * c - 2.0) / (2.0 * t2 * t2);
    c3 = (2.0 * theta - 3.0 * s + theta * c) / (2.0 * t2 * t2 * theta);
  }
  const Mat3 q = 0.5 * r + c1 * (p * r + r * p + p * r * p) +
                 c2 * (p * p * r + r * p * p - 3.0 * p * r * p) +
                 c3 * (p * r * p * p + p * p * r * p);

  Mat6 j = Mat6::Zero();
  const Mat3 jl = so3_left_jacobian(phi);
  j.topLeftCorner<3, 3>() = jl;
  j.bottomRightCorner<3, 3>() = jl;
  j.bottomLeftCorner<3, 3>() = q;
  return j;
}

Pose interpolate(const Pose& a, const Pose& b, double alpha) {
  return a * se3_exp(alpha * se3_log(a.inverse() * b));
}

double CameraIntrinsics::diagonal() const {
  return std::hypot(static_cast<double>(width), static_cast<double>(height));
}

Mat3 CameraIntrinsics::matrix() const {
  Mat3 k;
  k << f, 0.0, cx, 0.0, f, cy, 0.0, 0.0, 1.0;
  return k;
}

void validate(const CameraIntrinsics& k) {
  if (!(k.f > 0.0) || !std::isfinite(k.f)) throw_data("focal length must be positive");
  if (!std::isfinite(k.cx) || !std::isfinite(k.cy))
    throw_data("principal point must be finite");
  if (k.width < 0 || k.height < 0) throw_data("negative image size");
}

Vec2 project(const Vec3& point, const CameraIntrinsics& k) {
  if (!finite(point)) throw_data("non-finite point");
  if (!(point.z() > 0.0)) throw_data("point behind camera");
  return {k.f * point.x() / point.z() + k.cx, k.f * point.y() / point.z() + k.cy};
}

Vec3 backproject(const Vec2& pixel, double depth, const CameraIntrinsics& k) {
  if (!(depth > 0.0) || !std::isfinite(depth)) throw_data("depth must be positive");
  return {(pixel.x() - k.cx) * depth / k.f, (pixel.y() - k.cy) * depth / k.f, depth};
}

}  // namespace p6d
