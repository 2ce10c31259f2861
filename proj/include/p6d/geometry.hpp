#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>

namespace p6d {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

/// se(3) coordinates ordered (rotation [rad], translation [m]).
using Twist = Vec6;

/**
 * Unit quaternion rotation.
 *
 * The stored quaternion is always normalized. Construction does not flip the
 * sign; `canonical()` returns the w >= 0 representative used for files.
 */
class Rotation {
 public:
  Rotation() : q_(Eigen::Quaterniond::Identity()) {}
  explicit Rotation(const Eigen::Quaterniond& q);
  explicit Rotation(const Mat3& m);
  /// Quaternion in (w, x, y, z) order.
  Rotation(double w, double x, double y, double z);

  static Rotation identity() { return Rotation(); }
  static Rotation about_axis(const Vec3& axis, double angle);

  const Eigen::Quaterniond& quaternion() const { return q_; }
  Mat3 matrix() const { return q_.toRotationMatrix(); }
  /// (w, x, y, z) with w >= 0.
  std::array<double, 4> wxyz() const;
  Rotation canonical() const;

  Rotation inverse() const { return Rotation(q_.conjugate()); }
  Rotation operator*(const Rotation& other) const {
    return Rotation(q_ * other.q_);
  }
  Vec3 operator*(const Vec3& v) const { return q_ * v; }

 private:
  Eigen::Quaterniond q_;
};

/// Geodesic angle between two rotations, radians in [0, pi].
double angular_distance(const Rotation& a, const Rotation& b);

/// Rigid transform x -> R x + t.
struct Pose {
  Rotation rotation;
  Vec3 translation = Vec3::Zero();

  Pose() = default;
  Pose(const Rotation& r, const Vec3& t) : rotation(r), translation(t) {}
  explicit Pose(const Mat4& m);

  static Pose identity() { return Pose(); }

  Pose inverse() const;
  Pose operator*(const Pose& other) const;
  Vec3 operator*(const Vec3& p) const { return rotation * p + translation; }
  Mat4 matrix() const;
};

Mat3 hat(const Vec3& v);

Rotation so3_exp(const Vec3& omega);
/// Minimal axis-angle vector with norm in [0, pi].
Vec3 so3_log(const Rotation& r);
/// Left Jacobian of SO(3) and its inverse.
Mat3 so3_left_jacobian(const Vec3& omega);
Mat3 so3_left_jacobian_inverse(const Vec3& omega);

Pose se3_exp(const Twist& xi);
Twist se3_log(const Pose& pose);
/// Left Jacobian of SE(3) for the (rotation, translation) ordering:
/// exp(xi + d) ~= exp(J_l(xi) d) exp(xi).
Mat6 se3_left_jacobian(const Twist& xi);

/// Point on the geodesic a -> b, alpha in [0, 1]: a * exp(alpha * log(a^-1 b)).
Pose interpolate(const Pose& a, const Pose& b, double alpha);

/// Pinhole intrinsics with square pixels.
struct CameraIntrinsics {
  double f = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  double diagonal() const;
  Mat3 matrix() const;
};

/// Validates f > 0 and finite values; throws a data error otherwise.
void validate(const CameraIntrinsics& k);

/// Throws "behind camera" when z <= 0.
Vec2 project(const Vec3& point, const CameraIntrinsics& k);
/// Throws when depth <= 0.
Vec3 backproject(const Vec2& pixel, double depth, const CameraIntrinsics& k);

}  // namespace p6d
