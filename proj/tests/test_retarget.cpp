#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>

#include "p6d/error.hpp"
#include "p6d/io.hpp"
#include "p6d/retarget.hpp"
#include "support.hpp"

using namespace p6d;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kPi = 3.141592653589793;

KinematicChain lever() {
  KinematicChain c;
  c.joints.resize(1);
  c.tool = Pose(Rotation::identity(), Vec3(1, 0, 0));
  return c;
}

Mat4 joint_matrix(const Joint& j, double q) {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = Eigen::AngleAxisd(q, j.axis).toRotationMatrix();
  return j.origin.matrix() * m;
}

Mat4 fk_oracle(const KinematicChain& c, const VectorXd& q) {
  Mat4 m = Mat4::Identity();
  for (std::size_t i = 0; i < c.dof(); ++i) m = m * joint_matrix(c.joints[i], q[static_cast<Eigen::Index>(i)]);
  return m * c.tool.matrix() * c.grasp.matrix();
}

VectorXd random_q(Rng& rng, const KinematicChain& c) {
  VectorXd q(static_cast<Eigen::Index>(c.dof()));
  for (std::size_t i = 0; i < c.dof(); ++i)
    q[static_cast<Eigen::Index>(i)] = rng.uniform(c.joints[i].lower + 0.1, c.joints[i].upper - 0.1);
  return q;
}

KinematicChain held_panda() {
  KinematicChain c = panda_chain();
  c.grasp = Pose(Rotation::about_axis(Vec3(1, 0, 0), 0.3), Vec3(0, 0.02, 0.05));
  return c;
}

// Independent damped least squares on a finite-difference Jacobian of the
// left twist error.
VectorXd dls_ik(const KinematicChain& c, const Pose& target, VectorXd q) {
  const double h = 1e-7;
  for (int it = 0; it < 300; ++it) {
    const Pose cur(fk_oracle(c, q));
    const Twist e = se3_log(target * cur.inverse());
    if (e.norm() < 1e-12) break;
    MatrixXd j(6, q.size());
    for (Eigen::Index i = 0; i < q.size(); ++i) {
      VectorXd qp = q;
      qp[i] += h;
      j.col(i) = se3_log(Pose(fk_oracle(c, qp)) * cur.inverse()) / h;
    }
    const MatrixXd jjt = j * j.transpose() + 1e-8 * MatrixXd::Identity(6, 6);
    q += j.transpose() * jjt.ldlt().solve(e);
  }
  return q;
}

double velocity_energy(const JointTrajectory& t) {
  double s = 0.0;
  for (const auto& v : t.qd) s += v.squaredNorm();
  return s;
}

RetargetProblem sweep_problem(const KinematicChain& c, int n) {
  RetargetProblem p;
  p.q0 = *c.home;
  const Pose start = forward_kinematics(c, p.q0);
  for (int t = 0; t < n; ++t)
    p.targets.push_back(Pose(Rotation::about_axis(Vec3(0, 0, 1), 0.01 * t), Vec3(0.004 * t, 0.002 * t, 0)) * start);
  return p;
}

}  // namespace

TEST_SUITE("retarget") {

TEST_CASE("lever forward kinematics") {
  const KinematicChain c = lever();
  const Pose a = forward_kinematics(c, VectorXd::Zero(1));
  CHECK(a.translation.isApprox(Vec3(1, 0, 0), 1e-12));
  CHECK(angular_distance(a.rotation, Rotation::identity()) < 1e-12);
  const Pose b = forward_kinematics(c, VectorXd::Constant(1, kPi / 2));
  CHECK((b.translation - Vec3(0, 1, 0)).norm() < 1e-12);
  CHECK(angular_distance(b.rotation, Rotation::about_axis(Vec3(0, 0, 1), kPi / 2)) < 1e-12);
}

TEST_CASE("forward kinematics matches the matrix product") {
  const KinematicChain c = held_panda();
  Rng rng(81);
  for (int i = 0; i < 100; ++i) {
    const VectorXd q = random_q(rng, c);
    CHECK((forward_kinematics(c, q).matrix() - fk_oracle(c, q)).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("Panda zero configuration") {
  // Flange at (0.088, 0, 0.926) with the hand TCP 0.1034 m below it.
  const KinematicChain c = panda_chain();
  const Pose p = forward_kinematics(c, VectorXd::Zero(7));
  CHECK((p.translation - Vec3(0.088, 0, 0.926 - 0.1034)).norm() < 1e-9);
  CHECK((p.rotation * Vec3(0, 0, 1) - Vec3(0, 0, -1)).norm() < 1e-9);
  CHECK(c.dof() == 7);
  REQUIRE(c.home.has_value());
}

TEST_CASE("shipped Panda profile matches the built-in chain") {
  const KinematicChain file = chain_from_json(read_json(std::filesystem::path(P6D_DATA_DIR) / "panda.json"));
  const KinematicChain ref = panda_chain();
  REQUIRE(file.dof() == ref.dof());
  Rng rng(82);
  for (int i = 0; i < 20; ++i) {
    const VectorXd q = random_q(rng, ref);
    // The profile stores 9 significant digits.
    CHECK((forward_kinematics(file, q).matrix() - forward_kinematics(ref, q).matrix()).cwiseAbs().maxCoeff() < 1e-8);
  }
  for (std::size_t i = 0; i < ref.dof(); ++i) {
    CHECK(file.joints[i].lower == ref.joints[i].lower);
    CHECK(file.joints[i].upper == ref.joints[i].upper);
  }
}

TEST_CASE("Jacobian matches central differences") {
  const KinematicChain c = held_panda();
  Rng rng(83);
  const double h = 1e-6;
  for (int trial = 0; trial < 20; ++trial) {
    const VectorXd q = random_q(rng, c);
    const MatrixXd j = jacobian(c, q);
    const Pose p0 = forward_kinematics(c, q);
    for (Eigen::Index i = 0; i < q.size(); ++i) {
      VectorXd qp = q, qm = q;
      qp[i] += h;
      qm[i] -= h;
      const Pose a = forward_kinematics(c, qp), b = forward_kinematics(c, qm);
      const Vec3 w = (so3_log(a.rotation * p0.rotation.inverse()) - so3_log(b.rotation * p0.rotation.inverse())) / (2 * h);
      const Vec3 v = (a.translation - b.translation) / (2 * h);
      CHECK((j.col(i).head<3>() - w).cwiseAbs().maxCoeff() < 1e-5);
      CHECK((j.col(i).tail<3>() - v).cwiseAbs().maxCoeff() < 1e-5);
    }
  }
}

TEST_CASE("Jacobian special cases") {
  KinematicChain on_axis = lever();
  on_axis.tool = Pose::identity();
  const MatrixXd j = jacobian(on_axis, VectorXd::Constant(1, 0.7));
  CHECK(j.col(0).tail<3>().norm() < 1e-15);
  CHECK(j.col(0).head<3>().isApprox(Vec3(0, 0, 1)));

  KinematicChain stacked;
  stacked.joints.resize(3);
  stacked.joints[1].axis = Vec3(1, 0, 0);
  stacked.joints[2].axis = Vec3(0, 1, 0);
  const MatrixXd z = jacobian(stacked, VectorXd::Zero(3));
  CHECK(z.allFinite());
  Eigen::Matrix3d axes;
  axes << Vec3(0, 0, 1), Vec3(1, 0, 0), Vec3(0, 1, 0);
  CHECK(z.topRows<3>().isApprox(axes));
  CHECK(z.bottomRows<3>().norm() < 1e-15);
}

TEST_CASE("camera to robot transform") {
  Rng rng(84);
  std::vector<Pose> traj;
  for (int i = 0; i < 5; ++i) traj.push_back(test::random_pose(rng));
  const auto same = camera_to_robot(traj, Pose::identity());
  for (int i = 0; i < 5; ++i) CHECK(test::pose_gap(same[i], traj[i]) < 1e-15);

  const Pose rot(random_rotation(rng), Vec3::Zero());
  const auto r = camera_to_robot(traj, rot);
  for (int i = 0; i < 5; ++i) {
    CHECK(r[i].translation.isApprox(rot.rotation * traj[i].translation, 1e-12));
    CHECK(test::pose_gap(r[0].inverse() * r[i], traj[0].inverse() * traj[i]) < 1e-9);
  }

  const Pose g = test::random_pose(rng);
  const auto m = camera_to_robot(traj, g);
  for (int i = 0; i < 5; ++i) CHECK((m[i].matrix() - g.matrix() * traj[i].matrix()).cwiseAbs().maxCoeff() < 1e-9);

  const Pose cam = default_camera_in_robot();
  CHECK(cam.translation.z() == doctest::Approx(0.75));
  const Vec3 view = cam.rotation * Vec3(0, 0, 1);
  CHECK(std::asin(-view.z()) == doctest::Approx(kPi / 6));
  CHECK(view.x() < 0.0);
}

TEST_CASE("relative reference trajectory") {
  Rng rng(85);
  const Pose start = test::random_pose(rng);
  const Pose fixed = test::random_pose(rng);
  for (const auto& p : relative_reference(std::vector<Pose>(4, fixed), start)) CHECK(test::pose_gap(p, start) < 1e-12);

  std::vector<Pose> traj;
  for (int i = 0; i < 8; ++i) traj.push_back(test::random_pose(rng));
  const auto anchored = relative_reference(traj, traj[0]);
  for (int i = 0; i < 8; ++i) CHECK(test::pose_gap(anchored[i], traj[i]) < 1e-9);

  const auto out = relative_reference(traj, start);
  CHECK(out[0].translation == start.translation);
  CHECK(out[0].rotation.quaternion().coeffs() == start.rotation.quaternion().coeffs());
  for (int i = 1; i < 8; ++i)
    CHECK(test::pose_gap(out[i - 1].inverse() * out[i], traj[i - 1].inverse() * traj[i]) < 1e-9);
  CHECK_THROWS_AS(relative_reference(std::vector<Pose>{}, start), Error);
}

TEST_CASE("static target converges to the IK solution") {
  const KinematicChain c = held_panda();
  RetargetProblem p;
  p.q0 = *c.home;
  VectorXd q_star = p.q0;
  q_star += (VectorXd(7) << 0.2, 0.15, -0.1, 0.2, 0.1, -0.15, 0.2).finished();
  const Pose target(fk_oracle(c, q_star));
  p.targets.assign(40, target);
  p.weights.velocity = 1e-6;
  p.weights.torque = 1e-6;
  const JointTrajectory t = optimize_trajectory(p, c);
  CHECK(t.residuals.back() < 1e-3);
  const Pose oracle(fk_oracle(c, dls_ik(c, target, p.q0)));
  CHECK(test::pose_gap(oracle, target) < 1e-9);
  CHECK(test::pose_gap(t.object_poses.back(), oracle) < 1e-3);
}

TEST_CASE("targets already met keep the robot still") {
  const KinematicChain c = held_panda();
  RetargetProblem p;
  p.q0 = *c.home;
  p.targets.assign(10, forward_kinematics(c, p.q0));
  const JointTrajectory t = optimize_trajectory(p, c);
  CHECK(t.cost_history.back() < 1e-12);
  for (const auto& u : t.tau) CHECK(u.norm() < 1e-6);
  for (double r : t.residuals) CHECK(r < 1e-9);
}

TEST_CASE("cost never increases across iterations") {
  const KinematicChain c = held_panda();
  const JointTrajectory t = optimize_trajectory(sweep_problem(c, 30), c);
  REQUIRE(t.cost_history.size() >= 2);
  for (std::size_t i = 1; i < t.cost_history.size(); ++i) CHECK(t.cost_history[i] <= t.cost_history[i - 1]);
  CHECK(t.q.size() == 31);
  CHECK(t.tau.size() == 30);
}

TEST_CASE("analytic gradient matches finite differences") {
  const KinematicChain c = held_panda();
  Rng rng(86);
  for (int trial = 0; trial < 5; ++trial) {
    RetargetProblem p;
    p.q0 = *c.home;
    for (int t = 0; t < 5; ++t) p.targets.push_back(test::random_pose(rng, 0.3) * forward_kinematics(c, p.q0));
    p.weights.limits = 0.0;
    std::vector<VectorXd> u(5);
    for (auto& x : u) x = VectorXd::NullaryExpr(7, [&] { return rng.normal(0, 2.0); });
    const VectorXd g = cost_gradient(p, c, u);
    VectorXd fd(g.size());
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      auto up = u, um = u;
      up[static_cast<std::size_t>(i / 7)][i % 7] += h;
      um[static_cast<std::size_t>(i / 7)][i % 7] -= h;
      fd[i] = (total_cost(p, c, up) - total_cost(p, c, um)) / (2 * h);
    }
    CHECK((g - fd).norm() <= 1e-4 * g.norm());
  }
}

TEST_CASE("heavier velocity weight never raises joint speeds") {
  const KinematicChain c = held_panda();
  RetargetProblem p = sweep_problem(c, 30);
  double previous = std::numeric_limits<double>::infinity();
  for (double w : {1e-4, 1e-3, 1e-2, 1e-1, 1.0}) {
    p.weights.velocity = w;
    const double e = velocity_energy(optimize_trajectory(p, c));
    CHECK(e <= previous * (1 + 1e-6));
    previous = e;
  }
}

TEST_CASE("moving the base and targets together leaves joints unchanged") {
  const KinematicChain c = held_panda();
  const RetargetProblem p = sweep_problem(c, 20);
  Rng rng(87);
  const Pose g = test::random_pose(rng);
  KinematicChain moved = c;
  moved.joints[0].origin = g * moved.joints[0].origin;
  RetargetProblem q = p;
  for (auto& t : q.targets) t = g * t;
  const JointTrajectory a = optimize_trajectory(p, c);
  const JointTrajectory b = optimize_trajectory(q, moved);
  for (std::size_t t = 0; t < a.q.size(); ++t) CHECK((a.q[t] - b.q[t]).norm() < 1e-6);
}

TEST_CASE("clamping keeps joints within limits") {
  KinematicChain c = held_panda();
  RetargetProblem p;
  p.q0 = *c.home;
  c.joints[3].upper = p.q0[3] + 0.05;
  VectorXd q_far = p.q0;
  q_far[3] += 0.5;
  p.targets.assign(20, forward_kinematics(c, q_far));
  const JointTrajectory t = optimize_trajectory(p, c);
  for (const auto& q : t.q)
    for (std::size_t i = 0; i < 7; ++i) {
      CHECK(q[static_cast<Eigen::Index>(i)] >= c.joints[i].lower);
      CHECK(q[static_cast<Eigen::Index>(i)] <= c.joints[i].upper);
    }
}

TEST_CASE("invalid problems are rejected") {
  const KinematicChain c = held_panda();
  RetargetProblem p = sweep_problem(c, 3);
  p.dt = 0.0;
  CHECK_THROWS_AS(optimize_trajectory(p, c), Error);
  p = sweep_problem(c, 3);
  p.weights.pose = 0.0;
  CHECK_THROWS_AS(optimize_trajectory(p, c), Error);
  p = sweep_problem(c, 3);
  p.q0[0] = 10.0;
  CHECK_THROWS_AS(optimize_trajectory(p, c), Error);
  KinematicChain bad = c;
  bad.joints[2].inertia = 0.0;
  CHECK_THROWS_AS(validate(bad), Error);
  CHECK_THROWS_AS(forward_kinematics(c, VectorXd::Zero(6)), Error);
}

TEST_CASE("chain and trajectory JSON") {
  const KinematicChain c = held_panda();
  const KinematicChain r = chain_from_json(chain_to_json(c));
  CHECK(test::pose_gap(r.grasp, c.grasp) < 1e-15);
  CHECK(r.home->isApprox(*c.home));
  const JointTrajectory t = optimize_trajectory(sweep_problem(c, 4), c);
  const Json j = joint_trajectory_to_json(t, 0.05);
  CHECK(j.at("dt").get<double>() == 0.05);
  CHECK(j.at("steps").size() == 5);
}

}
