#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "p6d/geometry.hpp"
#include "p6d/io.hpp"

namespace p6d {

/// Revolute joint: the child frame is origin * Rot(axis, q).
struct Joint {
  Vec3 axis = Vec3::UnitZ();  // unit, child frame
  Pose origin;                // parent frame -> joint frame at q = 0
  double lower = -3.14159;
  double upper = 3.14159;
  double velocity_limit = 0.0;  // rad/s, 0 when unknown
  double effort_limit = 0.0;    // N m, 0 when unknown
  double inertia = 1.0;         // kg m^2
};

struct KinematicChain {
  std::vector<Joint> joints;
  Pose tool;   // last joint -> gripper
  Pose grasp;  // gripper -> held object
  std::optional<Eigen::VectorXd> home;

  std::size_t dof() const { return joints.size(); }
};

void validate(const KinematicChain& chain);

/// {"joints": [{"axis", "origin": {quat, t}, "limits": [lo, hi], "vel_limit",
/// "effort_limit", "inertia"}], "tool": {quat, t}, "grasp"?, "home"?}.
KinematicChain chain_from_json(const Json& j);
Json chain_to_json(const KinematicChain& chain);

/// Franka Emika Panda, modified-DH kinematics with the hand's TCP as tool.
KinematicChain panda_chain();

/// Object pose in the base frame.
Pose forward_kinematics(const KinematicChain& chain, const Eigen::VectorXd& q);

/// 6 x n geometric Jacobian: rows 0-2 angular velocity, rows 3-5 linear
/// velocity of the object origin, both in the base frame.
Eigen::MatrixXd jacobian(const KinematicChain& chain, const Eigen::VectorXd& q);

/// Damped least squares on the SE(3) log error. Returns the best iterate.
Eigen::VectorXd inverse_kinematics(const KinematicChain& chain, const Pose& target,
                                   const Eigen::VectorXd& q_start, int iterations = 500,
                                   double damping = 1e-3);

/// Left-multiplies each pose by t_rc.
std::vector<Pose> camera_to_robot(std::span<const Pose> camera_poses, const Pose& t_rc);

/// Camera 1.3 m in front of the base at 0.75 m height, looking back at the
/// robot and pitched 30 degrees below the horizon.
Pose default_camera_in_robot();

/// out_t = start * traj_0^-1 * traj_t.
std::vector<Pose> relative_reference(std::span<const Pose> traj, const Pose& start);

struct RetargetWeights {
  double pose = 100.0;       // w_d
  double velocity = 1e-2;    // w_qd
  double torque = 1e-4;      // w_tau
  double limits = 1e4;       // quadratic penalty beyond joint limits
};

/// Target t is compared with the state after applying torque t, so N targets
/// give N controls and N + 1 states including q0 at rest.
struct RetargetProblem {
  std::vector<Pose> targets;
  double dt = 1.0 / 30.0;
  RetargetWeights weights;
  Eigen::VectorXd q0;
};

struct RetargetOptions {
  int max_iterations = 200;
  double relative_tolerance = 1e-8;
  bool clamp_to_limits = true;
};

struct JointTrajectory {
  std::vector<Eigen::VectorXd> q;       // N + 1
  std::vector<Eigen::VectorXd> qd;      // N + 1
  std::vector<Eigen::VectorXd> tau;     // N
  std::vector<Pose> object_poses;       // N + 1
  std::vector<double> residuals;        // N, |log(T_t^-1 T~_t)| at state t + 1
  std::vector<double> cost_history;     // initial rollout, then each accepted iteration
  int iterations = 0;
  bool converged = false;
};

void validate(const RetargetProblem& problem, const KinematicChain& chain);

/// Semi-implicit double integrator: qd' = qd + dt tau / I, q' = q + dt qd'.
std::vector<Eigen::VectorXd> rollout(const RetargetProblem& problem, const KinematicChain& chain,
                                     std::span<const Eigen::VectorXd> controls);

/// Squared-norm form of the tracking objective plus the joint-limit penalty.
double total_cost(const RetargetProblem& problem, const KinematicChain& chain,
                  std::span<const Eigen::VectorXd> controls);

/// Exact gradient of total_cost with respect to the stacked controls.
Eigen::VectorXd cost_gradient(const RetargetProblem& problem, const KinematicChain& chain,
                              std::span<const Eigen::VectorXd> controls);

/// Gauss-Newton iLQR with backtracking line search, starting from zero torque.
JointTrajectory optimize_trajectory(const RetargetProblem& problem, const KinematicChain& chain,
                                    const RetargetOptions& options = {});

/// {"dt", "steps": [{"q", "qd", "tau", "obj_pose", "residual"}], ...}.
Json joint_trajectory_to_json(const JointTrajectory& traj, double dt);

}  // namespace p6d
