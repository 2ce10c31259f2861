#include "p6d/retarget.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "p6d/error.hpp"

namespace p6d {

using Eigen::MatrixXd;
using Eigen::VectorXd;

void validate(const KinematicChain& chain) {
  if (chain.joints.empty()) throw_data("kinematic chain has no joints");
  for (std::size_t i = 0; i < chain.joints.size(); ++i) {
    const Joint& j = chain.joints[i];
    const std::string where = "joint " + std::to_string(i) + ": ";
    if (std::abs(j.axis.norm() - 1.0) > 1e-6) throw_data(where + "axis must be a unit vector");
    if (!(j.lower < j.upper)) throw_data(where + "lower limit must be below upper limit");
    if (!(j.inertia > 0.0)) throw_data(where + "inertia must be positive");
    if (!j.origin.translation.allFinite()) throw_data(where + "origin must be finite");
  }
  if (chain.home && static_cast<std::size_t>(chain.home->size()) != chain.dof())
    throw_data("home configuration has the wrong length");
}

KinematicChain chain_from_json(const Json& j) {
  try {
    KinematicChain chain;
    for (const auto& jj : j.at("joints")) {
      Joint joint;
      joint.axis = vec3_from_json(jj.at("axis")).normalized();
      joint.origin = pose_from_json(jj.at("origin"));
      joint.lower = jj.at("limits").at(0).get<double>();
      joint.upper = jj.at("limits").at(1).get<double>();
      joint.velocity_limit = jj.value("vel_limit", 0.0);
      joint.effort_limit = jj.value("effort_limit", 0.0);
      joint.inertia = jj.value("inertia", 1.0);
      chain.joints.push_back(joint);
    }
    chain.tool = j.contains("tool") ? pose_from_json(j["tool"]) : Pose::identity();
    chain.grasp = j.contains("grasp") ? pose_from_json(j["grasp"]) : Pose::identity();
    if (j.contains("home")) {
      const auto v = j["home"].get<std::vector<double>>();
      chain.home = Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    }
    validate(chain);
    return chain;
  } catch (const Json::exception& e) {
    throw_data(std::string("malformed chain file: ") + e.what());
  }
}

Json chain_to_json(const KinematicChain& chain) {
  Json joints = Json::array();
  for (const Joint& j : chain.joints)
    joints.push_back({{"axis", {j.axis.x(), j.axis.y(), j.axis.z()}},
                      {"origin", pose_to_json(j.origin)},
                      {"limits", {j.lower, j.upper}},
                      {"vel_limit", j.velocity_limit},
                      {"effort_limit", j.effort_limit},
                      {"inertia", j.inertia}});
  Json out{{"joints", joints}, {"tool", pose_to_json(chain.tool)}, {"grasp", pose_to_json(chain.grasp)}};
  if (chain.home) out["home"] = vec_to_json(*chain.home);
  return out;
}

KinematicChain panda_chain() {
  constexpr double pi = std::numbers::pi;
  const double d[] = {0.333, 0.0, 0.316, 0.0, 0.384, 0.0, 0.0};
  const double a[] = {0.0, 0.0, 0.0, 0.0825, -0.0825, 0.0, 0.088};
  const double alpha[] = {0.0, -pi / 2, pi / 2, pi / 2, -pi / 2, pi / 2, pi / 2};
  const double lo[] = {-2.8973, -1.7628, -2.8973, -3.0718, -2.8973, -0.0175, -2.8973};
  const double hi[] = {2.8973, 1.7628, 2.8973, -0.0698, 2.8973, 3.7525, 2.8973};
  const double vel[] = {2.175, 2.175, 2.175, 2.175, 2.61, 2.61, 2.61};
  const double effort[] = {87, 87, 87, 87, 12, 12, 12};

  KinematicChain chain;
  for (int i = 0; i < 7; ++i) {
    Joint j;
    const Rotation rx = Rotation::about_axis(Vec3::UnitX(), alpha[i]);
    j.origin = Pose(rx, rx * Vec3(a[i], 0.0, d[i]));
    j.lower = lo[i];
    j.upper = hi[i];
    j.velocity_limit = vel[i];
    j.effort_limit = effort[i];
    chain.joints.push_back(j);
  }
  // Flange offset, then the hand's mounting rotation and TCP offset.
  chain.tool = Pose(Rotation::about_axis(Vec3::UnitZ(), -pi / 4), Vec3(0.0, 0.0, 0.107 + 0.1034));
  VectorXd home(7);
  home << 0.0, -pi / 4, 0.0, -3 * pi / 4, 0.0, pi / 2, pi / 4;
  chain.home = home;
  return chain;
}

namespace {

void check_q(const KinematicChain& chain, const VectorXd& q) {
  if (static_cast<std::size_t>(q.size()) != chain.dof())
    throw_data("joint vector has " + std::to_string(q.size()) + " entries, chain has " +
               std::to_string(chain.dof()) + " joints");
}

// Base-frame joint frames (after rotation) and the object pose.
Pose chain_frames(const KinematicChain& chain, const VectorXd& q, std::vector<Pose>* frames) {
  check_q(chain, q);
  Pose t;
  for (std::size_t i = 0; i < chain.dof(); ++i) {
    const Joint& j = chain.joints[i];
    t = t * j.origin * Pose(Rotation::about_axis(j.axis, q[static_cast<Eigen::Index>(i)]), Vec3::Zero());
    if (frames) frames->push_back(t);
  }
  return t * chain.tool * chain.grasp;
}

}  // namespace

Pose forward_kinematics(const KinematicChain& chain, const VectorXd& q) {
  return chain_frames(chain, q, nullptr);
}

MatrixXd jacobian(const KinematicChain& chain, const VectorXd& q) {
  std::vector<Pose> frames;
  const Pose obj = chain_frames(chain, q, &frames);
  MatrixXd jac(6, static_cast<Eigen::Index>(chain.dof()));
  for (std::size_t i = 0; i < chain.dof(); ++i) {
    const Vec3 w = frames[i].rotation * chain.joints[i].axis;
    const auto c = static_cast<Eigen::Index>(i);
    jac.block<3, 1>(0, c) = w;
    jac.block<3, 1>(3, c) = w.cross(obj.translation - frames[i].translation);
  }
  return jac;
}

namespace {

// Residual e = log(T(q)^-1 T~) and de/dq.
struct PoseResidual {
  Vec6 e;
  Eigen::Matrix<double, 6, Eigen::Dynamic> de_dq;
};

PoseResidual pose_residual(const KinematicChain& chain, const VectorXd& q, const Pose& target,
                           bool derivative) {
  PoseResidual r;
  const Pose t = forward_kinematics(chain, q);
  r.e = se3_log(t.inverse() * target);
  if (derivative) {
    const MatrixXd js = jacobian(chain, q);
    const Mat3 rt = t.rotation.matrix().transpose();
    MatrixXd jb(6, js.cols());
    jb.topRows<3>() = rt * js.topRows<3>();
    jb.bottomRows<3>() = rt * js.bottomRows<3>();
    r.de_dq = -se3_left_jacobian(r.e).inverse() * jb;
  }
  return r;
}

}  // namespace

VectorXd inverse_kinematics(const KinematicChain& chain, const Pose& target, const VectorXd& q_start,
                            int iterations, double damping) {
  validate(chain);
  VectorXd q = q_start;
  VectorXd best = q;
  double best_err = pose_residual(chain, q, target, false).e.norm();
  const auto n = static_cast<Eigen::Index>(chain.dof());
  for (int it = 0; it < iterations && best_err > 1e-12; ++it) {
    const PoseResidual r = pose_residual(chain, q, target, true);
    const MatrixXd h = r.de_dq.transpose() * r.de_dq + damping * damping * MatrixXd::Identity(n, n);
    q -= h.ldlt().solve(r.de_dq.transpose() * r.e);
    for (Eigen::Index i = 0; i < n; ++i)
      q[i] = std::clamp(q[i], chain.joints[static_cast<std::size_t>(i)].lower,
                        chain.joints[static_cast<std::size_t>(i)].upper);
    const double err = pose_residual(chain, q, target, false).e.norm();
    if (err < best_err) {
      best_err = err;
      best = q;
    }
  }
  return best;
}

std::vector<Pose> camera_to_robot(std::span<const Pose> camera_poses, const Pose& t_rc) {
  std::vector<Pose> out;
  out.reserve(camera_poses.size());
  for (const Pose& p : camera_poses) out.push_back(t_rc * p);
  return out;
}

Pose default_camera_in_robot() {
  const double pitch = 30.0 * std::numbers::pi / 180.0;
  const Vec3 forward(-std::cos(pitch), 0.0, -std::sin(pitch));
  const Vec3 right(0.0, 1.0, 0.0);
  const Vec3 down = forward.cross(right);
  Mat3 r;
  r.col(0) = right;
  r.col(1) = down;
  r.col(2) = forward;
  return Pose(Rotation(r), Vec3(1.3, 0.0, 0.75));
}

std::vector<Pose> relative_reference(std::span<const Pose> traj, const Pose& start) {
  if (traj.empty()) throw_data("empty trajectory");
  const Pose anchor = start * traj.front().inverse();
  std::vector<Pose> out;
  out.reserve(traj.size());
  out.push_back(start);
  for (std::size_t i = 1; i < traj.size(); ++i) out.push_back(anchor * traj[i]);
  return out;
}

void validate(const RetargetProblem& problem, const KinematicChain& chain) {
  validate(chain);
  if (problem.targets.empty()) throw_data("retarget problem has no targets");
  if (!(problem.dt > 0.0)) throw_data("dt must be positive");
  const auto& w = problem.weights;
  if (!(w.pose > 0.0) || w.velocity < 0.0 || w.torque < 0.0 || w.limits < 0.0)
    throw_data("weights must be non-negative with a positive pose weight");
  check_q(chain, problem.q0);
  for (std::size_t i = 0; i < chain.dof(); ++i) {
    const double v = problem.q0[static_cast<Eigen::Index>(i)];
    if (!(v >= chain.joints[i].lower && v <= chain.joints[i].upper))
      throw_data("q0 violates the limits of joint " + std::to_string(i));
  }
}

namespace {

struct Dynamics {
  MatrixXd a, b;
};

Dynamics linear_dynamics(const KinematicChain& chain, double dt) {
  const auto n = static_cast<Eigen::Index>(chain.dof());
  Dynamics d;
  d.a = MatrixXd::Identity(2 * n, 2 * n);
  d.a.topRightCorner(n, n) = dt * MatrixXd::Identity(n, n);
  d.b = MatrixXd::Zero(2 * n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double inv = 1.0 / chain.joints[static_cast<std::size_t>(i)].inertia;
    d.b(i, i) = dt * dt * inv;
    d.b(n + i, i) = dt * inv;
  }
  return d;
}

// Cost of state x reached after control t, with optional GN derivatives.
struct StateCost {
  double value = 0.0;
  VectorXd grad;
  MatrixXd hess;
};

StateCost state_cost(const RetargetProblem& p, const KinematicChain& chain, const VectorXd& x,
                     std::size_t t, bool derivatives) {
  const auto n = static_cast<Eigen::Index>(chain.dof());
  const VectorXd q = x.head(n);
  const VectorXd qd = x.tail(n);
  const auto& w = p.weights;
  StateCost c;
  const PoseResidual r = pose_residual(chain, q, p.targets[t], derivatives);
  c.value = w.pose * r.e.squaredNorm() + w.velocity * qd.squaredNorm();
  if (derivatives) {
    c.grad = VectorXd::Zero(2 * n);
    c.hess = MatrixXd::Zero(2 * n, 2 * n);
    c.grad.head(n) = 2.0 * w.pose * r.de_dq.transpose() * r.e;
    c.hess.topLeftCorner(n, n) = 2.0 * w.pose * r.de_dq.transpose() * r.de_dq;
    c.grad.tail(n) = 2.0 * w.velocity * qd;
    c.hess.bottomRightCorner(n, n).diagonal().array() += 2.0 * w.velocity;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const Joint& j = chain.joints[static_cast<std::size_t>(i)];
    const double over = q[i] > j.upper ? q[i] - j.upper : (q[i] < j.lower ? q[i] - j.lower : 0.0);
    if (over == 0.0) continue;
    c.value += w.limits * over * over;
    if (derivatives) {
      c.grad[i] += 2.0 * w.limits * over;
      c.hess(i, i) += 2.0 * w.limits;
    }
  }
  return c;
}

std::vector<VectorXd> rollout_states(const Dynamics& d, const VectorXd& x0,
                                     std::span<const VectorXd> controls) {
  std::vector<VectorXd> xs;
  xs.reserve(controls.size() + 1);
  xs.push_back(x0);
  for (const auto& u : controls) xs.push_back(d.a * xs.back() + d.b * u);
  return xs;
}

double trajectory_cost(const RetargetProblem& p, const KinematicChain& chain,
                       const std::vector<VectorXd>& xs, std::span<const VectorXd> us) {
  double total = 0.0;
  for (std::size_t t = 0; t < us.size(); ++t)
    total += p.weights.torque * us[t].squaredNorm() + state_cost(p, chain, xs[t + 1], t, false).value;
  return total;
}

VectorXd initial_state(const RetargetProblem& p) {
  const auto n = p.q0.size();
  VectorXd x0 = VectorXd::Zero(2 * n);
  x0.head(n) = p.q0;
  return x0;
}

void check_controls(const RetargetProblem& p, const KinematicChain& chain,
                    std::span<const VectorXd> controls) {
  if (controls.size() != p.targets.size())
    throw_data("expected " + std::to_string(p.targets.size()) + " controls, got " +
               std::to_string(controls.size()));
  for (const auto& u : controls)
    if (static_cast<std::size_t>(u.size()) != chain.dof()) throw_data("control has the wrong length");
}

}  // namespace

std::vector<VectorXd> rollout(const RetargetProblem& problem, const KinematicChain& chain,
                              std::span<const VectorXd> controls) {
  validate(problem, chain);
  check_controls(problem, chain, controls);
  return rollout_states(linear_dynamics(chain, problem.dt), initial_state(problem), controls);
}

double total_cost(const RetargetProblem& problem, const KinematicChain& chain,
                  std::span<const VectorXd> controls) {
  const auto xs = rollout(problem, chain, controls);
  return trajectory_cost(problem, chain, xs, controls);
}

VectorXd cost_gradient(const RetargetProblem& problem, const KinematicChain& chain,
                       std::span<const VectorXd> controls) {
  const auto xs = rollout(problem, chain, controls);
  const Dynamics d = linear_dynamics(chain, problem.dt);
  const auto n = static_cast<Eigen::Index>(chain.dof());
  const std::size_t horizon = controls.size();
  VectorXd grad(static_cast<Eigen::Index>(horizon) * n);
  VectorXd lambda = VectorXd::Zero(2 * n);  // dJ/dx_{t+1} including future costs
  for (std::size_t t = horizon; t-- > 0;) {
    lambda += state_cost(problem, chain, xs[t + 1], t, true).grad;
    grad.segment(static_cast<Eigen::Index>(t) * n, n) =
        2.0 * problem.weights.torque * controls[t] + d.b.transpose() * lambda;
    lambda = d.a.transpose() * lambda;
  }
  return grad;
}

JointTrajectory optimize_trajectory(const RetargetProblem& problem, const KinematicChain& chain,
                                    const RetargetOptions& options) {
  validate(problem, chain);
  const auto n = static_cast<Eigen::Index>(chain.dof());
  const std::size_t horizon = problem.targets.size();
  const Dynamics d = linear_dynamics(chain, problem.dt);
  const VectorXd x0 = initial_state(problem);

  std::vector<VectorXd> us(horizon, VectorXd::Zero(n));
  std::vector<VectorXd> xs = rollout_states(d, x0, us);
  double cost = trajectory_cost(problem, chain, xs, us);
  if (!std::isfinite(cost)) throw_numerical("divergence");

  JointTrajectory out;
  out.cost_history.push_back(cost);
  std::vector<VectorXd> kff(horizon);
  std::vector<MatrixXd> kfb(horizon);
  double mu = 0.0;

  for (int it = 0; it < options.max_iterations; ++it) {
    // Backward pass.
    bool backward_ok = true;
    {
      StateCost last = state_cost(problem, chain, xs[horizon], horizon - 1, true);
      VectorXd vx = last.grad;
      MatrixXd vxx = last.hess;
      for (std::size_t t = horizon; t-- > 0;) {
        const VectorXd qu = 2.0 * problem.weights.torque * us[t] + d.b.transpose() * vx;
        MatrixXd quu = d.b.transpose() * vxx * d.b;
        quu.diagonal().array() += 2.0 * problem.weights.torque + mu;
        const MatrixXd qux = d.b.transpose() * vxx * d.a;
        VectorXd qx = d.a.transpose() * vx;
        MatrixXd qxx = d.a.transpose() * vxx * d.a;
        if (t > 0) {
          const StateCost c = state_cost(problem, chain, xs[t], t - 1, true);
          qx += c.grad;
          qxx += c.hess;
        }
        const Eigen::LLT<MatrixXd> llt(quu);
        if (llt.info() != Eigen::Success) {
          backward_ok = false;
          break;
        }
        kff[t] = -llt.solve(qu);
        kfb[t] = -llt.solve(qux);
        vx = qx + kfb[t].transpose() * quu * kff[t] + kfb[t].transpose() * qu + qux.transpose() * kff[t];
        vxx = qxx + kfb[t].transpose() * quu * kfb[t] + kfb[t].transpose() * qux + qux.transpose() * kfb[t];
        vxx = 0.5 * (vxx + vxx.transpose()).eval();
      }
    }
    if (!backward_ok) {
      mu = std::max(1e-9, mu * 10.0);
      if (mu > 1e10) break;
      continue;
    }

    // Forward pass with backtracking.
    bool accepted = false;
    for (double alpha = 1.0; alpha > 1e-4; alpha *= 0.5) {
      std::vector<VectorXd> nus(horizon);
      std::vector<VectorXd> nxs{x0};
      for (std::size_t t = 0; t < horizon; ++t) {
        nus[t] = us[t] + alpha * kff[t] + kfb[t] * (nxs[t] - xs[t]);
        nxs.push_back(d.a * nxs[t] + d.b * nus[t]);
      }
      const double c = trajectory_cost(problem, chain, nxs, nus);
      if (!std::isfinite(c)) continue;
      if (c < cost) {
        const double rel = (cost - c) / std::max(cost, 1e-300);
        us = std::move(nus);
        xs = std::move(nxs);
        cost = c;
        out.cost_history.push_back(cost);
        accepted = true;
        out.iterations = it + 1;
        if (rel < options.relative_tolerance) out.converged = true;
        break;
      }
    }
    if (out.converged) break;
    if (accepted) {
      mu = mu * 0.1 < 1e-9 ? 0.0 : mu * 0.1;
    } else {
      mu = std::max(1e-9, mu * 10.0);
      if (mu > 1e10) {
        out.converged = true;  // no descent direction left
        break;
      }
    }
  }
  if (!std::isfinite(cost)) throw_numerical("divergence");

  for (const auto& x : xs) {
    VectorXd q = x.head(n);
    if (options.clamp_to_limits)
      for (Eigen::Index i = 0; i < n; ++i)
        q[i] = std::clamp(q[i], chain.joints[static_cast<std::size_t>(i)].lower,
                          chain.joints[static_cast<std::size_t>(i)].upper);
    out.q.push_back(q);
    out.qd.push_back(x.tail(n));
    out.object_poses.push_back(forward_kinematics(chain, q));
  }
  out.tau = us;
  for (std::size_t t = 0; t < horizon; ++t)
    out.residuals.push_back(se3_log(out.object_poses[t + 1].inverse() * problem.targets[t]).norm());
  return out;
}

Json joint_trajectory_to_json(const JointTrajectory& traj, double dt) {
  Json steps = Json::array();
  for (std::size_t t = 0; t < traj.q.size(); ++t) {
    Json s{{"step", t}, {"q", vec_to_json(traj.q[t])}, {"qd", vec_to_json(traj.qd[t])},
           {"obj_pose", pose_to_json(traj.object_poses[t])}};
    if (t < traj.tau.size()) s["tau"] = vec_to_json(traj.tau[t]);
    if (t > 0) s["residual"] = traj.residuals[t - 1];
    steps.push_back(s);
  }
  return {{"dt", dt},
          {"steps", steps},
          {"cost_history", traj.cost_history},
          {"iterations", traj.iterations},
          {"converged", traj.converged}};
}

}  // namespace p6d
