#include "rm4d/ik_solver.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace rm4d {
namespace {

/// Rotation vector (angle * axis) taking b to a, in the shared frame.
Vec3 rotation_error(const Mat3& target, const Mat3& current) {
  const Eigen::AngleAxisd aa(target * current.transpose());
  return aa.angle() * aa.axis();
}

void clamp_to_limits(const RobotModel& model, Eigen::VectorXd& q) {
  for (int i = 0; i < model.joint_count(); ++i) {
    const Joint& j = model.joints()[static_cast<std::size_t>(i)];
    if (j.continuous) {
      // FK is 2*pi periodic; keep values in a sane band for stability.
      q[i] = std::remainder(q[i], 2.0 * kPi);
    } else {
      q[i] = std::clamp(q[i], j.lower, j.upper);
    }
  }
}

}  // namespace

double pose_distance(const Transform& a, const Transform& b, const DistanceWeights& w) {
  const double translation_mm = (a.translation() - b.translation()).norm() * 1000.0;
  const double rotation_deg = rad_to_deg(rotation_angle_between(a.linear(), b.linear()));
  return translation_mm * w.points_per_mm + rotation_deg * w.points_per_deg;
}

Eigen::Matrix<double, 6, Eigen::Dynamic> geometric_jacobian(const RobotModel& model,
                                                            std::span<const double> q) {
  const int n = model.joint_count();
  thread_local std::vector<Transform> frames;
  model.link_frames(q, frames);
  const Vec3 p_tcp = frames[static_cast<std::size_t>(n) + 1].translation();

  Eigen::Matrix<double, 6, Eigen::Dynamic> jac(6, n);
  for (int i = 0; i < n; ++i) {
    // Joint i's axis expressed in the base frame. frames[i+1] already
    // includes the joint rotation, which leaves the axis itself unchanged.
    const Transform& frame = frames[static_cast<std::size_t>(i) + 1];
    const Vec3 axis_world = frame.linear() * model.joints()[static_cast<std::size_t>(i)].axis;
    const Vec3 arm = p_tcp - frame.translation();
    jac.block<3, 1>(0, i) = axis_world.cross(arm);
    jac.block<3, 1>(3, i) = axis_world;
  }
  return jac;
}

IkResult solve_ik(const RobotModel& model, const Transform& target, Rng& rng,
                  const IkSettings& settings) {
  IkResult result;
  result.distance = std::numeric_limits<double>::infinity();

  // No FK position can be further from the base than the chain length, so a
  // target beyond reach_bound + threshold can never be matched.
  const double excess_m =
      target.translation().norm() - model.reach_bound();
  if (excess_m * 1000.0 * settings.weights.points_per_mm > settings.weights.threshold) {
    result.distance = excess_m * 1000.0 * settings.weights.points_per_mm;
    return result;
  }

  const int n = model.joint_count();
  Eigen::VectorXd q(n), q_try(n);
  Eigen::Matrix<double, 6, 1> error;
  thread_local std::vector<Transform> frames;

  for (int attempt = 1; attempt <= settings.max_attempts; ++attempt) {
    result.attempts_used = attempt;
    {
      const JointConfig start = model.sample_config(rng);
      for (int i = 0; i < n; ++i) q[i] = start[static_cast<std::size_t>(i)];
    }

    Transform current = model.forward_kinematics(std::span<const double>(q.data(), q.size()));
    double current_dist = pose_distance(current, target, settings.weights);
    double lambda = settings.lambda_init;

    for (int iter = 0; iter < settings.max_iterations; ++iter) {
      if (current_dist <= settings.weights.threshold) break;

      error.head<3>() = target.translation() - current.translation();
      error.tail<3>() = rotation_error(target.linear(), current.linear());

      const auto jac = geometric_jacobian(model, std::span<const double>(q.data(), q.size()));
      Eigen::Matrix<double, 6, 6> jjt = jac * jac.transpose();
      jjt.diagonal().array() += lambda * lambda;
      const Eigen::VectorXd dq = jac.transpose() * jjt.ldlt().solve(error);

      if (dq.norm() < settings.step_tolerance) break;

      q_try = q + dq;
      clamp_to_limits(model, q_try);
      const Transform pose_try =
          model.forward_kinematics(std::span<const double>(q_try.data(), q_try.size()));
      const double dist_try = pose_distance(pose_try, target, settings.weights);

      if (dist_try < current_dist) {
        q = q_try;
        current = pose_try;
        current_dist = dist_try;
        lambda = std::max(settings.lambda_min, lambda * 0.5);
      } else {
        lambda = std::min(settings.lambda_max, lambda * 2.0);
        if (lambda >= settings.lambda_max) break;  // stuck in a local minimum
      }
    }

    result.distance = std::min(result.distance, current_dist);
    if (current_dist <= settings.weights.threshold) {
      std::vector<double> values(q.data(), q.data() + n);
      if (model.within_limits(values) && model.is_valid(std::span<const double>(values))) {
        result.reachable = true;
        result.config = model.make_config(std::move(values));
        result.distance = current_dist;
        return result;
      }
    }
  }
  return result;
}

}  // namespace rm4d
