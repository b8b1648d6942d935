#pragma once

#include <optional>
#include <span>

#include "rm4d/geometry.hpp"
#include "rm4d/rng.hpp"
#include "rm4d/robot_model.hpp"

namespace rm4d {

/// Combined pose distance weighting: 1 mm of translation and 1 degree of
/// rotation each cost one point; 25 points is the reachability threshold.
struct DistanceWeights {
  double points_per_mm = 1.0;
  double points_per_deg = 1.0;
  double threshold = 25.0;
};

/// ||p_a - p_b|| in mm plus the geodesic rotation angle in degrees, weighted.
double pose_distance(const Transform& a, const Transform& b, const DistanceWeights& w = {});

struct IkResult {
  bool reachable = false;
  std::optional<JointConfig> config;
  double distance = 0.0;  // accepted solution's distance, or best seen on failure
  int attempts_used = 0;
};

struct IkSettings {
  int max_attempts = 100;
  int max_iterations = 200;     // per attempt
  double lambda_init = 0.1;     // damping, adapted multiplicatively
  double lambda_min = 1e-4;
  double lambda_max = 1e3;
  double step_tolerance = 1e-6;  // converged when ||dq|| drops below this
  DistanceWeights weights{};
};

/// Geometric Jacobian of the TCP: column i is [z_i x (p_tcp - p_i); z_i] for
/// revolute joint i, all in the base frame.
Eigen::Matrix<double, 6, Eigen::Dynamic> geometric_jacobian(const RobotModel& model,
                                                            std::span<const double> q);

/// Damped-least-squares IK with random restarts. Accepts the first joint
/// configuration that is within limits, collision-free, and within the
/// distance threshold (inclusive) of the target. Failure after max_attempts
/// is a valid labeled outcome, not an error.
IkResult solve_ik(const RobotModel& model, const Transform& target, Rng& rng,
                  const IkSettings& settings = {});

}  // namespace rm4d
