#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>

#include "rm4d/geometry.hpp"

namespace rm4d {

class RobotModel;

/// Reduced 4D coordinates of a TCP pose: height, polar angle of the approach
/// vector, and the canonical base position obtained by translating the TCP
/// onto the z-axis and yawing the approach vector into the x(+)z half-plane.
struct Canonical4 {
  double p_z = 0.0;
  double theta = 0.0;   // [0, pi]
  double x_star = 0.0;
  double y_star = 0.0;
};

/// Discretization parameters P = (r_xy, r_z, l_c, delta_theta).
struct GridParams {
  double r_xy = 0.0;
  double r_z = 0.0;
  double l_c = 0.0;
  double delta_theta = 0.0;

  int n_xy() const { return grid_count(2.0 * r_xy, l_c); }
  int n_z() const { return grid_count(r_z, l_c); }
  int n_theta() const { return grid_count(kPi, delta_theta); }

  void validate() const {
    if (!(r_xy > 0.0) || !(r_z > 0.0) || !(l_c > 0.0) || !(delta_theta > 0.0)) {
      throw std::invalid_argument("grid params must be positive");
    }
    if (n_xy() < 1 || n_z() < 1 || n_theta() < 1) {
      throw std::invalid_argument("grid params give an empty grid");
    }
  }

  /// Grid params for a robot's workspace. Reach values that came from the
  /// sum-of-link-lengths fallback are rounded up to the next l_c multiple so
  /// the grid edge coincides with the nominal reach.
  static GridParams for_robot(const RobotModel& model, double l_c, double delta_theta);

  /// ceil(extent / step) robust against the quotient landing a few ulps
  /// above an integer (e.g. 2*1.05/0.05).
  static int grid_count(double extent, double step) {
    const double q = extent / step;
    const double r = std::round(q);
    if (std::abs(q - r) < 1e-9 * std::max(1.0, std::abs(q))) return static_cast<int>(r);
    return static_cast<int>(std::ceil(q));
  }

  bool operator==(const GridParams&) const = default;
};

struct MapIndex4 {
  int i_pz = 0;
  int i_theta = 0;
  int i_x = 0;
  int i_y = 0;

  bool operator==(const MapIndex4&) const = default;
};

/// Heading of the approach vector's horizontal projection, atan2(r_zy, r_zx)
/// in [-pi, pi]. Returns 0 when the approach vector is vertical within 1e-12.
double azimuth(const Transform& tcp);
double azimuth(const Mat3& rotation);

/// The 6D -> 4D reduction. Quotients out base yaw and tool roll about the
/// approach axis; see the invariance property tests.
Canonical4 canonicalize(const Transform& tcp);

/// Half-open binning i = floor((v - v_min) / step); the top boundary value
/// falls into the last bin. Out-of-range coordinates yield nullopt.
std::optional<MapIndex4> try_discretize(const Canonical4& c, const GridParams& params);

/// As try_discretize but out-of-range input throws std::out_of_range.
MapIndex4 discretize(const Canonical4& c, const GridParams& params);

/// Center coordinates of cell (i_x, i_y) in the canonical base plane.
Vec2 undiscretize_xy(int i_x, int i_y, const GridParams& params);

/// Rotates a canonical base position forward by the pose's azimuth and adds
/// the TCP position: the inverse of the canonicalization's xy part.
Vec2 recover_base(double x_star, double y_star, const Transform& tcp_world);

}  // namespace rm4d
