#include "rm4d/canonical.hpp"

#include <cmath>

#include "rm4d/robot_model.hpp"

namespace rm4d {
namespace {

constexpr double kDegenerateAzimuth = 1e-12;

double round_up_to_multiple(double v, double step) {
  const int n = GridParams::grid_count(v, step);
  return n * step;
}

int bin_index(double v, double v_min, double step, int count) {
  const int i = static_cast<int>(std::floor((v - v_min) / step));
  if (i == count) return count - 1;  // top boundary clamps into the last bin
  return i;
}

}  // namespace

GridParams GridParams::for_robot(const RobotModel& model, double l_c, double delta_theta) {
  GridParams p;
  p.l_c = l_c;
  p.delta_theta = delta_theta;
  if (model.reach_is_explicit()) {
    p.r_xy = model.reach_xy();
    p.r_z = model.reach_z();
  } else {
    p.r_xy = round_up_to_multiple(model.reach_xy(), l_c);
    p.r_z = round_up_to_multiple(model.reach_z(), l_c);
  }
  p.validate();
  return p;
}

double azimuth(const Mat3& rotation) {
  const double rzx = rotation(0, 2);
  const double rzy = rotation(1, 2);
  if (std::abs(rzx) < kDegenerateAzimuth && std::abs(rzy) < kDegenerateAzimuth) {
    return 0.0;  // vertical approach: heading undefined, fixed by convention
  }
  return std::atan2(rzy, rzx);
}

double azimuth(const Transform& tcp) { return azimuth(tcp.linear()); }

Canonical4 canonicalize(const Transform& tcp) {
  Canonical4 c;
  c.p_z = tcp.translation().z();
  c.theta = std::acos(std::clamp(tcp.linear()(2, 2), -1.0, 1.0));

  const double psi = azimuth(tcp);
  const double cos_psi = std::cos(psi);
  const double sin_psi = std::sin(psi);
  const double nx = -tcp.translation().x();
  const double ny = -tcp.translation().y();
  // Rotation by -psi applied to the intermediate base position (-p_x, -p_y).
  c.x_star = cos_psi * nx + sin_psi * ny;
  c.y_star = -sin_psi * nx + cos_psi * ny;
  return c;
}

std::optional<MapIndex4> try_discretize(const Canonical4& c, const GridParams& params) {
  if (c.p_z < 0.0 || c.p_z > params.r_z) return std::nullopt;
  if (c.theta < 0.0 || c.theta > kPi) return std::nullopt;
  if (c.x_star < -params.r_xy || c.x_star > params.r_xy) return std::nullopt;
  if (c.y_star < -params.r_xy || c.y_star > params.r_xy) return std::nullopt;

  MapIndex4 idx;
  idx.i_pz = bin_index(c.p_z, 0.0, params.l_c, params.n_z());
  idx.i_theta = bin_index(c.theta, 0.0, params.delta_theta, params.n_theta());
  idx.i_x = bin_index(c.x_star, -params.r_xy, params.l_c, params.n_xy());
  idx.i_y = bin_index(c.y_star, -params.r_xy, params.l_c, params.n_xy());

  // Top clamp handles v == v_max; anything past the last bin is a cell the
  // grid does not cover.
  if (idx.i_pz < 0 || idx.i_pz >= params.n_z()) return std::nullopt;
  if (idx.i_theta < 0 || idx.i_theta >= params.n_theta()) return std::nullopt;
  if (idx.i_x < 0 || idx.i_x >= params.n_xy()) return std::nullopt;
  if (idx.i_y < 0 || idx.i_y >= params.n_xy()) return std::nullopt;
  return idx;
}

MapIndex4 discretize(const Canonical4& c, const GridParams& params) {
  auto idx = try_discretize(c, params);
  if (!idx) throw std::out_of_range("canonical coordinates outside the grid range");
  return *idx;
}

Vec2 undiscretize_xy(int i_x, int i_y, const GridParams& params) {
  if (i_x < 0 || i_x >= params.n_xy() || i_y < 0 || i_y >= params.n_xy()) {
    throw std::out_of_range("cell index outside the grid");
  }
  return Vec2(-params.r_xy + (i_x + 0.5) * params.l_c, -params.r_xy + (i_y + 0.5) * params.l_c);
}

Vec2 recover_base(double x_star, double y_star, const Transform& tcp_world) {
  const double psi = azimuth(tcp_world);
  const double cos_psi = std::cos(psi);
  const double sin_psi = std::sin(psi);
  return Vec2(cos_psi * x_star - sin_psi * y_star + tcp_world.translation().x(),
              sin_psi * x_star + cos_psi * y_star + tcp_world.translation().y());
}

}  // namespace rm4d
