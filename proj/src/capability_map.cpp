#include "rm4d/capability_map.hpp"

#include <cmath>

namespace rm4d {
namespace {

// Golden angle, the azimuth increment of the spiral.
const double kGoldenAngle = kPi * (3.0 - std::sqrt(5.0));

Vec3 reference_for(const Vec3& d) {
  // World x projected onto the plane orthogonal to d; world y when d is too
  // close to +/-x for the projection to be stable.
  Vec3 seed = Vec3::UnitX();
  Vec3 ref = seed - seed.dot(d) * d;
  if (ref.norm() < 1e-6) {
    seed = Vec3::UnitY();
    ref = seed - seed.dot(d) * d;
  }
  return ref.normalized();
}

}  // namespace

SphereDirections SphereDirections::make(int count) {
  if (count < 1) throw std::invalid_argument("direction count must be >= 1");
  SphereDirections out;
  out.dirs_.reserve(static_cast<std::size_t>(count));
  out.refs_.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    // z runs from +1 to -1 inclusive; count == 1 degenerates to the +z pole.
    const double z = count == 1 ? 1.0 : 1.0 - 2.0 * k / (count - 1);
    const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = k * kGoldenAngle;
    out.dirs_.emplace_back(rho * std::cos(phi), rho * std::sin(phi), z);
  }
  for (const Vec3& d : out.dirs_) out.refs_.push_back(reference_for(d));
  return out;
}

int SphereDirections::nearest(const Vec3& v) const {
  int best = 0;
  double best_dot = dirs_[0].dot(v);
  for (int i = 1; i < count(); ++i) {
    const double d = dirs_[static_cast<std::size_t>(i)].dot(v);
    if (d > best_dot) {
      best_dot = d;
      best = i;
    }
  }
  return best;
}

std::pair<int, int> so3_to_bin(const Mat3& rotation, const SphereDirections& dirs, int n_inplane) {
  const Vec3 approach = rotation.col(2);
  const int dir_index = dirs.nearest(approach);
  if (n_inplane == 1) return {dir_index, 0};

  const Vec3& d = dirs.direction(dir_index);
  const Vec3& ref = dirs.reference(dir_index);

  // Roll of the tool x-axis about the matched direction, measured from the
  // direction's fixed reference vector.
  Vec3 u = rotation.col(0) - rotation.col(0).dot(d) * d;
  if (u.norm() < 1e-9) {
    u = rotation.col(1) - rotation.col(1).dot(d) * d;  // tool x parallel to d
  }
  u.normalize();
  double phi = std::atan2(d.dot(ref.cross(u)), ref.dot(u));
  if (phi < 0.0) phi += 2.0 * kPi;

  int roll_index = static_cast<int>(std::floor(phi / (2.0 * kPi / n_inplane)));
  if (roll_index >= n_inplane) roll_index = n_inplane - 1;  // phi == 2*pi wrap
  return {dir_index, roll_index};
}

CapabilityGrid::CapabilityGrid(const CapabilityParams& params, std::uint64_t cell_cap)
    : params_(params), dirs_(SphereDirections::make(params.n_dirs)) {
  params_.validate();
  n_xy_ = params_.n_xy();
  n_z_ = params_.n_z();
  const std::uint64_t cells = static_cast<std::uint64_t>(n_xy_) * n_xy_ * n_z_ *
                              static_cast<std::uint64_t>(params_.n_dirs) * params_.n_inplane;
  if (cells > cell_cap) {
    throw std::invalid_argument("capability grid would need " + std::to_string(cells) +
                                " cells, above the cap of " + std::to_string(cell_cap));
  }
  bits_ = BitArray(cells);
}

bool CapabilityGrid::cell_of(const Transform& tcp, std::uint64_t& cell) const {
  const Vec3& p = tcp.translation();
  if (p.x() < -params_.r_xy || p.x() > params_.r_xy) return false;
  if (p.y() < -params_.r_xy || p.y() > params_.r_xy) return false;
  if (p.z() < 0.0 || p.z() > params_.r_z) return false;

  auto bin = [](double v, double v_min, double step, int count) {
    int i = static_cast<int>(std::floor((v - v_min) / step));
    if (i == count) i = count - 1;
    return i;
  };
  const int ix = bin(p.x(), -params_.r_xy, params_.l_c, n_xy_);
  const int iy = bin(p.y(), -params_.r_xy, params_.l_c, n_xy_);
  const int iz = bin(p.z(), 0.0, params_.l_c, n_z_);
  if (ix < 0 || ix >= n_xy_ || iy < 0 || iy >= n_xy_ || iz < 0 || iz >= n_z_) return false;

  const auto [dir_index, roll_index] = so3_to_bin(tcp.linear(), dirs_, params_.n_inplane);
  cell = (((static_cast<std::uint64_t>(iz) * n_xy_ + ix) * n_xy_ + iy) *
              static_cast<std::uint64_t>(params_.n_dirs) +
          static_cast<std::uint64_t>(dir_index)) *
             static_cast<std::uint64_t>(params_.n_inplane) +
         static_cast<std::uint64_t>(roll_index);
  return true;
}

bool CapabilityGrid::mark(const Transform& tcp) {
  std::uint64_t cell = 0;
  if (!cell_of(tcp, cell)) {
    out_of_range_.fetch_add(1, std::memory_order_relaxed);
    return false;
  }
  if (bits_.set_atomic(cell)) {
    marked_.fetch_add(1, std::memory_order_relaxed);
    return true;
  }
  return false;
}

bool CapabilityGrid::query_forward(const Transform& tcp) const {
  std::uint64_t cell = 0;
  if (!cell_of(tcp, cell)) return false;
  return bits_.test(cell);
}

}  // namespace rm4d
