#include "rm4d/reach_map.hpp"

namespace rm4d {

ReachGrid4D::ReachGrid4D(const GridParams& params, std::uint64_t cell_cap, bool with_visit_counts)
    : params_(params) {
  params_.validate();
  n_xy_ = params_.n_xy();
  n_z_ = params_.n_z();
  n_theta_ = params_.n_theta();
  const std::uint64_t cells = static_cast<std::uint64_t>(n_z_) * n_theta_ *
                              static_cast<std::uint64_t>(n_xy_) * n_xy_;
  if (cells > cell_cap) {
    throw std::invalid_argument("grid would need " + std::to_string(cells) +
                                " cells, above the cap of " + std::to_string(cell_cap));
  }
  bits_ = BitArray(cells);
  if (with_visit_counts) visit_counts_.assign(cells, 0);
}

bool ReachGrid4D::mark(const Transform& tcp) {
  const auto idx = try_discretize(canonicalize(tcp), params_);
  if (!idx) {
    out_of_range_.fetch_add(1, std::memory_order_relaxed);
    return false;
  }
  const std::uint64_t cell = linear_index(*idx);
  if (!visit_counts_.empty()) {
    std::atomic_ref<std::uint32_t>(visit_counts_[cell]).fetch_add(1, std::memory_order_relaxed);
  }
  if (bits_.set_atomic(cell)) {
    marked_.fetch_add(1, std::memory_order_relaxed);
    return true;
  }
  return false;
}

bool ReachGrid4D::set_index(const MapIndex4& idx) {
  if (bits_.set_atomic(linear_index(idx))) {
    marked_.fetch_add(1, std::memory_order_relaxed);
    return true;
  }
  return false;
}

bool ReachGrid4D::query_forward(const Transform& tcp) const {
  const auto idx = try_discretize(canonicalize(tcp), params_);
  if (!idx) return false;  // outside the grid is unreachable by definition
  return bits_.test(linear_index(*idx));
}

ReachGrid4D::InverseResult ReachGrid4D::query_inverse(const Transform& tcp_world) const {
  InverseResult result;
  result.tcp = tcp_world;

  const double p_z = tcp_world.translation().z();
  const double theta = std::acos(std::clamp(tcp_world.linear()(2, 2), -1.0, 1.0));
  // Only (p_z, theta) are needed to locate the slice; the xy part of the
  // canonicalization is what the slice enumerates.
  Canonical4 probe{p_z, theta, 0.0, 0.0};
  const auto idx = try_discretize(probe, params_);
  if (!idx) {
    result.out_of_range = true;
    return result;
  }

  const double psi = azimuth(tcp_world);
  const double cos_psi = std::cos(psi);
  const double sin_psi = std::sin(psi);
  const double px = tcp_world.translation().x();
  const double py = tcp_world.translation().y();

  const std::uint64_t slice_base =
      (static_cast<std::uint64_t>(idx->i_pz) * n_theta_ + idx->i_theta) *
      static_cast<std::uint64_t>(n_xy_) * n_xy_;
  for (int ix = 0; ix < n_xy_; ++ix) {
    for (int iy = 0; iy < n_xy_; ++iy) {
      if (!bits_.test(slice_base + static_cast<std::uint64_t>(ix) * n_xy_ + iy)) continue;
      const Vec2 star = undiscretize_xy(ix, iy, params_);
      result.base_positions.emplace_back(cos_psi * star.x() - sin_psi * star.y() + px,
                                         sin_psi * star.x() + cos_psi * star.y() + py);
    }
  }
  return result;
}

}  // namespace rm4d
