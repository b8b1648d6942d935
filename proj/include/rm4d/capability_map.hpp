#pragma once

#include <atomic>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rm4d/bit_array.hpp"
#include "rm4d/canonical.hpp"
#include "rm4d/geometry.hpp"
#include "rm4d/reach_map.hpp"

namespace rm4d {

/// Deterministic quasi-uniform approach directions on the unit sphere
/// (generalized spiral: endpoints at the poles, golden-angle azimuth steps).
/// Each direction carries a fixed reference vector for in-plane binning.
class SphereDirections {
 public:
  static SphereDirections make(int count);

  int count() const { return static_cast<int>(dirs_.size()); }
  const std::vector<Vec3>& directions() const { return dirs_; }
  const Vec3& direction(int i) const { return dirs_[static_cast<std::size_t>(i)]; }
  const Vec3& reference(int i) const { return refs_[static_cast<std::size_t>(i)]; }

  /// Index of the direction with the largest dot product against v.
  int nearest(const Vec3& v) const;

 private:
  std::vector<Vec3> dirs_;
  std::vector<Vec3> refs_;
};

/// (approach-direction bin, in-plane-rotation bin) of a rotation matrix.
/// n_inplane == 1 collapses the roll, giving the 5D map variant.
std::pair<int, int> so3_to_bin(const Mat3& rotation, const SphereDirections& dirs, int n_inplane);

struct CapabilityParams {
  double r_xy = 0.0;
  double r_z = 0.0;
  double l_c = 0.0;
  int n_dirs = 200;
  int n_inplane = 12;

  int n_xy() const { return GridParams::grid_count(2.0 * r_xy, l_c); }
  int n_z() const { return GridParams::grid_count(r_z, l_c); }

  void validate() const {
    if (!(r_xy > 0.0) || !(r_z > 0.0) || !(l_c > 0.0)) {
      throw std::invalid_argument("capability grid extents must be positive");
    }
    if (n_dirs < 1 || n_inplane < 1) {
      throw std::invalid_argument("capability grid needs at least one direction and roll bin");
    }
  }

  bool operator==(const CapabilityParams&) const = default;
};

/// Baseline capability map: 3D position voxels x approach-direction bins x
/// in-plane-rotation bins, with the same marking/query contract as the 4D map.
class CapabilityGrid final : public ReachabilityMap {
 public:
  explicit CapabilityGrid(const CapabilityParams& params,
                          std::uint64_t cell_cap = kDefaultCellCap);

  CapabilityGrid(const CapabilityGrid& other)
      : robot_name(other.robot_name),
        sample_count(other.sample_count),
        params_(other.params_),
        n_xy_(other.n_xy_),
        n_z_(other.n_z_),
        dirs_(other.dirs_),
        bits_(other.bits_),
        marked_(other.marked_.load()),
        out_of_range_(other.out_of_range_.load()) {}
  CapabilityGrid(CapabilityGrid&& other) noexcept
      : robot_name(std::move(other.robot_name)),
        sample_count(other.sample_count),
        params_(other.params_),
        n_xy_(other.n_xy_),
        n_z_(other.n_z_),
        dirs_(std::move(other.dirs_)),
        bits_(std::move(other.bits_)),
        marked_(other.marked_.load()),
        out_of_range_(other.out_of_range_.load()) {}
  CapabilityGrid& operator=(const CapabilityGrid&) = delete;

  const CapabilityParams& params() const { return params_; }
  const SphereDirections& sphere_directions() const { return dirs_; }

  std::uint64_t cell_count() const override { return bits_.size(); }
  std::uint64_t marked_count() const override { return marked_.load(std::memory_order_relaxed); }
  std::uint64_t out_of_range_marks() const override {
    return out_of_range_.load(std::memory_order_relaxed);
  }
  double extent_xy() const override { return params_.r_xy; }
  double extent_z() const override { return params_.r_z; }
  const char* type_name() const override { return params_.n_inplane == 1 ? "zach5d" : "zach6d"; }

  bool mark(const Transform& tcp) override;
  bool query_forward(const Transform& tcp) const override;

  const BitArray& bits() const { return bits_; }
  BitArray& bits() { return bits_; }
  void reconcile_marked_count() { marked_.store(bits_.popcount(), std::memory_order_relaxed); }

  std::string robot_name;
  std::uint64_t sample_count = 0;

  bool operator==(const CapabilityGrid& other) const {
    return params_ == other.params_ && bits_ == other.bits_ && robot_name == other.robot_name &&
           sample_count == other.sample_count;
  }

 private:
  bool cell_of(const Transform& tcp, std::uint64_t& cell) const;

  CapabilityParams params_;
  int n_xy_ = 0, n_z_ = 0;
  SphereDirections dirs_;
  BitArray bits_;
  std::atomic<std::uint64_t> marked_{0};
  std::atomic<std::uint64_t> out_of_range_{0};
};

}  // namespace rm4d
