#pragma once

#include <atomic>
#include <cstdint>
#include <string>
#include <vector>

#include "rm4d/bit_array.hpp"
#include "rm4d/canonical.hpp"
#include "rm4d/geometry.hpp"

namespace rm4d {

/// Common surface of the 4D map and the baseline capability maps, shared by
/// the construction and evaluation drivers. Marking is thread-safe; queries
/// on a finished map are read-only and freely shareable.
class ReachabilityMap {
 public:
  virtual ~ReachabilityMap() = default;

  /// Marks the cell of a base-frame TCP pose. Returns whether the cell
  /// transitioned 0 -> 1. Out-of-range poses are counted, not fatal.
  virtual bool mark(const Transform& tcp) = 0;
  virtual bool query_forward(const Transform& tcp) const = 0;

  virtual std::uint64_t cell_count() const = 0;
  virtual std::uint64_t marked_count() const = 0;
  virtual std::uint64_t out_of_range_marks() const = 0;

  // Workspace extents the grid covers; construction rejects maps that do not
  // enclose the robot's declared reach.
  virtual double extent_xy() const = 0;
  virtual double extent_z() const = 0;

  virtual const char* type_name() const = 0;
};

/// Guard against absurd grid parameters; ~512 MiB of cells.
inline constexpr std::uint64_t kDefaultCellCap = 1ULL << 32;

/// The 4D bit grid over (p_z, theta, x*, y*). Layout keeps (i_x, i_y)
/// innermost so an inverse query reads one contiguous 2D slice.
class ReachGrid4D final : public ReachabilityMap {
 public:
  /// with_visit_counts enables a parallel per-cell visit counter for
  /// construction diagnostics; the reachability payload stays 1 bit per cell.
  explicit ReachGrid4D(const GridParams& params, std::uint64_t cell_cap = kDefaultCellCap,
                       bool with_visit_counts = false);

  ReachGrid4D(const ReachGrid4D& other)
      : robot_name(other.robot_name),
        sample_count(other.sample_count),
        params_(other.params_),
        n_xy_(other.n_xy_),
        n_z_(other.n_z_),
        n_theta_(other.n_theta_),
        bits_(other.bits_),
        marked_(other.marked_.load()),
        out_of_range_(other.out_of_range_.load()),
        visit_counts_(other.visit_counts_) {}
  ReachGrid4D(ReachGrid4D&& other) noexcept
      : robot_name(std::move(other.robot_name)),
        sample_count(other.sample_count),
        params_(other.params_),
        n_xy_(other.n_xy_),
        n_z_(other.n_z_),
        n_theta_(other.n_theta_),
        bits_(std::move(other.bits_)),
        marked_(other.marked_.load()),
        out_of_range_(other.out_of_range_.load()),
        visit_counts_(std::move(other.visit_counts_)) {}
  ReachGrid4D& operator=(const ReachGrid4D&) = delete;

  const GridParams& params() const { return params_; }
  int n_xy() const { return n_xy_; }
  int n_z() const { return n_z_; }
  int n_theta() const { return n_theta_; }

  std::uint64_t cell_count() const override { return bits_.size(); }
  std::uint64_t marked_count() const override {
    return marked_.load(std::memory_order_relaxed);
  }
  std::uint64_t out_of_range_marks() const override {
    return out_of_range_.load(std::memory_order_relaxed);
  }
  double extent_xy() const override { return params_.r_xy; }
  double extent_z() const override { return params_.r_z; }
  const char* type_name() const override { return "rm4d"; }

  bool mark(const Transform& tcp) override;
  bool query_forward(const Transform& tcp) const override;

  struct InverseResult {
    Transform tcp = Transform::Identity();  // the queried world pose
    std::vector<Vec2> base_positions;
    bool out_of_range = false;
  };

  /// All base positions from which the world-frame TCP pose is reachable:
  /// scans the (i_pz, i_theta) slice, converts set cells to cell-center
  /// canonical coordinates, and rotates them into the world frame.
  InverseResult query_inverse(const Transform& tcp_world) const;

  std::uint64_t linear_index(const MapIndex4& idx) const {
    return ((static_cast<std::uint64_t>(idx.i_pz) * n_theta_ + idx.i_theta) * n_xy_ + idx.i_x) *
               n_xy_ +
           idx.i_y;
  }

  bool test_index(const MapIndex4& idx) const { return bits_.test(linear_index(idx)); }
  bool set_index(const MapIndex4& idx);

  const BitArray& bits() const { return bits_; }
  BitArray& bits() { return bits_; }

  /// Recomputes marked_count from the bit array (used after deserialization
  /// and at checkpoint barriers).
  void reconcile_marked_count() { marked_.store(bits_.popcount(), std::memory_order_relaxed); }

  bool has_visit_counts() const { return !visit_counts_.empty(); }
  std::uint32_t visit_count(const MapIndex4& idx) const {
    return visit_counts_.at(linear_index(idx));
  }

  // Header metadata carried through the map file.
  std::string robot_name;
  std::uint64_t sample_count = 0;

  bool operator==(const ReachGrid4D& other) const {
    return params_ == other.params_ && bits_ == other.bits_ && robot_name == other.robot_name &&
           sample_count == other.sample_count;
  }

 private:
  GridParams params_;
  int n_xy_ = 0, n_z_ = 0, n_theta_ = 0;
  BitArray bits_;
  std::atomic<std::uint64_t> marked_{0};
  std::atomic<std::uint64_t> out_of_range_{0};
  std::vector<std::uint32_t> visit_counts_;  // empty unless diagnostics requested
};

}  // namespace rm4d
