#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "rm4d/geometry.hpp"
#include "rm4d/reach_map.hpp"
#include "rm4d/rng.hpp"

namespace rm4d {

/// World-frame end-effector target poses for one object.
struct GraspSet {
  std::string object_id;
  std::vector<Transform> poses;
};

// Grasp pose CSV: object_id followed by 12 transform values (rotation
// row-major, then position). Rows are grouped into one GraspSet per object.
std::vector<GraspSet> load_grasp_sets(std::istream& in);
std::vector<GraspSet> load_grasp_sets_file(const std::string& path);
void save_grasp_sets(std::span<const GraspSet> sets, std::ostream& out);
void save_grasp_sets_file(std::span<const GraspSet> sets, const std::string& path);

/// Random approach poses around an object center: approach directions point
/// inward from a surrounding sphere cap, the way antipodal grasp candidates
/// cluster around small objects.
GraspSet synthesize_grasps(const std::string& object_id, const Vec3& center, int count, Rng& rng,
                           double standoff = 0.0);

struct PlacementGridSpec {
  double origin_x = 0.0;  // lower corner of cell (0, 0)
  double origin_y = 0.0;
  double cell = 0.05;
  int nx = 0;
  int ny = 0;

  void validate() const {
    if (!(cell > 0.0)) throw std::invalid_argument("placement cell size must be positive");
    if (nx <= 0 || ny <= 0) throw std::invalid_argument("placement grid is empty");
  }

  bool operator==(const PlacementGridSpec&) const = default;

  /// Grid covering every base position that could reach any of the given
  /// poses: bounding box of the pose xy positions inflated by the map reach.
  static PlacementGridSpec covering(std::span<const GraspSet> sets, double reach_xy, double cell);
};

/// 2D integer grid of reachable-candidate counts per base cell.
class PlacementGrid {
 public:
  explicit PlacementGrid(const PlacementGridSpec& spec)
      : spec_(spec), counts_(static_cast<std::size_t>(spec.nx) * spec.ny, 0) {
    spec_.validate();
  }

  const PlacementGridSpec& spec() const { return spec_; }
  std::uint32_t at(int ix, int iy) const {
    return counts_[static_cast<std::size_t>(iy) * spec_.nx + ix];
  }
  std::uint32_t& at(int ix, int iy) { return counts_[static_cast<std::size_t>(iy) * spec_.nx + ix]; }

  /// Cell containing (x, y), or false when outside the grid.
  bool cell_of(double x, double y, int& ix, int& iy) const;
  Vec2 cell_center(int ix, int iy) const {
    return Vec2(spec_.origin_x + (ix + 0.5) * spec_.cell, spec_.origin_y + (iy + 0.5) * spec_.cell);
  }

  const std::vector<std::uint32_t>& counts() const { return counts_; }
  std::vector<std::uint32_t>& counts() { return counts_; }

 private:
  PlacementGridSpec spec_;
  std::vector<std::uint32_t> counts_;
};

/// Inverse-queries every grasp pose and counts, per base cell, how many
/// grasps are reachable from it. A grasp increments a cell at most once even
/// if several map cells land in the same placement cell.
PlacementGrid aggregate_inverse(const ReachGrid4D& map, const GraspSet& grasps,
                                const PlacementGridSpec& spec, int threads = 1);

/// Elementwise minimum; all grids must share one spec.
PlacementGrid combine_min(std::span<const PlacementGrid> grids);

struct BestPlacement {
  bool feasible = false;
  int ix = 0, iy = 0;
  double x = 0.0, y = 0.0;  // cell center
  std::uint32_t score = 0;
};

/// Argmax cell center; ties break toward the smallest (ix, iy)
/// lexicographically. An all-zero grid has no feasible placement.
BestPlacement select_best(const PlacementGrid& grid);

/// Indices of the grasps whose forward query succeeds with the robot base
/// moved to (base_x, base_y, 0). Base heading is irrelevant: the canonical
/// mapping is invariant to it.
std::vector<std::size_t> filter_reachable(const ReachGrid4D& map, const Vec2& base,
                                          const GraspSet& grasps);

// Placement grid CSV matrix (row iy per line) plus a JSON sidecar with
// origin, cell size, argmax, and score.
void save_placement_csv(const PlacementGrid& grid, std::ostream& out);
void save_placement_json(const PlacementGrid& grid, const BestPlacement& best, std::ostream& out);

}  // namespace rm4d
