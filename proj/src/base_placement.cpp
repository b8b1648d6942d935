#include "rm4d/base_placement.hpp"

#include "rm4d/threads.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace rm4d {
namespace {

Transform parse_pose_fields(std::span<const double> v) {
  Transform pose = Transform::Identity();
  Mat3 r;
  r << v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8];
  pose.linear() = r;
  pose.translation() = Vec3(v[9], v[10], v[11]);
  return pose;
}

}  // namespace

std::vector<GraspSet> load_grasp_sets(std::istream& in) {
  std::vector<GraspSet> sets;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line.rfind("object_id", 0) == 0) continue;  // optional header
    }
    std::stringstream ss(line);
    std::string object_id, field;
    if (!std::getline(ss, object_id, ',')) continue;
    std::array<double, 12> v{};
    for (int k = 0; k < 12; ++k) {
      if (!std::getline(ss, field, ',')) {
        throw std::runtime_error("grasp row has too few columns: " + line);
      }
      try {
        v[static_cast<std::size_t>(k)] = std::stod(field);
      } catch (const std::exception&) {
        throw std::runtime_error("malformed grasp row: " + line);
      }
    }
    if (sets.empty() || sets.back().object_id != object_id) {
      auto it = std::find_if(sets.begin(), sets.end(),
                             [&](const GraspSet& s) { return s.object_id == object_id; });
      if (it != sets.end()) {
        it->poses.push_back(parse_pose_fields(v));
        continue;
      }
      sets.push_back(GraspSet{object_id, {}});
    }
    sets.back().poses.push_back(parse_pose_fields(v));
  }
  return sets;
}

std::vector<GraspSet> load_grasp_sets_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open grasp file: " + path);
  return load_grasp_sets(in);
}

void save_grasp_sets(std::span<const GraspSet> sets, std::ostream& out) {
  out << "object_id,r00,r01,r02,r10,r11,r12,r20,r21,r22,px,py,pz\n";
  char buf[32];
  for (const auto& set : sets) {
    for (const auto& pose : set.poses) {
      out << set.object_id;
      const Mat3 r = pose.linear();
      const Vec3 p = pose.translation();
      const double fields[12] = {r(0, 0), r(0, 1), r(0, 2), r(1, 0), r(1, 1), r(1, 2),
                                 r(2, 0), r(2, 1), r(2, 2), p.x(),   p.y(),   p.z()};
      for (double f : fields) {
        std::snprintf(buf, sizeof(buf), "%.17g", f);
        out << ',' << buf;
      }
      out << '\n';
    }
  }
}

void save_grasp_sets_file(std::span<const GraspSet> sets, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  save_grasp_sets(sets, out);
}

GraspSet synthesize_grasps(const std::string& object_id, const Vec3& center, int count, Rng& rng,
                           double standoff) {
  GraspSet set;
  set.object_id = object_id;
  set.poses.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    // Approach direction sampled on the sphere, biased away from straight-up
    // approaches (grasps rarely come from below the support surface).
    Vec3 dir;
    do {
      dir = Vec3(rng.normal(), rng.normal(), rng.normal());
    } while (dir.norm() < 1e-9);
    dir.normalize();
    if (dir.z() < -0.2) dir.z() = -dir.z();

    Transform pose = Transform::Identity();
    const Vec3 approach = dir;  // tool z points toward the object
    Vec3 ref = std::abs(approach.z()) > 0.9 ? Vec3::UnitX() : Vec3::UnitZ();
    const Vec3 x_axis = (ref - ref.dot(approach) * approach).normalized();
    const Vec3 y_axis = approach.cross(x_axis);
    Mat3 r;
    r.col(0) = x_axis;
    r.col(1) = y_axis;
    r.col(2) = approach;
    // Random tool roll about the approach axis.
    pose.linear() = r * rot_z(rng.uniform(-kPi, kPi));
    pose.translation() = center - standoff * approach;
    set.poses.push_back(pose);
  }
  return set;
}

PlacementGridSpec PlacementGridSpec::covering(std::span<const GraspSet> sets, double reach_xy,
                                              double cell) {
  double min_x = std::numeric_limits<double>::infinity(), min_y = min_x;
  double max_x = -min_x, max_y = -min_x;
  for (const auto& set : sets) {
    for (const auto& pose : set.poses) {
      min_x = std::min(min_x, pose.translation().x());
      max_x = std::max(max_x, pose.translation().x());
      min_y = std::min(min_y, pose.translation().y());
      max_y = std::max(max_y, pose.translation().y());
    }
  }
  if (!(min_x <= max_x)) throw std::invalid_argument("no grasp poses to cover");

  PlacementGridSpec spec;
  spec.cell = cell;
  spec.origin_x = min_x - reach_xy;
  spec.origin_y = min_y - reach_xy;
  spec.nx = GridParams::grid_count(max_x - min_x + 2.0 * reach_xy, cell);
  spec.ny = GridParams::grid_count(max_y - min_y + 2.0 * reach_xy, cell);
  spec.validate();
  return spec;
}

bool PlacementGrid::cell_of(double x, double y, int& ix, int& iy) const {
  ix = static_cast<int>(std::floor((x - spec_.origin_x) / spec_.cell));
  iy = static_cast<int>(std::floor((y - spec_.origin_y) / spec_.cell));
  return ix >= 0 && ix < spec_.nx && iy >= 0 && iy < spec_.ny;
}

PlacementGrid aggregate_inverse(const ReachGrid4D& map, const GraspSet& grasps,
                                const PlacementGridSpec& spec, int threads) {
  if (grasps.poses.empty()) throw std::invalid_argument("grasp set is empty");
  spec.validate();
  PlacementGrid grid(spec);

  const std::size_t n_cells = static_cast<std::size_t>(spec.nx) * spec.ny;
  const int n_threads = resolve_threads(threads);

  std::mutex merge_mutex;
  std::atomic<std::size_t> next_pose{0};
  auto worker = [&]() {
    PlacementGrid local(spec);
    // Per-pose visit stamps so one grasp increments a cell at most once.
    std::vector<std::uint32_t> stamp(n_cells, 0);
    std::uint32_t generation = 0;
    for (;;) {
      const std::size_t pi = next_pose.fetch_add(1);
      if (pi >= grasps.poses.size()) break;
      ++generation;
      const auto inverse = map.query_inverse(grasps.poses[pi]);
      for (const Vec2& base : inverse.base_positions) {
        int ix = 0, iy = 0;
        if (!local.cell_of(base.x(), base.y(), ix, iy)) continue;
        auto& seen = stamp[static_cast<std::size_t>(iy) * spec.nx + ix];
        if (seen == generation) continue;
        seen = generation;
        ++local.at(ix, iy);
      }
    }
    std::lock_guard<std::mutex> lock(merge_mutex);
    for (std::size_t i = 0; i < n_cells; ++i) grid.counts()[i] += local.counts()[i];
  };

  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return grid;
}

PlacementGrid combine_min(std::span<const PlacementGrid> grids) {
  if (grids.empty()) throw std::invalid_argument("no grids to combine");
  for (const auto& g : grids) {
    if (!(g.spec() == grids.front().spec())) {
      throw std::invalid_argument("placement grids have mismatched specs");
    }
  }
  PlacementGrid out = grids.front();
  for (std::size_t k = 1; k < grids.size(); ++k) {
    for (std::size_t i = 0; i < out.counts().size(); ++i) {
      out.counts()[i] = std::min(out.counts()[i], grids[k].counts()[i]);
    }
  }
  return out;
}

BestPlacement select_best(const PlacementGrid& grid) {
  BestPlacement best;
  for (int iy = 0; iy < grid.spec().ny; ++iy) {
    for (int ix = 0; ix < grid.spec().nx; ++ix) {
      const std::uint32_t v = grid.at(ix, iy);
      if (v == 0) continue;
      const bool wins =
          !best.feasible || v > best.score ||
          (v == best.score && std::pair(ix, iy) < std::pair(best.ix, best.iy));
      if (wins) {
        best.feasible = true;
        best.ix = ix;
        best.iy = iy;
        best.score = v;
        const Vec2 c = grid.cell_center(ix, iy);
        best.x = c.x();
        best.y = c.y();
      }
    }
  }
  return best;
}

std::vector<std::size_t> filter_reachable(const ReachGrid4D& map, const Vec2& base,
                                          const GraspSet& grasps) {
  std::vector<std::size_t> kept;
  Transform world_from_base = Transform::Identity();
  world_from_base.translation() = Vec3(base.x(), base.y(), 0.0);
  const Transform base_from_world = world_from_base.inverse();
  for (std::size_t i = 0; i < grasps.poses.size(); ++i) {
    if (map.query_forward(base_from_world * grasps.poses[i])) kept.push_back(i);
  }
  return kept;
}

void save_placement_csv(const PlacementGrid& grid, std::ostream& out) {
  for (int iy = 0; iy < grid.spec().ny; ++iy) {
    for (int ix = 0; ix < grid.spec().nx; ++ix) {
      if (ix > 0) out << ',';
      out << grid.at(ix, iy);
    }
    out << '\n';
  }
}

void save_placement_json(const PlacementGrid& grid, const BestPlacement& best,
                         std::ostream& out) {
  nlohmann::json j;
  j["origin"] = {grid.spec().origin_x, grid.spec().origin_y};
  j["cell_size"] = grid.spec().cell;
  j["dims"] = {grid.spec().nx, grid.spec().ny};
  j["feasible"] = best.feasible;
  j["argmax"] = {best.ix, best.iy};
  j["base_position"] = {best.x, best.y};
  j["score"] = best.score;
  out << j.dump(2) << '\n';
}

}  // namespace rm4d
