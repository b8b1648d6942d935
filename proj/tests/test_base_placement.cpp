#include <doctest.h>

#include <sstream>

#include "rm4d/base_placement.hpp"
#include "rm4d/construction.hpp"
#include "test_support.hpp"

using namespace rm4d;
using namespace test_support;

namespace {

const GridParams kParams{0.6, 0.6, 0.1, deg_to_rad(30.0)};

Transform pose_at(double x, double y, double z, const Mat3& r) {
  Transform t = Transform::Identity();
  t.linear() = r;
  t.translation() = Vec3(x, y, z);
  return t;
}

PlacementGridSpec square_spec(double half_extent, double cell) {
  PlacementGridSpec spec;
  spec.origin_x = -half_extent;
  spec.origin_y = -half_extent;
  spec.cell = cell;
  spec.nx = GridParams::grid_count(2.0 * half_extent, cell);
  spec.ny = spec.nx;
  return spec;
}

}  // namespace

TEST_CASE("aggregate: empty map gives an all-zero grid") {
  ReachGrid4D map(kParams);
  GraspSet grasps{"mug", {pose_at(0.3, 0.0, 0.2, rotation_approach_x())}};
  const PlacementGrid grid = aggregate_inverse(map, grasps, square_spec(1.0, 0.1));
  for (auto c : grid.counts()) CHECK(c == 0);
}

TEST_CASE("aggregate: single pose, single marked cell") {
  ReachGrid4D map(kParams);
  const Transform pose = pose_at(0.3, 0.1, 0.2, rotation_approach_x());
  REQUIRE(map.mark(pose));

  GraspSet grasps{"mug", {pose}};
  const PlacementGrid grid = aggregate_inverse(map, grasps, square_spec(1.0, 0.1));
  int nonzero = 0;
  for (auto c : grid.counts()) {
    if (c > 0) {
      CHECK(c == 1);
      ++nonzero;
    }
  }
  CHECK(nonzero == 1);
}

TEST_CASE("aggregate: one increment per grasp and cell") {
  // Coarse placement cells swallow several map cells; a single grasp must
  // still count at most once per placement cell.
  ReachGrid4D map(kParams);
  const Transform pose = pose_at(0.2, 0.0, 0.15, rotation_approach_x());
  const MapIndex4 idx = discretize(canonicalize(pose), kParams);
  for (int dx = 0; dx < 3; ++dx) {
    MapIndex4 nb = idx;
    nb.i_x = idx.i_x + dx;
    REQUIRE(nb.i_x < kParams.n_xy());
    map.set_index(nb);
  }

  const PlacementGrid grid = aggregate_inverse(map, GraspSet{"m", {pose}}, square_spec(1.0, 0.5));
  for (auto c : grid.counts()) CHECK(c <= 1);
}

TEST_CASE("combine_min: identity, pairwise, and zero veto") {
  const auto spec = square_spec(0.5, 0.1);
  PlacementGrid a(spec), b(spec);
  a.at(2, 3) = 5;
  b.at(2, 3) = 3;
  a.at(4, 4) = 2;  // zero in b

  const PlacementGrid only_a = combine_min(std::span<const PlacementGrid>(&a, 1));
  CHECK(only_a.counts() == a.counts());

  std::array<PlacementGrid, 2> both{a, b};
  const PlacementGrid combined = combine_min(both);
  CHECK(combined.at(2, 3) == 3);
  CHECK(combined.at(4, 4) == 0);
  for (std::size_t i = 0; i < combined.counts().size(); ++i) {
    CHECK(combined.counts()[i] <= a.counts()[i]);
    CHECK(combined.counts()[i] <= b.counts()[i]);
  }

  PlacementGrid mismatched(square_spec(0.5, 0.25));
  std::array<PlacementGrid, 2> bad{a, mismatched};
  CHECK_THROWS_AS(combine_min(bad), std::invalid_argument);
}

TEST_CASE("select_best: argmax, tie-break, infeasible") {
  const auto spec = square_spec(0.5, 0.1);
  PlacementGrid grid(spec);

  const BestPlacement none = select_best(grid);
  CHECK_FALSE(none.feasible);

  grid.at(7, 2) = 4;
  const BestPlacement single = select_best(grid);
  CHECK(single.feasible);
  CHECK(single.ix == 7);
  CHECK(single.iy == 2);
  CHECK(single.score == 4);
  CHECK(single.x == doctest::Approx(spec.origin_x + 7.5 * spec.cell));

  grid.at(1, 8) = 9;  // higher peak wins regardless of position
  CHECK(select_best(grid).score == 9);
  CHECK(select_best(grid).ix == 1);

  PlacementGrid uniform(spec);
  for (auto& c : uniform.counts()) c = 2;
  const BestPlacement tie = select_best(uniform);
  CHECK(tie.ix == 0);
  CHECK(tie.iy == 0);
}

TEST_CASE("filter_reachable: kept sets and displacement") {
  const RobotModel model = ideal_arm();
  const GridParams params = GridParams::for_robot(model, 0.05, deg_to_rad(5.0));
  ReachGrid4D map(params);
  ConstructionSchedule schedule{30000, 30000, 23};
  BuildOptions options;
  options.retain_stride = 1000;
  const BuildResult built = build_map(model, map, schedule, options);
  REQUIRE(built.retained_poses.size() == 30);

  GraspSet grasps{"obj", built.retained_poses};
  const auto kept = filter_reachable(map, Vec2(0.0, 0.0), grasps);
  CHECK(kept.size() == grasps.poses.size());  // marked poses, base unchanged

  const auto far = filter_reachable(map, Vec2(10.0 * params.r_xy, 0.0), grasps);
  CHECK(far.empty());
}

TEST_CASE("filter_reachable: heading invariance") {
  // Whatever yaw the hypothetical base frame has, the kept set is the same.
  const GridParams params{0.6, 0.6, 0.05, deg_to_rad(10.0)};
  ReachGrid4D map(params);
  Rng rng(51);
  std::vector<Transform> poses;
  for (int i = 0; i < 500; ++i) {
    Transform t = Transform::Identity();
    t.linear() = rng.random_rotation();
    t.translation() = Vec3(rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4), rng.uniform(0, 0.6));
    map.mark(t);
    poses.push_back(t);
  }
  const Vec2 base(0.15, -0.2);
  Transform base_frame = Transform::Identity();
  base_frame.translation() = Vec3(base.x(), base.y(), 0.0);

  for (int trial = 0; trial < 20; ++trial) {
    const double yaw = rng.uniform(-kPi, kPi);
    Transform yawed_base = base_frame;
    yawed_base.linear() = rot_z(yaw);
    for (const auto& pose : poses) {
      const bool identity_heading = map.query_forward(base_frame.inverse() * pose);
      const bool yawed_heading = map.query_forward(yawed_base.inverse() * pose);
      REQUIRE(identity_heading == yawed_heading);
    }
  }
}

TEST_CASE("aggregate cross-validates against forward queries from the best cell") {
  const RobotModel model = ideal_arm();
  const GridParams params = GridParams::for_robot(model, 0.05, deg_to_rad(5.0));
  ReachGrid4D map(params);
  build_map(model, map, ConstructionSchedule{200000, 200000, 29});

  // Grasps clustered around a point the arm can reach from near the origin.
  Rng rng(53);
  const GraspSet grasps = synthesize_grasps("box", Vec3(0.35, 0.05, 0.25), 150, rng);

  const auto spec = PlacementGridSpec::covering(std::span<const GraspSet>(&grasps, 1),
                                                params.r_xy, params.l_c);
  const PlacementGrid grid = aggregate_inverse(map, grasps, spec);
  const BestPlacement best = select_best(grid);
  REQUIRE(best.feasible);

  const auto kept = filter_reachable(map, Vec2(best.x, best.y), grasps);
  // The aggregate count at the argmax equals the forward-filtered count up to
  // discretization slack of ten percent of the grasp count.
  const double slack = 0.10 * static_cast<double>(grasps.poses.size());
  CHECK(std::abs(static_cast<double>(kept.size()) - static_cast<double>(best.score)) <= slack);
}

TEST_CASE("grasp csv round trip") {
  Rng rng(54);
  std::vector<GraspSet> sets;
  sets.push_back(synthesize_grasps("mug", Vec3(0.3, 0.0, 0.2), 5, rng));
  sets.push_back(synthesize_grasps("box", Vec3(-0.2, 0.1, 0.3), 3, rng));

  std::stringstream buffer;
  save_grasp_sets(sets, buffer);
  const auto loaded = load_grasp_sets(buffer);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].object_id == "mug");
  REQUIRE(loaded[0].poses.size() == 5);
  CHECK(loaded[1].poses.size() == 3);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK((loaded[0].poses[i].matrix() - sets[0].poses[i].matrix()).cwiseAbs().maxCoeff() == 0.0);
  }

  std::stringstream broken("mug,1,0,0\n");
  CHECK_THROWS_AS(load_grasp_sets(broken), std::runtime_error);
}

TEST_CASE("synthesized grasps are valid poses around the center") {
  Rng rng(55);
  const GraspSet set = synthesize_grasps("thing", Vec3(0.2, 0.3, 0.4), 50, rng, 0.05);
  REQUIRE(set.poses.size() == 50);
  for (const auto& pose : set.poses) {
    CHECK(is_rotation_matrix(pose.linear(), 1e-9));
    CHECK((pose.translation() - Vec3(0.2, 0.3, 0.4)).norm() == doctest::Approx(0.05));
  }
}

TEST_CASE("placement exports") {
  const auto spec = square_spec(0.2, 0.1);
  PlacementGrid grid(spec);
  grid.at(1, 2) = 7;
  std::stringstream csv;
  save_placement_csv(grid, csv);
  std::string line;
  int lines = 0;
  while (std::getline(csv, line)) ++lines;
  CHECK(lines == spec.ny);

  std::stringstream sidecar;
  save_placement_json(grid, select_best(grid), sidecar);
  CHECK(sidecar.str().find("\"score\": 7") != std::string::npos);
}
