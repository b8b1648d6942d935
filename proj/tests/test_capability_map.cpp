#include <doctest.h>

#include <set>
#include <sstream>

#include "rm4d/capability_map.hpp"
#include "rm4d/map_io.hpp"
#include "test_support.hpp"

using namespace rm4d;
using namespace test_support;

namespace {

const CapabilityParams kSmall{0.6, 0.6, 0.1, 50, 12};

Transform random_pose_in(double r_xy, double r_z, Rng& rng) {
  Transform t = Transform::Identity();
  t.linear() = rng.random_rotation();
  t.translation() = Vec3(rng.uniform(-r_xy, r_xy), rng.uniform(-r_xy, r_xy), rng.uniform(0.0, r_z));
  return t;
}

}  // namespace

TEST_CASE("directions: degenerate counts") {
  const auto one = SphereDirections::make(1);
  REQUIRE(one.count() == 1);
  CHECK((one.direction(0) - Vec3(0, 0, 1)).norm() < 1e-12);

  const auto two = SphereDirections::make(2);
  REQUIRE(two.count() == 2);
  CHECK((two.direction(0) + two.direction(1)).norm() < 1e-12);  // antipodal pair
}

TEST_CASE("directions: 200-point layout is quasi-uniform") {
  const auto dirs = SphereDirections::make(200);
  REQUIRE(dirs.count() == 200);

  // All unit, pairwise distinct, deterministic.
  const auto again = SphereDirections::make(200);
  for (int i = 0; i < 200; ++i) {
    CHECK(std::abs(dirs.direction(i).norm() - 1.0) < 1e-12);
    CHECK((dirs.direction(i) - again.direction(i)).norm() == 0.0);
  }

  // Brute-force pairwise scan: every point's nearest neighbor lies between
  // 6 and 18 degrees away.
  for (int i = 0; i < 200; ++i) {
    double best = kPi;
    for (int j = 0; j < 200; ++j) {
      if (i == j) continue;
      const double d = std::acos(std::clamp(dirs.direction(i).dot(dirs.direction(j)), -1.0, 1.0));
      best = std::min(best, d);
    }
    REQUIRE(best > deg_to_rad(6.0));
    REQUIRE(best < deg_to_rad(18.0));
  }
}

TEST_CASE("so3_to_bin: exact pole direction") {
  const auto dirs = SphereDirections::make(200);
  const auto [dir_index, roll_index] = so3_to_bin(Mat3::Identity(), dirs, 12);
  // The spiral starts at the +z pole, which is exactly the identity approach.
  CHECK(dir_index == 0);
  CHECK((dirs.direction(dir_index) - Vec3(0, 0, 1)).norm() < 1e-12);
  CHECK(roll_index >= 0);
  CHECK(roll_index < 12);
}

TEST_CASE("so3_to_bin: rolls land in adjacent bins") {
  // Constructed rotations whose approach vector equals a grid direction
  // exactly, so a roll of one bin width shifts the roll index by exactly one.
  const auto dirs = SphereDirections::make(200);
  const double step = 2.0 * kPi / 12.0;
  Rng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const int k = static_cast<int>(rng.next_u64() % 200);
    const Vec3 d = dirs.direction(k);
    Vec3 seed(rng.normal(), rng.normal(), rng.normal());
    Vec3 x_axis = seed - seed.dot(d) * d;
    if (x_axis.norm() < 1e-6) continue;
    x_axis.normalize();
    Mat3 r;
    r.col(0) = x_axis;
    r.col(1) = d.cross(x_axis);
    r.col(2) = d;
    r = r * rot_z(rng.uniform(-kPi, kPi));  // random initial roll

    const auto [d0, roll0] = so3_to_bin(r, dirs, 12);
    const auto [d1, roll1] = so3_to_bin(r * rot_z(step), dirs, 12);
    CHECK(d0 == k);
    CHECK(d1 == k);
    CHECK(roll1 == (roll0 + 1) % 12);
  }
}

TEST_CASE("so3_to_bin: single roll bin collapses") {
  const auto dirs = SphereDirections::make(200);
  Rng rng(22);
  for (int trial = 0; trial < 100; ++trial) {
    const auto [dir_index, roll_index] = so3_to_bin(rng.random_rotation(), dirs, 1);
    CHECK(roll_index == 0);
    CHECK(dir_index >= 0);
    CHECK(dir_index < 200);
  }
}

TEST_CASE("capability cell totals match the published table") {
  CapabilityParams franka6d{1.05, 1.35, 0.05, 200, 12};
  CapabilityParams franka5d{1.05, 1.35, 0.05, 200, 1};
  CHECK(CapabilityGrid(franka6d).cell_count() == 114'307'200);
  CHECK(CapabilityGrid(franka5d).cell_count() == 9'525'600);
}

TEST_CASE("mark and query mirror the 4d map semantics") {
  CapabilityGrid grid(kSmall);
  Rng rng(23);
  const Transform pose = random_pose_in(kSmall.r_xy, kSmall.r_z, rng);
  CHECK_FALSE(grid.query_forward(pose));
  CHECK(grid.mark(pose));
  CHECK_FALSE(grid.mark(pose));
  CHECK(grid.query_forward(pose));

  const Transform elsewhere = random_pose_in(kSmall.r_xy, kSmall.r_z, rng);
  CHECK_FALSE(grid.query_forward(elsewhere));

  Transform outside = pose;
  outside.translation().z() = 3.0;
  CHECK_FALSE(grid.mark(outside));
  CHECK(grid.out_of_range_marks() == 1);
}

TEST_CASE("5d variant ignores tool roll") {
  CapabilityParams p5 = kSmall;
  p5.n_inplane = 1;
  CapabilityGrid grid(p5);
  Rng rng(24);
  for (int trial = 0; trial < 100; ++trial) {
    const Transform pose = random_pose_in(kSmall.r_xy, kSmall.r_z, rng);
    grid.mark(pose);
    CHECK(grid.query_forward(roll_about_approach(pose, kPi / 2.0)));
    CHECK(grid.query_forward(roll_about_approach(pose, rng.uniform(-kPi, kPi))));
  }
}

TEST_CASE("5d predictions are implied by 6d") {
  CapabilityParams p6 = kSmall;
  CapabilityParams p5 = kSmall;
  p5.n_inplane = 1;
  CapabilityGrid g6(p6);
  CapabilityGrid g5(p5);
  Rng rng(25);
  for (int i = 0; i < 2000; ++i) {
    const Transform pose = random_pose_in(kSmall.r_xy, kSmall.r_z, rng);
    g6.mark(pose);
    g5.mark(pose);
  }
  for (int i = 0; i < 2000; ++i) {
    const Transform probe = random_pose_in(kSmall.r_xy, kSmall.r_z, rng);
    if (g6.query_forward(probe)) CHECK(g5.query_forward(probe));
  }
}

TEST_CASE("capability container round trip") {
  CapabilityGrid grid(kSmall);
  grid.robot_name = "cap";
  grid.sample_count = 123;
  Rng rng(26);
  for (int i = 0; i < 400; ++i) grid.mark(random_pose_in(kSmall.r_xy, kSmall.r_z, rng));

  std::stringstream buffer;
  save_map(grid, buffer);
  const CapabilityGrid loaded = load_capability_grid(buffer);
  CHECK(loaded == grid);
  CHECK(loaded.params().n_dirs == kSmall.n_dirs);
  CHECK(loaded.params().n_inplane == kSmall.n_inplane);

  std::string bytes;
  {
    std::stringstream rebuffer;
    save_map(grid, rebuffer);
    bytes = rebuffer.str();
  }
  bytes[bytes.size() - 1] ^= 0xFF;  // corrupt the stored checksum itself
  std::stringstream corrupted(bytes);
  CHECK_THROWS_AS(load_capability_grid(corrupted), MapIoError);

  // The wrong loader refuses the file by magic.
  std::stringstream wrong;
  save_map(grid, wrong);
  CHECK_THROWS_WITH_AS(load_reach_grid(wrong), doctest::Contains("magic"), MapIoError);
}
