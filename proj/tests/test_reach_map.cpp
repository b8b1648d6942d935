#include <doctest.h>

#include <cstring>
#include <sstream>
#include <thread>

#include "rm4d/map_io.hpp"
#include "rm4d/reach_map.hpp"
#include "test_support.hpp"

using namespace rm4d;
using namespace test_support;

namespace {

const GridParams kFrankaParams{1.05, 1.35, 0.05, deg_to_rad(5.0)};
const GridParams kSmallParams{0.6, 0.6, 0.1, deg_to_rad(30.0)};

Transform random_pose_in(const GridParams& p, Rng& rng) {
  Transform t = Transform::Identity();
  t.linear() = rng.random_rotation();
  const double r = p.r_xy / std::sqrt(2.0);  // keep |x*|,|y*| inside the grid
  t.translation() = Vec3(rng.uniform(-r, r), rng.uniform(-r, r), rng.uniform(0.0, p.r_z));
  return t;
}

ReachGrid4D random_grid(Rng& rng, const GridParams& params, int marks) {
  ReachGrid4D grid(params);
  grid.robot_name = "random";
  grid.sample_count = static_cast<std::uint64_t>(marks);
  for (int i = 0; i < marks; ++i) grid.mark(random_pose_in(params, rng));
  return grid;
}

}  // namespace

TEST_CASE("new grid: published cell totals for the franka dims") {
  const ReachGrid4D grid(kFrankaParams);
  CHECK(grid.cell_count() == 1'714'608);
  CHECK(grid.marked_count() == 0);
}

TEST_CASE("new grid: minimal params") {
  const GridParams p{1.0, 1.0, 1.0, kPi};
  const ReachGrid4D grid(p);
  CHECK(grid.n_xy() == 2);
  CHECK(grid.n_z() == 1);
  CHECK(grid.n_theta() == 1);
  CHECK(grid.cell_count() == 4);
}

TEST_CASE("new grid: allocation cap") {
  CHECK_THROWS_AS(ReachGrid4D(GridParams{100.0, 100.0, 0.001, 1e-5}), std::invalid_argument);
}

TEST_CASE("mark: first visit, idempotence, out-of-range counting") {
  ReachGrid4D grid(kSmallParams);
  const Transform pose = make_pose(rotation_approach_x(), Vec3(0.2, 0.1, 0.3));
  CHECK(grid.mark(pose));
  CHECK_FALSE(grid.mark(pose));
  CHECK(grid.marked_count() == 1);

  Transform far = pose;
  far.translation().z() = 5.0;
  CHECK_FALSE(grid.mark(far));
  CHECK(grid.out_of_range_marks() == 1);
  CHECK(grid.marked_count() == 1);
}

TEST_CASE("mark: yaw/roll-equivalent poses land in the same cell") {
  ReachGrid4D grid(kSmallParams);
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const Transform t = random_pose_in(kSmallParams, rng);
    const Transform moved = world_z_rotation(rng.uniform(-kPi, kPi)) *
                            roll_about_approach(t, rng.uniform(-kPi, kPi));
    grid.mark(t);
    CHECK_FALSE(grid.mark(moved));  // same cell, whether or not t was novel
  }
}

TEST_CASE("query_forward: read-after-write, out-of-range, yaw invariance") {
  ReachGrid4D grid(kSmallParams);
  Rng rng(12);
  const Transform pose = random_pose_in(kSmallParams, rng);
  CHECK_FALSE(grid.query_forward(pose));
  grid.mark(pose);
  CHECK(grid.query_forward(pose));

  Transform high = pose;
  high.translation().z() = 2.0 * kSmallParams.r_z;
  CHECK_FALSE(grid.query_forward(high));

  const Transform yawed = world_z_rotation(1.234) * pose;
  CHECK(grid.query_forward(yawed));
}

TEST_CASE("query_inverse: empty grid, single mark bound, cardinality") {
  ReachGrid4D grid(kSmallParams);
  Rng rng(13);
  const Transform pose = random_pose_in(kSmallParams, rng);

  auto empty = grid.query_inverse(pose);
  CHECK(empty.base_positions.empty());
  CHECK_FALSE(empty.out_of_range);

  // Single marked pose generated with the base at the origin: one of the
  // returned positions is within half a cell diagonal of the origin.
  grid.mark(pose);
  const auto result = grid.query_inverse(pose);
  REQUIRE(result.base_positions.size() == 1);
  CHECK(result.base_positions[0].norm() <= kSmallParams.l_c * std::sqrt(2.0) / 2.0 + 1e-12);

  // k set cells in the slice give exactly k positions.
  const Canonical4 c = canonicalize(pose);
  const MapIndex4 idx = discretize(c, kSmallParams);
  int expected = 1;
  for (int k = 0; k < 5; ++k) {
    MapIndex4 extra = idx;
    extra.i_x = k;
    extra.i_y = k + 3;
    if (grid.set_index(extra)) ++expected;
  }
  CHECK(grid.query_inverse(pose).base_positions.size() == static_cast<std::size_t>(expected));

  Transform outside = pose;
  outside.translation().z() = -1.0;
  const auto oor = grid.query_inverse(outside);
  CHECK(oor.out_of_range);
  CHECK(oor.base_positions.empty());
}

TEST_CASE("query_inverse positions re-check under base teleport") {
  // Every returned base position, used as the new base, must make the pose's
  // relative cell a marked cell.
  ReachGrid4D grid(kSmallParams);
  Rng rng(14);
  for (int i = 0; i < 300; ++i) grid.mark(random_pose_in(kSmallParams, rng));
  for (int i = 0; i < 50; ++i) {
    const Transform world = random_pose_in(kSmallParams, rng);
    for (const Vec2& base : grid.query_inverse(world).base_positions) {
      Transform base_frame = Transform::Identity();
      base_frame.translation() = Vec3(base.x(), base.y(), 0.0);
      CHECK(grid.query_forward(base_frame.inverse() * world));
    }
  }
}

TEST_CASE("optional visit counts track repeat marks") {
  ReachGrid4D grid(kSmallParams, kDefaultCellCap, /*with_visit_counts=*/true);
  REQUIRE(grid.has_visit_counts());
  const Transform pose = make_pose(rotation_approach_x(), Vec3(0.2, 0.1, 0.3));
  const MapIndex4 idx = discretize(canonicalize(pose), kSmallParams);
  CHECK(grid.visit_count(idx) == 0);
  grid.mark(pose);
  grid.mark(pose);
  grid.mark(pose);
  CHECK(grid.visit_count(idx) == 3);
  CHECK(grid.marked_count() == 1);  // payload stays binary

  ReachGrid4D plain(kSmallParams);
  CHECK_FALSE(plain.has_visit_counts());
}

TEST_CASE("monotonicity: marked count never decreases") {
  ReachGrid4D grid(kSmallParams);
  Rng rng(15);
  std::uint64_t last = 0;
  for (int i = 0; i < 500; ++i) {
    grid.mark(random_pose_in(kSmallParams, rng));
    CHECK(grid.marked_count() >= last);
    last = grid.marked_count();
  }
  CHECK(grid.marked_count() == grid.bits().popcount());
}

TEST_CASE("concurrent marking loses no updates") {
  // The same pose list marked serially and concurrently must give identical
  // bit sets and counters.
  Rng rng(16);
  std::vector<Transform> poses;
  for (int i = 0; i < 20000; ++i) poses.push_back(random_pose_in(kSmallParams, rng));

  ReachGrid4D serial(kSmallParams);
  for (const auto& p : poses) serial.mark(p);

  ReachGrid4D parallel(kSmallParams);
  const int n_threads = 4;
  std::vector<std::thread> pool;
  for (int t = 0; t < n_threads; ++t) {
    pool.emplace_back([&, t]() {
      for (std::size_t i = static_cast<std::size_t>(t); i < poses.size(); i += n_threads) {
        parallel.mark(poses[i]);
      }
    });
  }
  for (auto& th : pool) th.join();

  CHECK(parallel.bits() == serial.bits());
  CHECK(parallel.marked_count() == serial.marked_count());
  CHECK(parallel.marked_count() == parallel.bits().popcount());
}

TEST_CASE("serialization: bit-exact round trip") {
  Rng rng(17);
  ReachGrid4D grid = random_grid(rng, kSmallParams, 500);
  std::stringstream buffer;
  save_map(grid, buffer);
  const ReachGrid4D loaded = load_reach_grid(buffer);
  CHECK(loaded == grid);
  CHECK(loaded.marked_count() == grid.marked_count());
}

TEST_CASE("serialization: corrupted checksum fails cleanly") {
  Rng rng(18);
  const ReachGrid4D grid = random_grid(rng, kSmallParams, 100);
  std::stringstream buffer;
  save_map(grid, buffer);
  std::string bytes = buffer.str();
  bytes[bytes.size() / 2] ^= 0x40;  // flip a payload bit
  std::stringstream corrupted(bytes);
  CHECK_THROWS_AS(load_reach_grid(corrupted), MapIoError);
}

TEST_CASE("serialization: bad magic, version, truncation") {
  Rng rng(19);
  const ReachGrid4D grid = random_grid(rng, kSmallParams, 10);
  std::stringstream buffer;
  save_map(grid, buffer);
  std::string bytes = buffer.str();

  {
    std::string bad = bytes;
    bad[0] = 'X';
    std::stringstream in(bad);
    CHECK_THROWS_WITH_AS(load_reach_grid(in), doctest::Contains("magic"), MapIoError);
  }
  {
    std::string bad = bytes;
    bad[4] = 99;  // version field
    std::stringstream in(bad);
    CHECK_THROWS_WITH_AS(load_reach_grid(in), doctest::Contains("version"), MapIoError);
  }
  {
    std::stringstream in(bytes.substr(0, bytes.size() / 2));
    CHECK_THROWS_AS(load_reach_grid(in), MapIoError);
  }
}

TEST_CASE("crc32 known answer") {
  const char* msg = "123456789";
  CHECK(crc32(std::span<const unsigned char>(reinterpret_cast<const unsigned char*>(msg), 9)) ==
        0xCBF43926u);
}

TEST_CASE("serialization: pinned byte layout") {
  ReachGrid4D grid(kSmallParams);
  grid.robot_name = "ab";
  grid.sample_count = 0x0102030405060708ULL;
  std::stringstream buffer;
  save_map(grid, buffer);
  const std::string b = buffer.str();

  REQUIRE(b.size() > 70);
  CHECK(b.substr(0, 4) == "RM4D");
  CHECK(static_cast<unsigned char>(b[4]) == 1);  // version u16 little-endian
  CHECK(static_cast<unsigned char>(b[5]) == 0);
  CHECK(static_cast<unsigned char>(b[6]) == 2);  // name length u32
  CHECK(static_cast<unsigned char>(b[7]) == 0);
  CHECK(b.substr(10, 2) == "ab");
  auto read_le64 = [&b](std::size_t at) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[at + i])) << (8 * i);
    }
    return v;
  };
  auto read_le32 = [&b](std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + i])) << (8 * i);
    }
    return v;
  };
  // params: four little-endian f64 starting right after the name.
  double r_xy = 0.0;
  const std::uint64_t r_xy_bits = read_le64(12);
  std::memcpy(&r_xy, &r_xy_bits, sizeof(r_xy));
  CHECK(r_xy == kSmallParams.r_xy);
  // dims: three u32 after the four doubles, then the sample count u64.
  CHECK(read_le32(12 + 32) == static_cast<std::uint32_t>(kSmallParams.n_z()));
  CHECK(read_le64(12 + 32 + 12) == 0x0102030405060708ULL);
}

TEST_CASE("serialization: params travel with the file") {
  Rng rng(20);
  const ReachGrid4D a = random_grid(rng, kSmallParams, 50);
  const ReachGrid4D b = random_grid(rng, kFrankaParams, 50);
  std::stringstream sa, sb;
  save_map(a, sa);
  save_map(b, sb);
  CHECK(load_reach_grid(sa).params() == kSmallParams);
  CHECK(load_reach_grid(sb).params() == kFrankaParams);
}
