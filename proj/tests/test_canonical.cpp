#include <doctest.h>

#include "rm4d/canonical.hpp"
#include "rm4d/rng.hpp"
#include "test_support.hpp"

using namespace rm4d;
using namespace test_support;

namespace {

const GridParams kFrankaParams{1.05, 1.35, 0.05, deg_to_rad(5.0)};

Transform random_pose(Rng& rng, double extent = 1.0) {
  Transform t = Transform::Identity();
  t.linear() = rng.random_rotation();
  t.translation() =
      Vec3(rng.uniform(-extent, extent), rng.uniform(-extent, extent), rng.uniform(0.0, extent));
  return t;
}

}  // namespace

TEST_CASE("azimuth: axis directions and the degenerate vertical case") {
  CHECK(azimuth(make_pose(rotation_approach_x(), Vec3::Zero())) == doctest::Approx(0.0));
  CHECK(azimuth(make_pose(rotation_approach_y(), Vec3::Zero())) ==
        doctest::Approx(kPi / 2.0));
  CHECK(azimuth(Transform::Identity()) == 0.0);  // straight up: convention
}

TEST_CASE("canonicalize: identity pose") {
  const Canonical4 c = canonicalize(Transform::Identity());
  CHECK(c.p_z == 0.0);
  CHECK(c.theta == doctest::Approx(0.0));
  CHECK(c.x_star == doctest::Approx(0.0));
  CHECK(c.y_star == doctest::Approx(0.0));
}

TEST_CASE("canonicalize: hand-evaluated horizontal approach") {
  // p = (1, 0, 0.5), approach along +x: psi = 0, so (x*, y*) = (-p_x, -p_y).
  const Canonical4 c = canonicalize(make_pose(rotation_approach_x(), Vec3(1, 0, 0.5)));
  CHECK(c.p_z == doctest::Approx(0.5));
  CHECK(c.theta == doctest::Approx(kPi / 2.0));
  CHECK(c.x_star == doctest::Approx(-1.0));
  CHECK(c.y_star == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("canonicalize: world-yawed pose maps to the same element") {
  const Transform base = make_pose(rotation_approach_x(), Vec3(1, 0, 0.5));
  const Transform yawed = world_z_rotation(kPi / 2.0) * base;
  // The yawed pose has p = (0, 1, 0.5) and approach (0, 1, 0).
  CHECK((yawed.translation() - Vec3(0, 1, 0.5)).norm() < 1e-12);
  const Canonical4 a = canonicalize(base);
  const Canonical4 b = canonicalize(yawed);
  CHECK(b.p_z == doctest::Approx(a.p_z));
  CHECK(b.theta == doctest::Approx(a.theta));
  CHECK(b.x_star == doctest::Approx(a.x_star));
  CHECK(b.y_star == doctest::Approx(a.y_star).epsilon(1e-9));
}

TEST_CASE("invariance: base yaw and tool roll quotient out") {
  Rng rng(2024);
  int tested = 0;
  for (int trial = 0; trial < 100000 && tested < 100000; ++trial) {
    const Transform t = random_pose(rng);
    const double theta = std::acos(std::clamp(t.linear()(2, 2), -1.0, 1.0));
    if (theta < 1e-3 || theta > kPi - 1e-3) continue;  // degenerate azimuth excluded
    ++tested;
    const double alpha = rng.uniform(-kPi, kPi);
    const double beta = rng.uniform(-kPi, kPi);
    const Transform moved = world_z_rotation(alpha) * roll_about_approach(t, beta);
    const Canonical4 a = canonicalize(t);
    const Canonical4 b = canonicalize(moved);
    REQUIRE(std::abs(a.p_z - b.p_z) < 1e-9);
    REQUIRE(std::abs(a.theta - b.theta) < 1e-9);
    REQUIRE(std::abs(a.x_star - b.x_star) < 1e-9);
    REQUIRE(std::abs(a.y_star - b.y_star) < 1e-9);
  }
  CHECK(tested > 90000);
}

TEST_CASE("theta is invariant under world-z rotation") {
  Rng rng(5);
  for (int trial = 0; trial < 1000; ++trial) {
    const Transform t = random_pose(rng);
    const Transform yawed = world_z_rotation(rng.uniform(-kPi, kPi)) * t;
    CHECK(canonicalize(t).theta == doctest::Approx(canonicalize(yawed).theta).epsilon(1e-9));
  }
}

TEST_CASE("grid params: franka dims") {
  CHECK(kFrankaParams.n_xy() == 42);
  CHECK(kFrankaParams.n_z() == 27);
  CHECK(kFrankaParams.n_theta() == 36);
}

TEST_CASE("discretize: worked example and boundary clamp") {
  const Canonical4 c{0.12, deg_to_rad(5.0), -1.05, 0.0};
  const MapIndex4 idx = discretize(c, kFrankaParams);
  CHECK(idx.i_pz == 2);
  CHECK(idx.i_theta == 1);
  CHECK(idx.i_x == 0);
  CHECK(idx.i_y == 21);

  const Canonical4 top{0.0, kPi, 0.0, 0.0};
  CHECK(discretize(top, kFrankaParams).i_theta == kFrankaParams.n_theta() - 1);

  const Canonical4 out{2.0 * kFrankaParams.r_z, 0.0, 0.0, 0.0};
  CHECK(!try_discretize(out, kFrankaParams).has_value());
  CHECK_THROWS_AS(discretize(out, kFrankaParams), std::out_of_range);
}

TEST_CASE("discretize: random in-range values stay in bounds and round-trip") {
  Rng rng(77);
  for (int trial = 0; trial < 100000; ++trial) {
    Canonical4 c;
    c.p_z = rng.uniform(0.0, kFrankaParams.r_z);
    c.theta = rng.uniform(0.0, kPi);
    c.x_star = rng.uniform(-kFrankaParams.r_xy, kFrankaParams.r_xy);
    c.y_star = rng.uniform(-kFrankaParams.r_xy, kFrankaParams.r_xy);
    const auto idx = try_discretize(c, kFrankaParams);
    REQUIRE(idx.has_value());
    REQUIRE(idx->i_pz < kFrankaParams.n_z());
    REQUIRE(idx->i_theta < kFrankaParams.n_theta());
    REQUIRE(idx->i_x < kFrankaParams.n_xy());
    REQUIRE(idx->i_y < kFrankaParams.n_xy());

    // Center of the chosen cell discretizes back to the same cell.
    const Vec2 center = undiscretize_xy(idx->i_x, idx->i_y, kFrankaParams);
    Canonical4 c2 = c;
    c2.x_star = center.x();
    c2.y_star = center.y();
    const auto idx2 = try_discretize(c2, kFrankaParams);
    REQUIRE(idx2.has_value());
    REQUIRE(idx2->i_x == idx->i_x);
    REQUIRE(idx2->i_y == idx->i_y);
  }
}

TEST_CASE("undiscretize: first and last cell centers") {
  CHECK(undiscretize_xy(0, 0, kFrankaParams).x() == doctest::Approx(-1.025));
  CHECK(undiscretize_xy(21, 0, kFrankaParams).x() == doctest::Approx(0.025));
  CHECK_THROWS_AS(undiscretize_xy(-1, 0, kFrankaParams), std::out_of_range);
  CHECK_THROWS_AS(undiscretize_xy(42, 0, kFrankaParams), std::out_of_range);

  // Index round-trip over every cell.
  for (int ix = 0; ix < kFrankaParams.n_xy(); ++ix) {
    for (int iy = 0; iy < kFrankaParams.n_xy(); ++iy) {
      const Vec2 center = undiscretize_xy(ix, iy, kFrankaParams);
      const Canonical4 c{0.0, 0.0, center.x(), center.y()};
      const MapIndex4 idx = discretize(c, kFrankaParams);
      REQUIRE(idx.i_x == ix);
      REQUIRE(idx.i_y == iy);
    }
  }
}

TEST_CASE("recover_base: hand-evaluated inverse of the worked example") {
  const Transform tcp = make_pose(rotation_approach_x(), Vec3(1, 0, 0.5));
  const Vec2 base = recover_base(-1.0, 0.0, tcp);
  CHECK(base.x() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(base.y() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("recover_base: zero canonical offset lands on the tcp position") {
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const Transform t = random_pose(rng);
    const Vec2 base = recover_base(0.0, 0.0, t);
    CHECK(base.x() == doctest::Approx(t.translation().x()).epsilon(1e-12));
    CHECK(base.y() == doctest::Approx(t.translation().y()).epsilon(1e-12));
  }
}

TEST_CASE("recover_base composed with canonicalize returns the origin") {
  Rng rng(9);
  for (int trial = 0; trial < 10000; ++trial) {
    const Transform t = random_pose(rng);
    const Canonical4 c = canonicalize(t);
    const Vec2 base = recover_base(c.x_star, c.y_star, t);
    REQUIRE(std::abs(base.x()) < 1e-12);
    REQUIRE(std::abs(base.y()) < 1e-12);
  }
}
