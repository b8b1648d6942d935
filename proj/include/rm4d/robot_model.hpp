#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rm4d/geometry.hpp"
#include "rm4d/rng.hpp"

namespace rm4d {

/// Robot description error with a source location when one is known.
class RobotParseError : public std::runtime_error {
 public:
  explicit RobotParseError(const std::string& msg) : std::runtime_error(msg) {}
};

struct Joint {
  std::string name;
  Transform origin = Transform::Identity();  // parent link frame -> joint frame
  Vec3 axis = Vec3::UnitZ();                 // unit, in joint frame
  double lower = 0.0;                        // radians; ignored if continuous
  double upper = 0.0;
  bool continuous = false;
};

struct CollisionSphere {
  int link = 0;  // 0 = base frame, i = frame after joint i
  Vec3 center = Vec3::Zero();
  double radius = 0.0;
};

class RobotModel;

/// Joint values validated against the owning model's limits at construction.
class JointConfig {
 public:
  const std::vector<double>& values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  std::size_t size() const { return values_.size(); }

 private:
  friend class RobotModel;
  explicit JointConfig(std::vector<double> v) : values_(std::move(v)) {}
  std::vector<double> values_;
};

class RobotModel {
 public:
  /// Parses the JSON robot description format. Angles in the document are
  /// degrees and are converted to radians here. Syntax errors carry a line
  /// number, semantic errors name the offending field.
  static RobotModel parse_text(std::string_view text);
  static RobotModel parse_file(const std::string& path);

  const std::string& name() const { return name_; }
  int joint_count() const { return static_cast<int>(joints_.size()); }
  const std::vector<Joint>& joints() const { return joints_; }
  const Transform& tcp_offset() const { return tcp_offset_; }
  const std::vector<CollisionSphere>& collision_spheres() const { return spheres_; }

  double reach_xy() const { return reach_xy_; }
  double reach_z() const { return reach_z_; }
  /// False when the reach values fell back to the sum-of-link-lengths bound;
  /// grid construction then rounds them up to a cell-size multiple.
  bool reach_is_explicit() const { return reach_from_document_; }
  /// Upper bound on the distance of any FK position from the base.
  double reach_bound() const { return reach_bound_; }

  JointConfig make_config(std::vector<double> values) const;
  bool within_limits(std::span<const double> values) const;

  /// T = prod_i(origin_i * Rot(axis_i, q_i)) * tcp_offset.
  Transform forward_kinematics(const JointConfig& q) const;
  Transform forward_kinematics(std::span<const double> q) const;

  /// World frames of every link: out[0] = base (identity), out[i] = frame
  /// after joint i, out[n+1] = TCP frame.
  void link_frames(std::span<const double> q, std::vector<Transform>& out) const;

  /// Uniform over each joint interval; continuous joints over [-pi, pi).
  JointConfig sample_config(Rng& rng) const;

  /// Ground-plane clearance for every collision sphere plus self-collision
  /// between spheres on non-adjacent links.
  bool is_valid(const JointConfig& q) const;
  bool is_valid(std::span<const double> q) const;

  /// Copy with the first and last joint limits replaced by +/- range_deg
  /// (continuous when range_deg >= 180).
  RobotModel with_first_last_range(double range_deg) const;

  /// FNV-1a over everything that affects kinematics, sampling, and validity.
  /// Used to key ground-truth label caches.
  std::uint64_t content_hash() const;

 private:
  RobotModel() = default;
  void finalize();  // validates and computes reach bounds

  std::string name_;
  std::vector<Joint> joints_;
  Transform tcp_offset_ = Transform::Identity();
  std::vector<CollisionSphere> spheres_;
  double reach_xy_ = 0.0;
  double reach_z_ = 0.0;
  double reach_bound_ = 0.0;
  bool reach_from_document_ = false;
  mutable std::vector<std::size_t> sphere_pair_a_, sphere_pair_b_;  // precomputed non-adjacent pairs
};

}  // namespace rm4d
