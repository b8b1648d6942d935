#include "rm4d/robot_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace rm4d {
namespace {

using nlohmann::json;

int line_of_byte_offset(std::string_view text, std::size_t byte) {
  int line = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') ++line;
  }
  return line;
}

Vec3 read_vec3(const json& j, const std::string& field) {
  if (!j.contains(field) || !j[field].is_array() || j[field].size() != 3) {
    throw RobotParseError("field '" + field + "' must be an array of 3 numbers");
  }
  return Vec3(j[field][0].get<double>(), j[field][1].get<double>(), j[field][2].get<double>());
}

Vec3 read_vec3_or(const json& j, const std::string& field, const Vec3& fallback) {
  return j.contains(field) ? read_vec3(j, field) : fallback;
}

void hash_bytes(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
}

void hash_double(std::uint64_t& h, double v) { hash_bytes(h, &v, sizeof(v)); }

}  // namespace

RobotModel RobotModel::parse_text(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw RobotParseError("syntax error at line " + std::to_string(line_of_byte_offset(text, e.byte)) +
                          ": " + e.what());
  }

  RobotModel model;
  try {
    if (!doc.contains("name") || !doc["name"].is_string()) {
      throw RobotParseError("missing string field 'name'");
    }
    model.name_ = doc["name"].get<std::string>();

    if (!doc.contains("joints") || !doc["joints"].is_array()) {
      throw RobotParseError("missing array field 'joints'");
    }
    for (const auto& jj : doc["joints"]) {
      Joint joint;
      joint.name = jj.value("name", "joint" + std::to_string(model.joints_.size() + 1));
      const Vec3 xyz = read_vec3_or(jj, "origin_xyz", Vec3::Zero());
      const Vec3 rpy_deg = read_vec3_or(jj, "origin_rpy", Vec3::Zero());
      joint.origin = make_transform(xyz, Vec3(deg_to_rad(rpy_deg.x()), deg_to_rad(rpy_deg.y()),
                                              deg_to_rad(rpy_deg.z())));
      if (!jj.contains("axis")) throw RobotParseError("joint '" + joint.name + "': missing axis");
      joint.axis = read_vec3(jj, "axis");
      if (std::abs(joint.axis.norm() - 1.0) > 1e-9) {
        throw RobotParseError("joint '" + joint.name + "': axis is not unit length");
      }

      const bool flagged_continuous = jj.value("continuous", false) ||
                                      (jj.contains("limit_lower_deg") && jj["limit_lower_deg"].is_string() &&
                                       jj["limit_lower_deg"].get<std::string>() == "continuous");
      if (flagged_continuous) {
        joint.continuous = true;
        joint.lower = -kPi;
        joint.upper = kPi;
      } else {
        if (!jj.contains("limit_lower_deg") || !jj.contains("limit_upper_deg")) {
          throw RobotParseError("joint '" + joint.name +
                                "': needs limit_lower_deg/limit_upper_deg or continuous");
        }
        joint.lower = deg_to_rad(jj["limit_lower_deg"].get<double>());
        joint.upper = deg_to_rad(jj["limit_upper_deg"].get<double>());
        if (joint.lower > joint.upper) {
          throw RobotParseError("joint '" + joint.name + "': lower limit exceeds upper limit");
        }
      }
      model.joints_.push_back(joint);
    }

    if (doc.contains("tcp_offset")) {
      const auto& t = doc["tcp_offset"];
      const Vec3 xyz = read_vec3_or(t, "xyz", Vec3::Zero());
      const Vec3 rpy_deg = read_vec3_or(t, "rpy", Vec3::Zero());
      model.tcp_offset_ = make_transform(
          xyz, Vec3(deg_to_rad(rpy_deg.x()), deg_to_rad(rpy_deg.y()), deg_to_rad(rpy_deg.z())));
    }

    if (doc.contains("collision_spheres")) {
      for (const auto& ss : doc["collision_spheres"]) {
        CollisionSphere sphere;
        sphere.link = ss.value("link", 0);
        sphere.center = read_vec3(ss, "center");
        sphere.radius = ss.value("radius", 0.0);
        if (sphere.link < 0 || sphere.link > model.joint_count()) {
          throw RobotParseError("collision sphere link index out of range");
        }
        if (sphere.radius <= 0.0) throw RobotParseError("collision sphere radius must be positive");
        model.spheres_.push_back(sphere);
      }
    }

    if (doc.contains("reach_xy_m") && doc.contains("reach_z_m")) {
      model.reach_xy_ = doc["reach_xy_m"].get<double>();
      model.reach_z_ = doc["reach_z_m"].get<double>();
      model.reach_from_document_ = true;
    } else if (doc.contains("reach_xy_m") || doc.contains("reach_z_m")) {
      throw RobotParseError("reach_xy_m and reach_z_m must be given together");
    }
  } catch (const json::exception& e) {
    throw RobotParseError(std::string("invalid robot description: ") + e.what());
  }

  model.finalize();
  return model;
}

RobotModel RobotModel::parse_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RobotParseError("cannot open robot file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_text(buf.str());
}

void RobotModel::finalize() {
  if (joints_.empty()) throw RobotParseError("robot needs at least one joint");

  double length_sum = tcp_offset_.translation().norm();
  for (const auto& j : joints_) length_sum += j.origin.translation().norm();
  reach_bound_ = length_sum;

  if (!reach_from_document_) {
    reach_xy_ = length_sum;
    reach_z_ = length_sum;
  }
  if (reach_xy_ <= 0.0 || reach_z_ <= 0.0) {
    throw RobotParseError("reach_xy_m and reach_z_m must be positive");
  }

  sphere_pair_a_.clear();
  sphere_pair_b_.clear();
  for (std::size_t a = 0; a < spheres_.size(); ++a) {
    for (std::size_t b = a + 1; b < spheres_.size(); ++b) {
      if (std::abs(spheres_[a].link - spheres_[b].link) > 1) {
        sphere_pair_a_.push_back(a);
        sphere_pair_b_.push_back(b);
      }
    }
  }
}

JointConfig RobotModel::make_config(std::vector<double> values) const {
  if (static_cast<int>(values.size()) != joint_count()) {
    throw std::invalid_argument("joint config has " + std::to_string(values.size()) +
                                " values, robot has " + std::to_string(joint_count()) + " joints");
  }
  if (!within_limits(values)) throw std::invalid_argument("joint config violates joint limits");
  return JointConfig(std::move(values));
}

bool RobotModel::within_limits(std::span<const double> values) const {
  if (static_cast<int>(values.size()) != joint_count()) return false;
  for (int i = 0; i < joint_count(); ++i) {
    const Joint& j = joints_[static_cast<std::size_t>(i)];
    if (j.continuous) continue;
    if (values[static_cast<std::size_t>(i)] < j.lower - 1e-12 ||
        values[static_cast<std::size_t>(i)] > j.upper + 1e-12) {
      return false;
    }
  }
  return true;
}

Transform RobotModel::forward_kinematics(const JointConfig& q) const {
  return forward_kinematics(std::span<const double>(q.values()));
}

Transform RobotModel::forward_kinematics(std::span<const double> q) const {
  if (static_cast<int>(q.size()) != joint_count()) {
    throw std::invalid_argument("joint config size does not match joint count");
  }
  Transform t = Transform::Identity();
  for (int i = 0; i < joint_count(); ++i) {
    const Joint& j = joints_[static_cast<std::size_t>(i)];
    t = t * j.origin;
    t.linear() = t.linear() * Eigen::AngleAxisd(q[static_cast<std::size_t>(i)], j.axis).toRotationMatrix();
  }
  return t * tcp_offset_;
}

void RobotModel::link_frames(std::span<const double> q, std::vector<Transform>& out) const {
  if (static_cast<int>(q.size()) != joint_count()) {
    throw std::invalid_argument("joint config size does not match joint count");
  }
  out.resize(static_cast<std::size_t>(joint_count()) + 2);
  out[0] = Transform::Identity();
  Transform t = Transform::Identity();
  for (int i = 0; i < joint_count(); ++i) {
    const Joint& j = joints_[static_cast<std::size_t>(i)];
    t = t * j.origin;
    t.linear() = t.linear() * Eigen::AngleAxisd(q[static_cast<std::size_t>(i)], j.axis).toRotationMatrix();
    out[static_cast<std::size_t>(i) + 1] = t;
  }
  out[static_cast<std::size_t>(joint_count()) + 1] = t * tcp_offset_;
}

JointConfig RobotModel::sample_config(Rng& rng) const {
  std::vector<double> v(static_cast<std::size_t>(joint_count()));
  for (int i = 0; i < joint_count(); ++i) {
    const Joint& j = joints_[static_cast<std::size_t>(i)];
    if (j.continuous) {
      v[static_cast<std::size_t>(i)] = rng.uniform(-kPi, kPi);
    } else {
      v[static_cast<std::size_t>(i)] = rng.uniform(j.lower, j.upper);
    }
  }
  return JointConfig(std::move(v));
}

bool RobotModel::is_valid(const JointConfig& q) const {
  return is_valid(std::span<const double>(q.values()));
}

bool RobotModel::is_valid(std::span<const double> q) const {
  if (spheres_.empty()) return true;

  thread_local std::vector<Transform> frames;
  thread_local std::vector<Vec3> centers;
  link_frames(q, frames);

  centers.resize(spheres_.size());
  for (std::size_t s = 0; s < spheres_.size(); ++s) {
    centers[s] = frames[static_cast<std::size_t>(spheres_[s].link)] * spheres_[s].center;
    if (centers[s].z() < spheres_[s].radius) return false;  // ground plane at z = 0
  }
  for (std::size_t k = 0; k < sphere_pair_a_.size(); ++k) {
    const auto& sa = spheres_[sphere_pair_a_[k]];
    const auto& sb = spheres_[sphere_pair_b_[k]];
    const double min_dist = sa.radius + sb.radius;
    if ((centers[sphere_pair_a_[k]] - centers[sphere_pair_b_[k]]).squaredNorm() <
        min_dist * min_dist) {
      return false;
    }
  }
  return true;
}

RobotModel RobotModel::with_first_last_range(double range_deg) const {
  if (range_deg <= 0.0) throw std::invalid_argument("joint range must be positive");
  RobotModel copy = *this;
  const double range = deg_to_rad(range_deg);
  for (std::size_t idx : {std::size_t{0}, copy.joints_.size() - 1}) {
    Joint& j = copy.joints_[idx];
    if (range_deg >= 180.0) {
      j.continuous = true;
      j.lower = -kPi;
      j.upper = kPi;
    } else {
      j.continuous = false;
      j.lower = -range;
      j.upper = range;
    }
  }
  copy.finalize();
  return copy;
}

std::uint64_t RobotModel::content_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  hash_bytes(h, name_.data(), name_.size());
  for (const auto& j : joints_) {
    hash_bytes(h, j.name.data(), j.name.size());
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 4; ++c) hash_double(h, j.origin.matrix()(r, c));
    for (int k = 0; k < 3; ++k) hash_double(h, j.axis[k]);
    hash_double(h, j.lower);
    hash_double(h, j.upper);
    hash_double(h, j.continuous ? 1.0 : 0.0);
  }
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c) hash_double(h, tcp_offset_.matrix()(r, c));
  for (const auto& s : spheres_) {
    hash_double(h, static_cast<double>(s.link));
    for (int k = 0; k < 3; ++k) hash_double(h, s.center[k]);
    hash_double(h, s.radius);
  }
  hash_double(h, reach_xy_);
  hash_double(h, reach_z_);
  return h;
}

}  // namespace rm4d
