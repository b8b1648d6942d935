#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "rm4d/geometry.hpp"
#include "rm4d/ik_solver.hpp"
#include "rm4d/rng.hpp"
#include "rm4d/robot_model.hpp"

namespace rm4d {

/// Workspace-enclosing cylinder the evaluation poses are drawn from: base
/// disc of the given radius at z = 0, extending up to the given height.
struct Cylinder {
  double radius = 0.0;
  double height = 0.0;
};

/// Position uniform in the cylinder volume (radius via sqrt scaling),
/// orientation uniform on SO(3).
Transform sample_eval_pose(const Cylinder& cylinder, Rng& rng);

/// Evaluation poses with ground-truth labels from the IK oracle.
struct EvalPoseSet {
  Cylinder cylinder;
  std::vector<Transform> poses;
  std::vector<std::uint8_t> labels;     // empty until labeled
  std::vector<double> distances;        // oracle distance per pose
  std::vector<std::int32_t> attempts;   // oracle attempts per pose

  bool labeled() const { return labels.size() == poses.size() && !poses.empty(); }
  std::size_t size() const { return poses.size(); }
};

EvalPoseSet make_eval_poses(const Cylinder& cylinder, std::size_t count, std::uint64_t seed);

/// Labels every pose via solve_ik. Poses are processed in fixed-size batches,
/// each with its own rng stream keyed by batch index, so results do not
/// depend on the worker count.
void label_eval_poses(EvalPoseSet& set, const RobotModel& model, std::uint64_t seed,
                      const IkSettings& settings = {}, int threads = 0);

// Labeled pose CSV: r00..r22 (rotation row-major), px, py, pz, label,
// distance, attempts. Written with max precision so the file is a stable
// cache artifact.
void save_eval_set(const EvalPoseSet& set, std::ostream& out);
void save_eval_set_file(const EvalPoseSet& set, const std::string& path);
EvalPoseSet load_eval_set(std::istream& in);
EvalPoseSet load_eval_set_file(const std::string& path);

/// Cache key covering everything the labels depend on.
std::uint64_t eval_cache_key(const RobotModel& model, const Cylinder& cylinder, std::size_t count,
                             std::uint64_t seed, const IkSettings& settings);

/// Loads the labeled set from cache_dir if present, otherwise samples,
/// labels, and stores it. Returns the labeled set and the cache file path.
EvalPoseSet labeled_eval_set_cached(const RobotModel& model, const Cylinder& cylinder,
                                    std::size_t count, std::uint64_t seed,
                                    const std::string& cache_dir, const IkSettings& settings = {},
                                    int threads = 0, std::string* cache_path_out = nullptr);

struct ConfusionMetrics {
  std::uint64_t tp = 0, tn = 0, fp = 0, fn = 0;

  std::uint64_t total() const { return tp + tn + fp + fn; }
  double accuracy() const {
    return total() == 0 ? std::numeric_limits<double>::quiet_NaN()
                        : static_cast<double>(tp + tn) / static_cast<double>(total());
  }
  // Undefined rates (empty class) are NaN markers, never fabricated zeros.
  double tpr() const {
    return tp + fn == 0 ? std::numeric_limits<double>::quiet_NaN()
                        : static_cast<double>(tp) / static_cast<double>(tp + fn);
  }
  double fpr() const {
    return fp + tn == 0 ? std::numeric_limits<double>::quiet_NaN()
                        : static_cast<double>(fp) / static_cast<double>(fp + tn);
  }
};

/// Confusion counts of a reachability predictor against the labeled set.
ConfusionMetrics evaluate_predictions(const std::function<bool(const Transform&)>& predict,
                                      const EvalPoseSet& set);

}  // namespace rm4d
