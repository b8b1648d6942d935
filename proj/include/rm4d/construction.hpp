#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "rm4d/evaluation.hpp"
#include "rm4d/geometry.hpp"
#include "rm4d/reach_map.hpp"
#include "rm4d/robot_model.hpp"

namespace rm4d {

/// Budget is counted in *valid* (collision-free) configurations; rejected
/// samples do not consume it.
struct ConstructionSchedule {
  std::uint64_t total_samples = 0;
  std::uint64_t checkpoint_every = 0;
  std::uint64_t seed = 0;

  void validate() const {
    if (total_samples > 0 && (checkpoint_every == 0 || checkpoint_every > total_samples)) {
      throw std::invalid_argument("checkpoint_every must be in [1, total_samples]");
    }
  }
};

struct MetricsRow {
  std::uint64_t samples = 0;        // valid samples so far
  std::uint64_t novel_cells = 0;    // cells newly marked in this window
  bool has_eval = false;
  ConfusionMetrics metrics;
};

struct BuildOptions {
  int threads = 0;                      // 0: RM4D_THREADS env, then hardware
  const EvalPoseSet* eval_set = nullptr;  // labeled; enables per-checkpoint metrics
  std::uint64_t retain_stride = 0;        // keep every n-th valid FK pose
  std::function<void(std::size_t map_index, const MetricsRow&)> on_checkpoint;
};

struct BuildResult {
  std::vector<std::vector<MetricsRow>> rows;  // one series per map
  std::vector<Transform> retained_poses;
  std::uint64_t valid_samples = 0;
  std::uint64_t attempted_samples = 0;
  double elapsed_seconds = 0.0;
};

/// Samples joint configurations, keeps the collision-free ones, and marks
/// each FK pose in every map, so all maps see the same sample stream. The
/// sample stream is a pure function of the schedule: work is split into
/// fixed-quota batches with per-batch rng streams, and checkpoints are
/// barriers at window boundaries, so results do not depend on thread count
/// or interleaving.
BuildResult build_maps(const RobotModel& model, std::span<ReachabilityMap* const> maps,
                       const ConstructionSchedule& schedule, const BuildOptions& options = {});

BuildResult build_map(const RobotModel& model, ReachabilityMap& map,
                      const ConstructionSchedule& schedule, const BuildOptions& options = {});

/// Metrics CSV: samples, novel_cells, accuracy, tpr, fpr, map_type, robot,
/// seed. Undefined rates are written as nan.
void write_metrics_csv(std::ostream& out, std::span<const MetricsRow> rows,
                       const std::string& map_type, const std::string& robot, std::uint64_t seed);
void write_metrics_header(std::ostream& out);
void append_metrics_rows(std::ostream& out, std::span<const MetricsRow> rows,
                         const std::string& map_type, const std::string& robot,
                         std::uint64_t seed);

struct AblationRow {
  double range_deg = 0.0;
  std::uint64_t map_marked = 0;
  std::uint64_t eval_positives = 0;
  ConfusionMetrics metrics;
};

struct AblationSpec {
  std::vector<double> ranges_deg;  // +/- range applied to first and last joint
  double l_c = 0.05;
  double delta_theta = deg_to_rad(5.0);
  std::uint64_t eval_count = 5000;
  std::uint64_t eval_seed = 1;
  std::string cache_dir;  // empty: label in memory, no cache
  IkSettings ik{};
  int threads = 0;
};

/// Rewrites the first/last joint limits to each +/- range, rebuilds the 4D
/// map, relabels the ground truth for the modified robot, and evaluates.
std::vector<AblationRow> ablate_joint_limits(const RobotModel& base,
                                             const ConstructionSchedule& schedule,
                                             const AblationSpec& spec);

void write_ablation_csv(std::ostream& out, std::span<const AblationRow> rows,
                        const std::string& robot);

}  // namespace rm4d
