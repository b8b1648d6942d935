#include "rm4d/construction.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <mutex>
#include <ostream>
#include <thread>

#include "rm4d/canonical.hpp"
#include "rm4d/threads.hpp"

namespace rm4d {
namespace {

constexpr std::uint64_t kBatchQuota = 4096;  // valid samples per batch
constexpr std::uint64_t kMaxRejectFactor = 100000;  // reject guard per batch

struct Batch {
  std::uint64_t stream_id = 0;
  std::uint64_t quota = 0;
  std::uint64_t first_ordinal = 0;  // global index of the batch's first valid sample
};

void format_metric(std::ostream& out, double v) {
  if (std::isnan(v)) {
    out << "nan";
  } else {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    out << buf;
  }
}

}  // namespace

BuildResult build_maps(const RobotModel& model, std::span<ReachabilityMap* const> maps,
                       const ConstructionSchedule& schedule, const BuildOptions& options) {
  schedule.validate();
  if (options.eval_set && !options.eval_set->labeled()) {
    throw std::invalid_argument("eval set must be labeled before construction metrics");
  }
  for (const ReachabilityMap* map : maps) {
    if (map->extent_xy() + 1e-9 < model.reach_xy() || map->extent_z() + 1e-9 < model.reach_z()) {
      throw std::invalid_argument("map extents do not enclose the robot workspace (" +
                                  model.name() + ")");
    }
  }

  const auto t_start = std::chrono::steady_clock::now();
  BuildResult result;
  result.rows.resize(maps.size());
  if (schedule.total_samples == 0) return result;

  const int n_threads = resolve_threads(options.threads);
  std::vector<std::uint64_t> prev_marked(maps.size());
  for (std::size_t m = 0; m < maps.size(); ++m) prev_marked[m] = maps[m]->marked_count();

  std::atomic<std::uint64_t> attempted_total{0};
  std::mutex retained_mutex;
  std::vector<std::pair<std::uint64_t, Transform>> retained;

  std::uint64_t next_stream = 0;
  std::uint64_t done = 0;
  while (done < schedule.total_samples) {
    const std::uint64_t window = std::min(schedule.checkpoint_every, schedule.total_samples - done);

    // Fixed-quota batches, each with its own generator stream: batch content
    // is independent of which worker runs it.
    std::vector<Batch> batches;
    std::uint64_t planned = 0;
    while (planned < window) {
      Batch b;
      b.stream_id = next_stream++;
      b.quota = std::min(kBatchQuota, window - planned);
      b.first_ordinal = done + planned;
      planned += b.quota;
      batches.push_back(b);
    }

    std::atomic<std::size_t> batch_cursor{0};
    std::atomic<bool> stalled{false};
    auto worker = [&]() {
      std::uint64_t attempted = 0;
      std::vector<std::pair<std::uint64_t, Transform>> local_retained;
      for (;;) {
        const std::size_t bi = batch_cursor.fetch_add(1);
        if (bi >= batches.size() || stalled.load(std::memory_order_relaxed)) break;
        const Batch& batch = batches[bi];
        Rng rng = Rng::for_stream(schedule.seed, 0xC0DE0000ULL + batch.stream_id);
        const std::uint64_t reject_cap = batch.quota * kMaxRejectFactor + kMaxRejectFactor;
        std::uint64_t produced = 0, tried = 0;
        while (produced < batch.quota) {
          if (++tried > reject_cap) {
            stalled.store(true, std::memory_order_relaxed);
            break;
          }
          const JointConfig q = model.sample_config(rng);
          ++attempted;
          if (!model.is_valid(q)) continue;
          const Transform pose = model.forward_kinematics(q);
          for (ReachabilityMap* map : maps) map->mark(pose);
          const std::uint64_t ordinal = batch.first_ordinal + produced;
          if (options.retain_stride > 0 && ordinal % options.retain_stride == 0) {
            local_retained.emplace_back(ordinal, pose);
          }
          ++produced;
        }
      }
      attempted_total.fetch_add(attempted, std::memory_order_relaxed);
      if (!local_retained.empty()) {
        std::lock_guard<std::mutex> lock(retained_mutex);
        retained.insert(retained.end(), local_retained.begin(), local_retained.end());
      }
    };

    const int workers = std::min<int>(n_threads, static_cast<int>(batches.size()));
    if (workers <= 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      pool.reserve(static_cast<std::size_t>(workers));
      for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
      for (auto& t : pool) t.join();
    }
    if (stalled.load()) {
      throw std::runtime_error(
          "construction stalled: nearly all sampled configurations are invalid");
    }

    done += window;

    // Checkpoint barrier: everything below sees the full window's marks.
    for (std::size_t m = 0; m < maps.size(); ++m) {
      MetricsRow row;
      row.samples = done;
      const std::uint64_t marked = maps[m]->marked_count();
      row.novel_cells = marked - prev_marked[m];
      prev_marked[m] = marked;
      if (options.eval_set) {
        row.has_eval = true;
        ReachabilityMap* map = maps[m];
        row.metrics = evaluate_predictions(
            [map](const Transform& t) { return map->query_forward(t); }, *options.eval_set);
      }
      if (options.on_checkpoint) options.on_checkpoint(m, row);
      result.rows[m].push_back(row);
    }
  }

  std::sort(retained.begin(), retained.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  result.retained_poses.reserve(retained.size());
  for (auto& [ordinal, pose] : retained) result.retained_poses.push_back(pose);

  result.valid_samples = done;
  result.attempted_samples = attempted_total.load();
  result.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return result;
}

BuildResult build_map(const RobotModel& model, ReachabilityMap& map,
                      const ConstructionSchedule& schedule, const BuildOptions& options) {
  ReachabilityMap* ptr = &map;
  return build_maps(model, std::span<ReachabilityMap* const>(&ptr, 1), schedule, options);
}

void write_metrics_header(std::ostream& out) {
  out << "samples,novel_cells,accuracy,tpr,fpr,map_type,robot,seed\n";
}

void append_metrics_rows(std::ostream& out, std::span<const MetricsRow> rows,
                         const std::string& map_type, const std::string& robot,
                         std::uint64_t seed) {
  for (const auto& row : rows) {
    out << row.samples << ',' << row.novel_cells << ',';
    if (row.has_eval) {
      format_metric(out, row.metrics.accuracy());
      out << ',';
      format_metric(out, row.metrics.tpr());
      out << ',';
      format_metric(out, row.metrics.fpr());
    } else {
      out << "nan,nan,nan";
    }
    out << ',' << map_type << ',' << robot << ',' << seed << '\n';
  }
}

void write_metrics_csv(std::ostream& out, std::span<const MetricsRow> rows,
                       const std::string& map_type, const std::string& robot,
                       std::uint64_t seed) {
  write_metrics_header(out);
  append_metrics_rows(out, rows, map_type, robot, seed);
}

std::vector<AblationRow> ablate_joint_limits(const RobotModel& base,
                                             const ConstructionSchedule& schedule,
                                             const AblationSpec& spec) {
  std::vector<AblationRow> out;
  for (const double range_deg : spec.ranges_deg) {
    const RobotModel model = base.with_first_last_range(range_deg);
    const GridParams params = GridParams::for_robot(model, spec.l_c, spec.delta_theta);

    ReachGrid4D grid(params);
    grid.robot_name = model.name();
    BuildOptions build_options;
    build_options.threads = spec.threads;
    build_map(model, grid, schedule, build_options);
    grid.sample_count = schedule.total_samples;

    const Cylinder cylinder{params.r_xy, params.r_z};
    EvalPoseSet eval;
    if (spec.cache_dir.empty()) {
      eval = make_eval_poses(cylinder, spec.eval_count, spec.eval_seed);
      label_eval_poses(eval, model, spec.eval_seed, spec.ik, spec.threads);
    } else {
      eval = labeled_eval_set_cached(model, cylinder, spec.eval_count, spec.eval_seed,
                                     spec.cache_dir, spec.ik, spec.threads);
    }

    AblationRow row;
    row.range_deg = range_deg;
    row.map_marked = grid.marked_count();
    for (auto label : eval.labels) row.eval_positives += label;
    row.metrics = evaluate_predictions(
        [&grid](const Transform& t) { return grid.query_forward(t); }, eval);
    out.push_back(row);
  }
  return out;
}

void write_ablation_csv(std::ostream& out, std::span<const AblationRow> rows,
                        const std::string& robot) {
  out << "range_deg,accuracy,tpr,fpr,marked_cells,eval_positives,robot\n";
  for (const auto& row : rows) {
    out << row.range_deg << ',';
    format_metric(out, row.metrics.accuracy());
    out << ',';
    format_metric(out, row.metrics.tpr());
    out << ',';
    format_metric(out, row.metrics.fpr());
    out << ',' << row.map_marked << ',' << row.eval_positives << ',' << robot << '\n';
  }
}

}  // namespace rm4d
