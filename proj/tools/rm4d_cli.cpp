// Command-line operator surface: build maps, query them in both directions,
// evaluate against IK ground truth, run the joint-limit ablation, and plan
// base positions for grasp sets. All machine-readable output goes to files;
// stdout carries human-readable summaries only.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "rm4d/base_placement.hpp"
#include "rm4d/construction.hpp"
#include "rm4d/evaluation.hpp"
#include "rm4d/map_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitInternal = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  std::string robot;
  std::string map_type = "rm4d";
  double l_c = 0.05;
  double delta_theta_deg = 5.0;
  int n_dirs = 200;
  int n_inplane = 12;
  std::uint64_t total_samples = 1'000'000;
  std::uint64_t checkpoint_every = 100'000;
  std::uint64_t seed = 0;
  std::uint64_t eval_count = 10'000;
  std::uint64_t eval_seed = 1;
  std::string cache_dir = "out/labels";
  std::string output_dir = "out";
  int threads = 0;
};

ExperimentConfig load_config(const std::string& path) {
  ExperimentConfig cfg;
  if (path.empty()) return cfg;
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file: " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError("config parse error: " + std::string(e.what()));
  }
  cfg.robot = doc.value("robot", cfg.robot);
  cfg.map_type = doc.value("map_type", cfg.map_type);
  if (doc.contains("grid")) {
    const auto& g = doc["grid"];
    cfg.l_c = g.value("l_c", cfg.l_c);
    cfg.delta_theta_deg = g.value("delta_theta_deg", cfg.delta_theta_deg);
    cfg.n_dirs = g.value("n_dirs", cfg.n_dirs);
    cfg.n_inplane = g.value("n_inplane", cfg.n_inplane);
  }
  if (doc.contains("schedule")) {
    const auto& s = doc["schedule"];
    cfg.total_samples = s.value("total_samples", cfg.total_samples);
    cfg.checkpoint_every = s.value("checkpoint_every", cfg.checkpoint_every);
  }
  if (doc.contains("eval")) {
    const auto& e = doc["eval"];
    cfg.eval_count = e.value("count", cfg.eval_count);
    cfg.eval_seed = e.value("seed", cfg.eval_seed);
    cfg.cache_dir = e.value("cache_dir", cfg.cache_dir);
  }
  cfg.seed = doc.value("seed", cfg.seed);
  cfg.output_dir = doc.value("output_dir", cfg.output_dir);
  cfg.threads = doc.value("threads", cfg.threads);
  return cfg;
}

rm4d::RobotModel load_robot(const std::string& path) {
  if (path.empty()) throw UsageError("a robot file is required (--robot or config)");
  try {
    return rm4d::RobotModel::parse_file(path);
  } catch (const rm4d::RobotParseError& e) {
    throw DataError("robot file '" + path + "': " + e.what());
  }
}

rm4d::Transform parse_pose_arg(const std::string& text) {
  std::array<double, 12> v{};
  std::stringstream ss(text);
  std::string field;
  for (int k = 0; k < 12; ++k) {
    if (!std::getline(ss, field, ',')) {
      throw UsageError("pose needs 12 comma-separated values (rotation row-major, position)");
    }
    try {
      v[static_cast<std::size_t>(k)] = std::stod(field);
    } catch (const std::exception&) {
      throw UsageError("malformed pose value: '" + field + "'");
    }
  }
  if (std::getline(ss, field, ',')) throw UsageError("pose has more than 12 values");

  rm4d::Mat3 r;
  r << v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8];
  if (!rm4d::is_rotation_matrix(r, 1e-6)) {
    throw UsageError("pose rotation part is not orthonormal");
  }
  rm4d::Transform pose = rm4d::Transform::Identity();
  pose.linear() = r;
  pose.translation() = rm4d::Vec3(v[9], v[10], v[11]);
  return pose;
}

std::string map_file_name(const ExperimentConfig& cfg, const std::string& robot_name) {
  return (fs::path(cfg.output_dir) / (robot_name + "_" + cfg.map_type + ".map")).string();
}

int cmd_build(const ExperimentConfig& cfg, bool with_eval) {
  const rm4d::RobotModel robot = load_robot(cfg.robot);
  const rm4d::GridParams params =
      rm4d::GridParams::for_robot(robot, cfg.l_c, rm4d::deg_to_rad(cfg.delta_theta_deg));
  fs::create_directories(cfg.output_dir);

  std::unique_ptr<rm4d::ReachGrid4D> reach;
  std::unique_ptr<rm4d::CapabilityGrid> capability;
  rm4d::ReachabilityMap* map = nullptr;
  if (cfg.map_type == "rm4d") {
    reach = std::make_unique<rm4d::ReachGrid4D>(params);
    reach->robot_name = robot.name();
    map = reach.get();
  } else if (cfg.map_type == "zach6d" || cfg.map_type == "zach5d") {
    rm4d::CapabilityParams cp;
    cp.r_xy = params.r_xy;
    cp.r_z = params.r_z;
    cp.l_c = params.l_c;
    cp.n_dirs = cfg.n_dirs;
    cp.n_inplane = cfg.map_type == "zach5d" ? 1 : cfg.n_inplane;
    capability = std::make_unique<rm4d::CapabilityGrid>(cp);
    capability->robot_name = robot.name();
    map = capability.get();
  } else {
    throw UsageError("unknown map type '" + cfg.map_type + "' (rm4d, zach6d, zach5d)");
  }

  rm4d::ConstructionSchedule schedule{cfg.total_samples, cfg.checkpoint_every, cfg.seed};
  rm4d::BuildOptions options;
  options.threads = cfg.threads;

  rm4d::EvalPoseSet eval;
  if (with_eval) {
    eval = rm4d::labeled_eval_set_cached(robot, rm4d::Cylinder{params.r_xy, params.r_z},
                                         cfg.eval_count, cfg.eval_seed, cfg.cache_dir, {},
                                         cfg.threads);
    options.eval_set = &eval;
  }

  const rm4d::BuildResult result = rm4d::build_map(robot, *map, schedule, options);

  const std::string map_path = map_file_name(cfg, robot.name());
  if (reach) {
    reach->sample_count = result.valid_samples;
    rm4d::save_map_file(*reach, map_path);
  } else {
    capability->sample_count = result.valid_samples;
    rm4d::save_map_file(*capability, map_path);
  }

  const std::string metrics_path =
      (fs::path(cfg.output_dir) / (robot.name() + "_" + cfg.map_type + "_metrics.csv")).string();
  {
    std::ofstream out(metrics_path, std::ios::binary);
    if (!out) throw DataError("cannot write metrics file: " + metrics_path);
    rm4d::write_metrics_csv(out, result.rows.at(0), cfg.map_type, robot.name(), cfg.seed);
  }

  std::cout << "map type:        " << cfg.map_type << "\n"
            << "robot:           " << robot.name() << "\n"
            << "cells:           " << map->cell_count() << "\n"
            << "marked:          " << map->marked_count() << "\n"
            << "valid samples:   " << result.valid_samples << "\n"
            << "attempted:       " << result.attempted_samples << "\n"
            << "out of range:    " << map->out_of_range_marks() << "\n"
            << "elapsed:         " << result.elapsed_seconds << " s\n"
            << "map file:        " << map_path << "\n"
            << "metrics file:    " << metrics_path << "\n";
  return kExitOk;
}

int cmd_query(const std::string& map_path, const std::string& pose_text) {
  const rm4d::Transform pose = parse_pose_arg(pose_text);
  const auto map = rm4d::load_any_map_file(map_path);
  std::cout << (map->query_forward(pose) ? "reachable" : "unreachable") << "\n";
  return kExitOk;
}

int cmd_invert(const std::string& map_path, const std::string& pose_text,
               const std::string& out_path) {
  const rm4d::Transform pose = parse_pose_arg(pose_text);
  if (rm4d::peek_map_kind(map_path) != rm4d::MapFileKind::reach4d) {
    throw DataError("inverse queries need an RM4D map; baseline maps have no inverse");
  }
  const rm4d::ReachGrid4D map = rm4d::load_reach_grid_file(map_path);
  const auto result = map.query_inverse(pose);

  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw DataError("cannot write base positions file: " + out_path);
  out << "x_b,y_b\n";
  char buf[64];
  for (const auto& base : result.base_positions) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", base.x(), base.y());
    out << buf;
  }
  std::cout << "base positions:  " << result.base_positions.size() << "\n"
            << (result.out_of_range ? "note: pose height or tilt is outside the map range\n" : "")
            << "output file:     " << out_path << "\n";
  return kExitOk;
}

int cmd_eval(const ExperimentConfig& cfg, const std::string& map_path,
             const std::string& out_path) {
  const rm4d::RobotModel robot = load_robot(cfg.robot);

  // The eval cylinder matches the map extents so cached labels are shared by
  // every map built for this robot at these extents.
  std::unique_ptr<rm4d::ReachabilityMap> map;
  rm4d::Cylinder cylinder;
  std::uint64_t map_samples = 0;
  if (rm4d::peek_map_kind(map_path) == rm4d::MapFileKind::reach4d) {
    auto grid = std::make_unique<rm4d::ReachGrid4D>(rm4d::load_reach_grid_file(map_path));
    cylinder = rm4d::Cylinder{grid->params().r_xy, grid->params().r_z};
    map_samples = grid->sample_count;
    map = std::move(grid);
  } else {
    auto grid = std::make_unique<rm4d::CapabilityGrid>(rm4d::load_capability_grid_file(map_path));
    cylinder = rm4d::Cylinder{grid->params().r_xy, grid->params().r_z};
    map_samples = grid->sample_count;
    map = std::move(grid);
  }

  std::string cache_path;
  const rm4d::EvalPoseSet eval =
      rm4d::labeled_eval_set_cached(robot, cylinder, cfg.eval_count, cfg.eval_seed, cfg.cache_dir,
                                    {}, cfg.threads, &cache_path);

  const auto metrics = rm4d::evaluate_predictions(
      [&map](const rm4d::Transform& t) { return map->query_forward(t); }, eval);

  rm4d::MetricsRow row;
  row.samples = map_samples;
  row.has_eval = true;
  row.metrics = metrics;

  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw DataError("cannot write metrics file: " + out_path);
  rm4d::write_metrics_csv(out, std::span<const rm4d::MetricsRow>(&row, 1), map->type_name(),
                          robot.name(), cfg.eval_seed);

  std::cout << "eval poses:      " << eval.size() << "\n"
            << "labels cache:    " << cache_path << "\n"
            << "accuracy:        " << metrics.accuracy() << "\n"
            << "tpr:             " << metrics.tpr() << "\n"
            << "fpr:             " << metrics.fpr() << "\n"
            << "output file:     " << out_path << "\n";
  return kExitOk;
}

int cmd_place(const ExperimentConfig& cfg, const std::string& map_path,
              const std::string& grasp_path, const std::string& synth_spec, int synth_per_object,
              std::uint64_t synth_seed) {
  if (rm4d::peek_map_kind(map_path) != rm4d::MapFileKind::reach4d) {
    throw DataError("base placement needs an RM4D map; baseline maps have no inverse");
  }
  const rm4d::ReachGrid4D map = rm4d::load_reach_grid_file(map_path);

  std::vector<rm4d::GraspSet> sets;
  if (!grasp_path.empty()) {
    sets = rm4d::load_grasp_sets_file(grasp_path);
  } else if (!synth_spec.empty()) {
    rm4d::Rng rng(synth_seed);
    std::stringstream ss(synth_spec);
    std::string group;
    int object_index = 0;
    while (std::getline(ss, group, ';')) {
      std::stringstream gs(group);
      std::string field;
      std::array<double, 3> c{};
      for (int k = 0; k < 3; ++k) {
        if (!std::getline(gs, field, ',')) throw UsageError("--synth wants x,y,z;x,y,z;...");
        c[static_cast<std::size_t>(k)] = std::stod(field);
      }
      sets.push_back(rm4d::synthesize_grasps("object" + std::to_string(object_index++),
                                             rm4d::Vec3(c[0], c[1], c[2]), synth_per_object, rng));
    }
  } else {
    throw UsageError("either --grasps or --synth is required");
  }
  if (sets.empty() || sets.front().poses.empty()) throw DataError("grasp set is empty");

  fs::create_directories(cfg.output_dir);
  const auto spec =
      rm4d::PlacementGridSpec::covering(sets, map.params().r_xy, map.params().l_c);

  const auto t0 = std::chrono::steady_clock::now();
  std::vector<rm4d::PlacementGrid> grids;
  grids.reserve(sets.size());
  std::size_t total_grasps = 0;
  for (const auto& set : sets) {
    grids.push_back(rm4d::aggregate_inverse(map, set, spec, cfg.threads));
    total_grasps += set.poses.size();
  }
  const rm4d::PlacementGrid combined = rm4d::combine_min(grids);
  const rm4d::BestPlacement best = rm4d::select_best(combined);
  const double grid_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const auto t1 = std::chrono::steady_clock::now();
  std::vector<std::size_t> kept_total;
  std::vector<std::pair<std::string, std::size_t>> kept_per_object;
  if (best.feasible) {
    for (const auto& set : sets) {
      const auto kept = rm4d::filter_reachable(map, rm4d::Vec2(best.x, best.y), set);
      kept_per_object.emplace_back(set.object_id, kept.size());
    }
  }
  const double filter_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t1).count();

  const std::string grid_path = (fs::path(cfg.output_dir) / "placement_grid.csv").string();
  const std::string sidecar_path = (fs::path(cfg.output_dir) / "placement_grid.json").string();
  const std::string kept_path = (fs::path(cfg.output_dir) / "reachable_grasps.csv").string();
  {
    std::ofstream out(grid_path, std::ios::binary);
    if (!out) throw DataError("cannot write placement grid: " + grid_path);
    rm4d::save_placement_csv(combined, out);
  }
  {
    std::ofstream out(sidecar_path, std::ios::binary);
    rm4d::save_placement_json(combined, best, out);
  }
  {
    std::ofstream out(kept_path, std::ios::binary);
    out << "object_id,grasp_index\n";
    if (best.feasible) {
      for (const auto& set : sets) {
        for (std::size_t idx : rm4d::filter_reachable(map, rm4d::Vec2(best.x, best.y), set)) {
          out << set.object_id << ',' << idx << '\n';
        }
      }
    }
  }

  std::cout << "objects:         " << sets.size() << " (" << total_grasps << " grasp poses)\n"
            << "grid time:       " << grid_seconds << " s\n"
            << "filter time:     " << filter_seconds << " s\n";
  if (best.feasible) {
    std::cout << "best base:       (" << best.x << ", " << best.y << ") score " << best.score
              << "\n";
    for (const auto& [object_id, count] : kept_per_object) {
      std::cout << "  reachable from best base, " << object_id << ": " << count << "\n";
    }
  } else {
    std::cout << "no feasible base position: some object has no reachable grasp anywhere\n";
  }
  std::cout << "grid file:       " << grid_path << "\n"
            << "sidecar:         " << sidecar_path << "\n"
            << "grasp list:      " << kept_path << "\n";
  return kExitOk;
}

int cmd_ablate(const ExperimentConfig& cfg, const std::string& ranges_text) {
  const rm4d::RobotModel robot = load_robot(cfg.robot);
  fs::create_directories(cfg.output_dir);

  rm4d::AblationSpec spec;
  std::stringstream ss(ranges_text);
  std::string field;
  while (std::getline(ss, field, ',')) {
    try {
      spec.ranges_deg.push_back(std::stod(field));
    } catch (const std::exception&) {
      throw UsageError("malformed range list, want e.g. 180,166,160,150");
    }
  }
  if (spec.ranges_deg.empty()) throw UsageError("at least one range is required");
  spec.l_c = cfg.l_c;
  spec.delta_theta = rm4d::deg_to_rad(cfg.delta_theta_deg);
  spec.eval_count = cfg.eval_count;
  spec.eval_seed = cfg.eval_seed;
  spec.cache_dir = cfg.cache_dir;
  spec.threads = cfg.threads;

  rm4d::ConstructionSchedule schedule{cfg.total_samples, cfg.checkpoint_every, cfg.seed};
  const auto rows = rm4d::ablate_joint_limits(robot, schedule, spec);

  const std::string out_path =
      (fs::path(cfg.output_dir) / (robot.name() + "_ablation.csv")).string();
  {
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw DataError("cannot write ablation file: " + out_path);
    rm4d::write_ablation_csv(out, rows, robot.name());
  }

  std::cout << "range_deg  accuracy  tpr      fpr\n";
  for (const auto& row : rows) {
    std::printf("%-10.5g %-9.4f %-8.4f %-8.4f\n", row.range_deg, row.metrics.accuracy(),
                row.metrics.tpr(), row.metrics.fpr());
  }
  std::cout << "output file:     " << out_path << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RM4D: combined forward/inverse reachability maps for robot arms"};
  app.require_subcommand(1);
  app.fallthrough();  // --config may follow the subcommand name

  std::string config_path;
  app.add_option("--config", config_path, "JSON experiment config; flags override its values");

  // Shared overrides; registered per subcommand where they make sense.
  std::string robot_path, map_path, pose_text, out_path, grasp_path, synth_spec, ranges_text;
  std::string map_type;
  std::uint64_t samples = 0, checkpoint = 0, seed = 0, eval_count = 0, eval_seed = 0;
  double l_c = 0.0, delta_theta_deg = 0.0;
  int threads = -1, synth_per_object = 200;
  std::string output_dir, cache_dir;
  bool with_eval = false;

  auto add_common = [&](CLI::App* sub, bool wants_robot) {
    if (wants_robot) sub->add_option("--robot", robot_path, "robot description file");
    sub->add_option("--threads", threads, "worker threads (0 = all cores, env RM4D_THREADS)");
    sub->add_option("--out-dir", output_dir, "output directory");
  };

  CLI::App* build = app.add_subcommand("build", "construct a map by sampling configurations");
  add_common(build, true);
  build->add_option("--map-type", map_type, "rm4d, zach6d, or zach5d");
  build->add_option("--samples", samples, "valid configurations to sample");
  build->add_option("--checkpoint", checkpoint, "metrics window size");
  build->add_option("--seed", seed, "construction seed");
  build->add_option("--cell", l_c, "voxel edge length in meters");
  build->add_option("--theta-step-deg", delta_theta_deg, "polar angle step in degrees");
  build->add_flag("--with-eval", with_eval, "label an eval set and track accuracy per window");
  build->add_option("--eval-count", eval_count, "evaluation pose count");
  build->add_option("--eval-seed", eval_seed, "evaluation pose seed");
  build->add_option("--cache-dir", cache_dir, "ground-truth label cache directory");

  CLI::App* query = app.add_subcommand("query", "forward reachability of one TCP pose");
  query->add_option("--map", map_path, "map file")->required();
  query->add_option("--pose", pose_text, "12 values: rotation row-major, then position")
      ->required();

  CLI::App* invert = app.add_subcommand("invert", "base positions for one world TCP pose");
  invert->add_option("--map", map_path, "RM4D map file")->required();
  invert->add_option("--pose", pose_text, "12 values: rotation row-major, then position")
      ->required();
  invert->add_option("--out", out_path, "base positions CSV")->required();

  CLI::App* eval = app.add_subcommand("eval", "accuracy/TPR/FPR against IK ground truth");
  add_common(eval, true);
  eval->add_option("--map", map_path, "map file")->required();
  eval->add_option("--out", out_path, "metrics CSV")->required();
  eval->add_option("--eval-count", eval_count, "evaluation pose count");
  eval->add_option("--eval-seed", eval_seed, "evaluation pose seed");
  eval->add_option("--cache-dir", cache_dir, "ground-truth label cache directory");

  CLI::App* place = app.add_subcommand("place", "multi-object base placement from grasp sets");
  add_common(place, false);
  place->add_option("--map", map_path, "RM4D map file")->required();
  place->add_option("--grasps", grasp_path, "grasp pose CSV (object_id + 12 values per row)");
  place->add_option("--synth", synth_spec, "synthesize grasps around centers: x,y,z;x,y,z;...");
  place->add_option("--per-object", synth_per_object, "synthesized grasps per object");
  place->add_option("--seed", seed, "seed for synthesized grasps");

  CLI::App* ablate = app.add_subcommand("ablate", "first/last joint range ladder");
  add_common(ablate, true);
  ablate->add_option("--ranges", ranges_text, "comma list of +/- ranges in degrees")->required();
  ablate->add_option("--samples", samples, "valid configurations per map");
  ablate->add_option("--checkpoint", checkpoint, "construction window size");
  ablate->add_option("--seed", seed, "construction seed");
  ablate->add_option("--cell", l_c, "voxel edge length in meters");
  ablate->add_option("--eval-count", eval_count, "evaluation pose count");
  ablate->add_option("--eval-seed", eval_seed, "evaluation pose seed");
  ablate->add_option("--cache-dir", cache_dir, "ground-truth label cache directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    ExperimentConfig cfg = load_config(config_path);
    if (!robot_path.empty()) cfg.robot = robot_path;
    if (!map_type.empty()) cfg.map_type = map_type;
    if (samples > 0) cfg.total_samples = samples;
    if (checkpoint > 0) cfg.checkpoint_every = checkpoint;
    if (build->count("--seed") || place->count("--seed") || ablate->count("--seed")) {
      cfg.seed = seed;
    }
    if (eval_count > 0) cfg.eval_count = eval_count;
    if (eval_seed > 0) cfg.eval_seed = eval_seed;
    if (l_c > 0.0) cfg.l_c = l_c;
    if (delta_theta_deg > 0.0) cfg.delta_theta_deg = delta_theta_deg;
    if (threads >= 0) cfg.threads = threads;
    if (!output_dir.empty()) cfg.output_dir = output_dir;
    if (!cache_dir.empty()) cfg.cache_dir = cache_dir;
    cfg.checkpoint_every = std::min(cfg.checkpoint_every, std::max<std::uint64_t>(cfg.total_samples, 1));

    if (build->parsed()) return cmd_build(cfg, with_eval);
    if (query->parsed()) return cmd_query(map_path, pose_text);
    if (invert->parsed()) return cmd_invert(map_path, pose_text, out_path);
    if (eval->parsed()) return cmd_eval(cfg, map_path, out_path);
    if (place->parsed()) {
      return cmd_place(cfg, map_path, grasp_path, synth_spec, synth_per_object, cfg.seed);
    }
    if (ablate->parsed()) return cmd_ablate(cfg, ranges_text);
    throw UsageError("no subcommand given");
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const rm4d::MapIoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const rm4d::RobotParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}
