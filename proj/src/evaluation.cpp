#include "rm4d/evaluation.hpp"

#include "rm4d/threads.hpp"

#include <array>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace rm4d {
namespace {

constexpr std::size_t kLabelBatch = 256;

void write_double(std::ostream& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  out.write(buf, res.ptr - buf);
}

}  // namespace

Transform sample_eval_pose(const Cylinder& cylinder, Rng& rng) {
  const double radius = cylinder.radius * std::sqrt(rng.uniform());
  const double angle = rng.uniform(-kPi, kPi);
  const double height = rng.uniform(0.0, cylinder.height);

  Transform pose = Transform::Identity();
  pose.linear() = rng.random_rotation();
  pose.translation() = Vec3(radius * std::cos(angle), radius * std::sin(angle), height);
  return pose;
}

EvalPoseSet make_eval_poses(const Cylinder& cylinder, std::size_t count, std::uint64_t seed) {
  EvalPoseSet set;
  set.cylinder = cylinder;
  set.poses.reserve(count);
  Rng rng = Rng::for_stream(seed, 0x9e3779b9ULL);
  for (std::size_t i = 0; i < count; ++i) set.poses.push_back(sample_eval_pose(cylinder, rng));
  return set;
}

void label_eval_poses(EvalPoseSet& set, const RobotModel& model, std::uint64_t seed,
                      const IkSettings& settings, int threads) {
  const std::size_t n = set.poses.size();
  set.labels.assign(n, 0);
  set.distances.assign(n, 0.0);
  set.attempts.assign(n, 0);

  const std::size_t n_batches = (n + kLabelBatch - 1) / kLabelBatch;
  std::atomic<std::size_t> next_batch{0};

  auto worker = [&]() {
    for (;;) {
      const std::size_t b = next_batch.fetch_add(1);
      if (b >= n_batches) return;
      Rng rng = Rng::for_stream(seed, b + 1);
      const std::size_t begin = b * kLabelBatch;
      const std::size_t end = std::min(n, begin + kLabelBatch);
      for (std::size_t i = begin; i < end; ++i) {
        const IkResult r = solve_ik(model, set.poses[i], rng, settings);
        set.labels[i] = r.reachable ? 1 : 0;
        set.distances[i] = r.distance;
        set.attempts[i] = r.attempts_used;
      }
    }
  };

  const int n_threads = std::min<int>(resolve_threads(threads), static_cast<int>(n_batches) + 1);
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
}

void save_eval_set(const EvalPoseSet& set, std::ostream& out) {
  out << "r00,r01,r02,r10,r11,r12,r20,r21,r22,px,py,pz,label,distance,attempts\n";
  for (std::size_t i = 0; i < set.poses.size(); ++i) {
    const Mat3 r = set.poses[i].linear();
    const Vec3 p = set.poses[i].translation();
    for (int row = 0; row < 3; ++row) {
      for (int col = 0; col < 3; ++col) {
        write_double(out, r(row, col));
        out << ',';
      }
    }
    write_double(out, p.x());
    out << ',';
    write_double(out, p.y());
    out << ',';
    write_double(out, p.z());
    out << ',' << (set.labels.empty() ? 0 : int(set.labels[i])) << ',';
    write_double(out, set.distances.empty() ? 0.0 : set.distances[i]);
    out << ',' << (set.attempts.empty() ? 0 : set.attempts[i]) << '\n';
  }
}

void save_eval_set_file(const EvalPoseSet& set, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  save_eval_set(set, out);
  if (!out) throw std::runtime_error("write failure: " + path);
}

EvalPoseSet load_eval_set(std::istream& in) {
  EvalPoseSet set;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty labeled pose file");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::array<double, 15> v{};
    std::size_t pos = 0;
    for (int k = 0; k < 15; ++k) {
      const std::size_t comma = line.find(',', pos);
      const std::string field = line.substr(pos, comma == std::string::npos ? comma : comma - pos);
      try {
        v[static_cast<std::size_t>(k)] = std::stod(field);
      } catch (const std::exception&) {
        throw std::runtime_error("malformed labeled pose row: " + line);
      }
      if (comma == std::string::npos && k < 14) {
        throw std::runtime_error("labeled pose row has too few columns: " + line);
      }
      pos = comma + 1;
    }
    Transform pose = Transform::Identity();
    Mat3 r;
    r << v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8];
    pose.linear() = r;
    pose.translation() = Vec3(v[9], v[10], v[11]);
    set.poses.push_back(pose);
    set.labels.push_back(static_cast<std::uint8_t>(v[12] != 0.0));
    set.distances.push_back(v[13]);
    set.attempts.push_back(static_cast<std::int32_t>(v[14]));
  }
  return set;
}

EvalPoseSet load_eval_set_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open labeled pose file: " + path);
  return load_eval_set(in);
}

std::uint64_t eval_cache_key(const RobotModel& model, const Cylinder& cylinder, std::size_t count,
                             std::uint64_t seed, const IkSettings& settings) {
  std::uint64_t h = model.content_hash();
  auto mix = [&h](std::uint64_t v) {
    h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  };
  auto mix_double = [&](double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    mix(bits);
  };
  mix_double(cylinder.radius);
  mix_double(cylinder.height);
  mix(count);
  mix(seed);
  mix(static_cast<std::uint64_t>(settings.max_attempts));
  mix(static_cast<std::uint64_t>(settings.max_iterations));
  mix_double(settings.lambda_init);
  mix_double(settings.step_tolerance);
  mix_double(settings.weights.points_per_mm);
  mix_double(settings.weights.points_per_deg);
  mix_double(settings.weights.threshold);
  return h;
}

EvalPoseSet labeled_eval_set_cached(const RobotModel& model, const Cylinder& cylinder,
                                    std::size_t count, std::uint64_t seed,
                                    const std::string& cache_dir, const IkSettings& settings,
                                    int threads, std::string* cache_path_out) {
  namespace fs = std::filesystem;
  fs::create_directories(cache_dir);

  char name[64];
  std::snprintf(name, sizeof(name), "labels_%016llx.csv",
                static_cast<unsigned long long>(eval_cache_key(model, cylinder, count, seed, settings)));
  const std::string path = (fs::path(cache_dir) / name).string();
  if (cache_path_out) *cache_path_out = path;

  if (fs::exists(path)) {
    EvalPoseSet set = load_eval_set_file(path);
    set.cylinder = cylinder;
    if (set.size() == count) return set;
    // Stale or partial cache entry: fall through and regenerate.
  }

  EvalPoseSet set = make_eval_poses(cylinder, count, seed);
  label_eval_poses(set, model, seed, settings, threads);
  save_eval_set_file(set, path);
  return set;
}

ConfusionMetrics evaluate_predictions(const std::function<bool(const Transform&)>& predict,
                                      const EvalPoseSet& set) {
  if (!set.labeled()) throw std::invalid_argument("evaluation set has no ground-truth labels");
  ConfusionMetrics m;
  for (std::size_t i = 0; i < set.poses.size(); ++i) {
    const bool predicted = predict(set.poses[i]);
    const bool actual = set.labels[i] != 0;
    if (predicted && actual) ++m.tp;
    else if (!predicted && !actual) ++m.tn;
    else if (predicted && !actual) ++m.fp;
    else ++m.fn;
  }
  return m;
}

}  // namespace rm4d
