#include "mcpose/harness.hpp"

#include <omp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

#include "mcpose/error.hpp"
#include "mcpose/io.hpp"

namespace mcpose {

std::string_view method_name(Method method) noexcept {
  switch (method) {
    case Method::FourCameras: return "4cameras";
    case Method::TwoCameras: return "2cameras";
    case Method::Cam1: return "cam1";
    case Method::Cam2: return "cam2";
    case Method::Cam3: return "cam3";
    case Method::Cam4: return "cam4";
    case Method::RC: return "RC";
  }
  return "?";
}

Method method_from_name(std::string_view name) {
  for (Method m : kAllMethods) {
    if (method_name(m) == name) return m;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown method '" + std::string(name) + "'");
}

std::vector<Method> parse_methods(std::string_view list) {
  std::vector<Method> methods;
  while (!list.empty()) {
    const std::size_t comma = list.find(',');
    const std::string_view item = list.substr(0, comma);
    if (!item.empty()) {
      const Method m = method_from_name(item);
      bool seen = false;
      for (Method existing : methods) seen = seen || existing == m;
      if (!seen) methods.push_back(m);
    }
    if (comma == std::string_view::npos) break;
    list.remove_prefix(comma + 1);
  }
  if (methods.empty()) throw Error(ErrorCode::InvalidArgument, "empty method list");
  return methods;
}

CameraRig default_overlapping_rig(const Intrinsics& intrinsics) {
  const double pi = std::acos(-1.0);
  return CameraRig({{Vec3::Zero(), Mat3::Identity(), intrinsics},
                    {Vec3(0.1, 0.0, 0.0), Mat3::Identity(), intrinsics},
                    {Vec3(0.0, 0.0, -0.1), rot_y(pi), intrinsics},
                    {Vec3(-0.1, 0.0, -0.1), rot_y(pi), intrinsics}},
                   Layout::Overlapping);
}

CameraRig default_nonoverlapping_rig(const Intrinsics& intrinsics) {
  const double pi = std::acos(-1.0);
  // Back-to-back pairs share the midpoint (0, 0, -0.05); every camera is
  // 0.1 m from camera 1.
  const double side = std::sqrt(0.1 * 0.1 - 0.05 * 0.05);
  return CameraRig({{Vec3::Zero(), Mat3::Identity(), intrinsics},
                    {Vec3(side, 0.0, -0.05), rot_y(pi / 2), intrinsics},
                    {Vec3(0.0, 0.0, -0.1), rot_y(pi), intrinsics},
                    {Vec3(-side, 0.0, -0.05), rot_y(-pi / 2), intrinsics}},
                   Layout::NonOverlapping);
}

void ExperimentConfig::validate() const {
  sim.validate();
  tuning.validate();
  pipeline.validate();
  if (rig_overlap.layout() != Layout::Overlapping || rig_overlap.size() != 4) {
    throw Error(ErrorCode::InvalidArgument, "overlapping rig must hold two stereo pairs");
  }
  if (rig_nonoverlap.layout() != Layout::NonOverlapping || rig_nonoverlap.size() != 4) {
    throw Error(ErrorCode::InvalidArgument, "non-overlapping rig must hold four cameras");
  }
  if (methods.empty()) throw Error(ErrorCode::InvalidArgument, "no methods requested");
}

ExperimentConfig desk_scale_config() {
  ExperimentConfig cfg;
  cfg.sim.n_points = 2000;
  cfg.sim.n_runs = 50;
  cfg.sim.n_frames = 100;
  return cfg;
}

const ErrorRow& ExperimentReport::row(Method method) const {
  for (std::size_t i = 0; i < methods.size(); ++i) {
    if (methods[i] == method) return rows[i];
  }
  throw Error(ErrorCode::InvalidArgument,
              "report has no row for " + std::string(method_name(method)));
}

namespace {

bool same_camera(const Camera& a, const Camera& b) {
  const Intrinsics& x = a.intrinsics;
  const Intrinsics& y = b.intrinsics;
  return a.D == b.D && a.R == b.R && x.fx == y.fx && x.fy == y.fy && x.cx == y.cx &&
         x.cy == y.cy && x.width == y.width && x.height == y.height;
}

// The six physical cameras behind both layouts; shared mounts are rendered
// once so both layouts see identical pixels.
struct PhysicalRig {
  CameraRig rig;
  std::vector<std::size_t> overlap;
  std::vector<std::size_t> nonoverlap;
};

PhysicalRig physical_rig(const ExperimentConfig& cfg) {
  PhysicalRig out;
  std::vector<Camera> cameras;
  auto index_of = [&](const Camera& c) {
    for (std::size_t i = 0; i < cameras.size(); ++i) {
      if (same_camera(cameras[i], c)) return i;
    }
    cameras.push_back(c);
    return cameras.size() - 1;
  };
  for (const Camera& c : cfg.rig_overlap.cameras()) out.overlap.push_back(index_of(c));
  for (const Camera& c : cfg.rig_nonoverlap.cameras()) out.nonoverlap.push_back(index_of(c));
  out.rig = CameraRig(std::move(cameras), Layout::NonOverlapping);
  return out;
}

bool wants(const ExperimentConfig& cfg, Method m) {
  for (Method x : cfg.methods) {
    if (x == m) return true;
  }
  return false;
}

}  // namespace

TrialData simulate_trial(const ExperimentConfig& cfg, std::size_t run) {
  TrialData data;
  Rng scene_rng = derive_rng(cfg.sim.seed, {run, 0});
  data.scene = gen_scene(cfg.sim, scene_rng);
  Rng traj_rng = derive_rng(cfg.sim.seed, {run, 1});
  data.truth = gen_trajectory(cfg.sim, traj_rng);

  const PhysicalRig phys = physical_rig(cfg);
  const std::uint64_t render_seed = mix64(cfg.sim.seed ^ mix64(run + 0x2545f4914f6cdd1dULL));
  const ObservationStream all = render_sequence(data.scene, data.truth, phys.rig, cfg.sim, render_seed);
  data.overlap = all.select(phys.overlap);
  data.nonoverlap = all.select(phys.nonoverlap);
  return data;
}

TrialResult run_trial(const ExperimentConfig& cfg, std::size_t run) {
  TrialResult result;
  result.run = run;
  try {
    const TrialData data = simulate_trial(cfg, run);
    for (const ObservationStream* s : {&data.overlap, &data.nonoverlap}) {
      for (std::size_t k = 0; k < s->n_cameras; ++k) {
        const std::size_t seen = s->frames.front()[k].size();
        if (seen < cfg.min_visible) {
          result.failure = "camera sees only " + std::to_string(seen) + " points at frame 0";
          return result;
        }
      }
    }

    std::optional<PoseEstimateSeries> four, two;
    std::optional<NonOverlapResult> mono;
    if (wants(cfg, Method::FourCameras)) {
      four = run_stereo_sequence(data.overlap, cfg.rig_overlap, cfg.tuning, cfg.pipeline);
    }
    if (wants(cfg, Method::TwoCameras)) {
      two = run_stereo_sequence(data.overlap.select({0, 1}),
                                cfg.rig_overlap.subset({0, 1}, Layout::Overlapping), cfg.tuning,
                                cfg.pipeline);
    }
    const bool need_mono = wants(cfg, Method::Cam1) || wants(cfg, Method::Cam2) ||
                           wants(cfg, Method::Cam3) || wants(cfg, Method::Cam4) ||
                           wants(cfg, Method::RC);
    if (need_mono) {
      TrueStructure truth;
      if (cfg.ideal_init) {
        for (const ScenePoint& p : data.scene) truth.emplace(p.id, p.M);
      }
      mono = run_nonoverlap_sequence(data.nonoverlap, cfg.rig_nonoverlap, cfg.tuning,
                                     cfg.pipeline, cfg.ideal_init ? &truth : nullptr);
    }

    for (Method m : cfg.methods) {
      const PoseEstimateSeries* s = nullptr;
      switch (m) {
        case Method::FourCameras: s = &*four; break;
        case Method::TwoCameras: s = &*two; break;
        case Method::Cam1: s = &mono->cameras[0]; break;
        case Method::Cam2: s = &mono->cameras[1]; break;
        case Method::Cam3: s = &mono->cameras[2]; break;
        case Method::Cam4: s = &mono->cameras[3]; break;
        case Method::RC: s = &mono->rc; break;
      }
      result.errors.push_back(pose_error_report(s->poses, data.truth.poses));
    }
    result.valid = true;
  } catch (const std::exception& e) {
    result.failure = e.what();
    result.errors.clear();
  }
  return result;
}

namespace {

ExperimentReport reduce(const ExperimentConfig& cfg, const std::vector<TrialResult>& trials,
                        double seconds) {
  ExperimentReport report;
  report.methods = cfg.methods;
  report.rows.assign(cfg.methods.size(), ErrorRow{});
  report.config_hash = config_hash(cfg);
  report.seed = cfg.sim.seed;
  report.runs = trials.size();
  report.frames = cfg.sim.n_frames;
  report.wall_seconds = seconds;
  for (const TrialResult& t : trials) {
    if (!t.valid) {
      report.failures.push_back("run " + std::to_string(t.run) + ": " + t.failure);
      continue;
    }
    ++report.valid_runs;
    for (std::size_t m = 0; m < t.errors.size(); ++m) {
      for (std::size_t i = 0; i < 6; ++i) report.rows[m][i] += t.errors[m][i];
    }
  }
  for (ErrorRow& row : report.rows) {
    for (double& v : row) {
      v = report.valid_runs > 0 ? v / static_cast<double>(report.valid_runs)
                                : std::numeric_limits<double>::quiet_NaN();
    }
  }
  return report;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

ExperimentReport monte_carlo_serial(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  std::vector<TrialResult> trials;
  trials.reserve(cfg.sim.n_runs);
  for (std::size_t run = 0; run < cfg.sim.n_runs; ++run) trials.push_back(run_trial(cfg, run));
  return reduce(cfg, trials, seconds_since(start));
}

ExperimentReport monte_carlo_parallel(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  const auto n = static_cast<long>(cfg.sim.n_runs);
  std::vector<TrialResult> trials(cfg.sim.n_runs);
#pragma omp parallel for schedule(dynamic, 1)
  for (long run = 0; run < n; ++run) {
    trials[static_cast<std::size_t>(run)] = run_trial(cfg, static_cast<std::size_t>(run));
  }
  return reduce(cfg, trials, seconds_since(start));
}

ExperimentReport monte_carlo(const ExperimentConfig& cfg, Execution exec) {
  return exec == Execution::Serial ? monte_carlo_serial(cfg) : monte_carlo_parallel(cfg);
}

std::string config_hash(const ExperimentConfig& cfg) {
  const std::string text = config_to_json(cfg).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace mcpose
