#include <Eigen/Geometry>

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mcpose/cli.hpp"
#include "mcpose/error.hpp"
#include "mcpose/fusion.hpp"
#include "mcpose/harness.hpp"
#include "mcpose/io.hpp"
#include "mcpose/stereo.hpp"

using namespace mcpose;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// Oracles built from Eigen's angle-axis type rather than the library's own
// rotation helpers.
Mat3 oracle_rotation(const Vec3& a) {
  return (Eigen::AngleAxisd(a.x(), Vec3::UnitX()) * Eigen::AngleAxisd(a.y(), Vec3::UnitY()) *
          Eigen::AngleAxisd(a.z(), Vec3::UnitZ()))
      .toRotationMatrix();
}

Vec2 oracle_pixel(const Vec6& pose, const CameraRig& rig, std::size_t k, const Vec3& M) {
  const Camera& c = rig.camera(k);
  const Mat3 R = oracle_rotation(pose.tail<3>());
  const Vec3 P = c.R.transpose() * (R.transpose() * (M - pose.head<3>()) - c.D);
  return {c.intrinsics.fx * P.x() / P.z() + c.intrinsics.cx,
          c.intrinsics.fy * P.y() / P.z() + c.intrinsics.cy};
}

// A world point straight ahead of camera k at the given depth and offset.
Vec3 point_ahead(const Vec6& pose, const CameraRig& rig, std::size_t k, const Vec3& local) {
  const Camera& c = rig.camera(k);
  const Mat3 R = oracle_rotation(pose.tail<3>());
  return pose.head<3>() + R * (c.D + c.R * local);
}

std::array<CameraLocalPose, 4> exact_locals(const CameraRig& rig, const Pose& motion) {
  std::array<CameraLocalPose, 4> out;
  const Mat3 R = oracle_rotation(motion.angles);
  for (std::size_t k = 0; k < 4; ++k) {
    const Camera& c = rig.camera(k);
    out[k] = {k, c.R.transpose() * (motion.t + R * c.D - c.D), c.R.transpose() * R * c.R, true};
  }
  return out;
}

// ---------------------------------------------------------------- criteria

Outcome table_ordering(ExperimentReport& report) {
  Outcome o;
  const auto t0 = Clock::now();
  report = monte_carlo(desk_scale_config(), Execution::Parallel);
  const double secs = seconds_since(t0);
  o.require(report.valid_runs == 50, "valid runs " + std::to_string(report.valid_runs));
  o.require(secs <= 600.0, "runtime " + num(secs) + " s");
  const auto& four = report.row(Method::FourCameras);
  const auto& two = report.row(Method::TwoCameras);
  const auto& c1 = report.row(Method::Cam1);
  const auto& c2 = report.row(Method::Cam2);
  const auto& c3 = report.row(Method::Cam3);
  const auto& c4 = report.row(Method::Cam4);
  const auto& rc = report.row(Method::RC);
  const char* names[6] = {"tx", "ty", "tz", "alpha", "beta", "gamma"};
  int two_beats_cam1 = 0;
  for (int i = 0; i < 6; ++i) {
    const double side_min = std::min(c2[i], c4[i]);
    o.require(four[i] < two[i], std::string("4cameras>=2cameras on ") + names[i]);
    if (two[i] < c1[i]) ++two_beats_cam1;
    o.require(std::max(c1[i], c3[i]) < side_min,
              std::string("max(cam1,cam3)=") + num(std::max(c1[i], c3[i])) +
                  " >= min(cam2,cam4)=" + num(side_min) + " on " + names[i]);
    o.require(rc[i] < side_min, std::string("RC=") + num(rc[i]) + " >= min(cam2,cam4)=" +
                                    num(side_min) + " on " + names[i]);
  }
  o.require(two_beats_cam1 >= 5, "2cameras<cam1 on only " + std::to_string(two_beats_cam1) + "/6");
  if (o.pass) o.detail = num(secs) + " s";
  return o;
}

Outcome magnitude(const ExperimentReport& report) {
  Outcome o;
  const auto& four = report.row(Method::FourCameras);
  double worst = 0.0;
  for (double v : four) worst = std::max(worst, v);
  o.require(worst <= 0.01, "worst 4cameras error " + num(worst));
  if (o.pass) o.detail = "worst " + num(worst);
  return o;
}

Outcome jacobian_oracle() {
  Outcome o;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(303);
  std::uniform_real_distribution<double> tr(-0.2, 0.2), an(-0.4, 0.4), lat(-0.3, 0.3),
      depth(0.6, 1.0);
  const CameraRig rigs[2] = {default_overlapping_rig(), default_nonoverlapping_rig()};
  double worst = 0.0;
  for (int config = 0; config < 100; ++config) {
    const CameraRig& rig = rigs[config % 2];
    Vec6 x;
    x << tr(rng), tr(rng), tr(rng), an(rng), an(rng), an(rng);
    MeasurementBatch batch;
    for (std::size_t k = 0; k < rig.size(); ++k) {
      for (int i = 0; i < 3; ++i) {
        batch.push_back({k, i, Vec2::Zero(),
                         point_ahead(x, rig, k, Vec3(lat(rng), lat(rng), depth(rng)))});
      }
    }
    PoseFilterState state;
    state.x.head<6>() = x;
    const Eigen::MatrixXd H = measurement_jacobian(state, batch, rig);
    Eigen::MatrixXd fd = Eigen::MatrixXd::Zero(H.rows(), 12);
    const double h = 1e-6;
    for (int p = 0; p < 6; ++p) {
      Vec6 plus = x, minus = x;
      plus[p] += h;
      minus[p] -= h;
      for (std::size_t m = 0; m < batch.size(); ++m) {
        fd.block<2, 1>(2 * static_cast<long>(m), p) =
            (oracle_pixel(plus, rig, batch[m].camera, batch[m].M) -
             oracle_pixel(minus, rig, batch[m].camera, batch[m].M)) /
            (2 * h);
      }
    }
    const double scale = std::max(1.0, fd.cwiseAbs().maxCoeff());
    worst = std::max(worst, (H - fd).cwiseAbs().maxCoeff() / scale);
  }
  const double secs = seconds_since(t0);
  o.require(worst < 1e-5, "relative mismatch " + num(worst));
  o.require(secs < 5.0, "runtime " + num(secs) + " s");
  if (o.pass) o.detail = "worst " + num(worst) + ", " + num(secs) + " s";
  return o;
}

Outcome noiseless_suite() {
  Outcome o;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> tr(-0.1, 0.1), an(-0.2, 0.2), lat(-0.2, 0.2),
      depth(0.7, 1.0), unit(-1.0, 1.0);

  // (a) project then triangulate.
  const CameraRig stereo = default_overlapping_rig();
  double tri = 0.0;
  for (int i = 0; i < 200; ++i) {
    Vec6 x;
    x << tr(rng), tr(rng), tr(rng), an(rng), an(rng), an(rng);
    const std::size_t a = (i % 2) * 2;
    const StereoPair pair = make_stereo_pair(stereo, a, a + 1);
    const Vec3 M = point_ahead(x, stereo, a, Vec3(0.05 + lat(rng) * 0.5, lat(rng), depth(rng)));
    const Vec3 est = triangulate(stereo, Pose::from_vector(x), pair,
                                 oracle_pixel(x, stereo, a, M), oracle_pixel(x, stereo, a + 1, M));
    tri = std::max(tri, (est - M).norm());
  }
  o.require(tri < 1e-9, "(a) triangulation " + num(tri));

  // (b) unit scales from ground truth.
  const CameraRig rig = default_nonoverlapping_rig();
  double scales = 0.0;
  for (int i = 0; i < 50; ++i) {
    const Pose motion{Vec3(tr(rng), tr(rng), tr(rng)) * 0.3, Vec3(an(rng), an(rng), an(rng))};
    const auto locals = exact_locals(rig, motion);
    const ScaleSolution s = solve_scales(build_scale_system(
        motion.t, oracle_rotation(motion.angles), std::span(locals).subspan(1), rig));
    scales = std::max(scales, (s.s - Vec4::Ones()).cwiseAbs().maxCoeff());
  }
  o.require(scales < 1e-9, "(b) scales " + num(scales));

  // (c) conjugation keeps the rotation angle.
  double conj = 0.0;
  for (int i = 0; i < 200; ++i) {
    const Mat3 Rk = Eigen::AngleAxisd(3.0 * unit(rng), Vec3(unit(rng), unit(rng), unit(rng)).normalized())
                        .toRotationMatrix();
    const Eigen::AngleAxisd r(0.5 * std::abs(unit(rng)), Vec3(unit(rng), unit(rng), unit(rng)).normalized());
    conj = std::max(conj, std::abs(rotation_angle(equivalent_rotation(Rk, r.toRotationMatrix())) -
                                   r.angle()));
  }
  o.require(conj < 1e-10, "(c) conjugation " + num(conj));

  // (d) Lowe from a 0.01 perturbation on 50 matches.
  const CameraRig single = CameraRig::single(Intrinsics{});
  double lowe = 0.0;
  for (int i = 0; i < 20; ++i) {
    Vec6 x;
    x << tr(rng), tr(rng), tr(rng), an(rng), an(rng), an(rng);
    std::vector<Match> matches;
    for (int m = 0; m < 50; ++m) {
      const Vec3 M = point_ahead(x, single, 0, Vec3(lat(rng), lat(rng), depth(rng)));
      matches.push_back({M, oracle_pixel(x, single, 0, M)});
    }
    Vec6 init = x;
    for (int p = 0; p < 6; ++p) init[p] += (p % 2 ? -0.01 : 0.01);
    const Pose est = lowe_pose(matches, Intrinsics{}, Pose::from_vector(init));
    lowe = std::max(lowe, (est.vector() - x).cwiseAbs().maxCoeff());
  }
  o.require(lowe < 1e-8, "(d) lowe " + num(lowe));

  const double secs = seconds_since(t0);
  o.require(secs < 5.0, "runtime " + num(secs) + " s");
  if (o.pass) {
    o.detail = "a=" + num(tri) + " b=" + num(scales) + " c=" + num(conj) + " d=" + num(lowe) +
               ", " + num(secs) + " s";
  }
  return o;
}

std::vector<ScenePoint> scene(std::size_t n, std::uint64_t seed) {
  SimConfig cfg;
  cfg.n_points = n;
  Rng rng = derive_rng(seed, {0});
  return gen_scene(cfg, rng);
}

Trajectory scripted(std::size_t frames, double step_scale) {
  Vec6 step;
  step << 0.004, -0.003, 0.005, 0.004, -0.005, 0.003;
  Trajectory t;
  for (std::size_t j = 0; j < frames; ++j) {
    t.poses.push_back(Pose::from_vector(step * step_scale * static_cast<double>(j)));
    t.deltas.push_back(Pose{});
  }
  return t;
}

ObservationStream noiseless(const std::vector<ScenePoint>& pts, const Trajectory& traj,
                            const CameraRig& rig) {
  SimConfig cfg;
  cfg.noise_sigma = 0.0;
  return render_sequence(pts, traj, rig, cfg, 1);
}

// Frame j keeps only `keep` features that the first pair has seen since frame 0.
void deplete(ObservationStream& s, std::size_t j, std::size_t keep) {
  auto has = [&](std::size_t frame, std::size_t k, int id) {
    const CameraFrame& f = s.frames[frame][k];
    return std::any_of(f.begin(), f.end(), [&](const Observation& o) { return o.feature == id; });
  };
  std::vector<int> kept;
  for (const Observation& o : s.frames[j][0]) {
    if (kept.size() < keep && has(j, 1, o.feature) && has(0, 0, o.feature) && has(0, 1, o.feature)) {
      kept.push_back(o.feature);
    }
  }
  for (CameraFrame& f : s.frames[j]) {
    std::erase_if(f, [&](const Observation& o) {
      return std::find(kept.begin(), kept.end(), o.feature) == kept.end();
    });
  }
}

Outcome degenerate_handling() {
  Outcome o;
  const CameraRig rig = default_nonoverlapping_rig();
  const Pose spin{Vec3::Zero(), Vec3(0.02, -0.01, 0.015)};
  const auto locals = exact_locals(rig, spin);
  bool ill = false;
  try {
    solve_scales(build_scale_system(spin.t, oracle_rotation(spin.angles),
                                    std::span(locals).subspan(1), rig));
  } catch (const Error& e) {
    ill = e.code() == ErrorCode::IllConditioned;
  }
  o.require(ill, "pure rotation did not raise IllConditioned");
  const Vec4 prev(1.1, 0.9, 1.2, 0.8);
  const FusedPose fused = fuse_pose(locals, rig, prev);
  o.require(fused.fallback && fused.scales == prev, "scale fallback not taken");

  const CameraRig pair = default_overlapping_rig().subset({0, 1}, Layout::Overlapping);
  const auto pts = scene(2000, 7);
  const Trajectory traj = scripted(60, 0.5);
  for (std::size_t keep : {49u, 50u}) {
    ObservationStream s = noiseless(pts, traj, pair);
    deplete(s, 40, keep);
    const auto series = run_stereo_sequence(s, pair, EkfTuning{}, PipelineConfig{});
    std::vector<std::size_t> refreshed;
    for (std::size_t j = 2; j < series.diagnostics.size(); ++j) {
      if (!series.diagnostics[j].refreshed.empty()) refreshed.push_back(j);
    }
    const bool expected = keep == 49 ? refreshed == std::vector<std::size_t>{40}
                                     : refreshed.empty();
    o.require(expected, std::to_string(keep) + "-feature frame refreshed at " +
                            std::to_string(refreshed.size()) + " frames");
  }
  return o;
}

struct Captured {
  int code;
  std::string err;
};

Captured cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli_main(args, out, err);
  return {code, err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Outcome determinism(const fs::path& dir) {
  Outcome o;
  const std::vector<std::string> common = {"simulate", "--runs", "8", "--frames", "40",
                                           "--seed", "77"};
  std::vector<std::string> csvs;
  int i = 0;
  for (const char* threads : {"1", "1", "4", "4"}) {
    auto args = common;
    const fs::path out = dir / ("det" + std::to_string(i++) + ".csv");
    args.insert(args.end(), {"--threads", threads, "--out", out.string()});
    const Captured c = cli(args);
    o.require(c.code == 0, "simulate exited " + std::to_string(c.code) + ": " + c.err);
    csvs.push_back(slurp(out));
  }
  o.require(!csvs[0].empty(), "empty report");
  o.require(csvs[0] == csvs[1], "1-thread runs differ");
  o.require(csvs[2] == csvs[3], "4-thread runs differ");
  o.require(csvs[0] == csvs[2], "1-thread and 4-thread reports differ");
  return o;
}

double worst_error(const std::vector<Pose>& est, const std::vector<Pose>& truth) {
  double worst = 0.0;
  for (std::size_t j = 0; j < est.size(); ++j) {
    worst = std::max(worst, (est[j].vector() - truth[j].vector()).cwiseAbs().maxCoeff());
  }
  return worst;
}

Outcome filter_sanity() {
  Outcome o;
  const CameraRig rig = default_overlapping_rig();
  const Trajectory traj = scripted(100, 1.0);
  const auto series = run_stereo_sequence(noiseless(scene(2000, 11), traj, rig), rig, EkfTuning{},
                                          PipelineConfig{});
  const double worst = worst_error(series.poses, traj.poses);
  o.require(series.poses.size() == 100, "wrong frame count");
  o.require(worst < 1e-6, "worst per-frame error " + num(worst));
  if (o.pass) o.detail = "worst " + num(worst);
  return o;
}

Outcome run_tracks_equality(const fs::path& dir) {
  Outcome o;
  ExperimentConfig cfg = desk_scale_config();
  cfg.sim.n_frames = 40;
  double worst = 0.0;
  for (const std::string layout : {"stereo", "nonoverlap"}) {
    const fs::path tracks = dir / (layout + "_tracks.csv");
    const fs::path rig_file = dir / (layout + "_rig.json");
    const fs::path poses = dir / (layout + "_poses.csv");
    Captured c = cli({"export", "--layout", layout, "--frames", "40", "--run", "3", "--tracks",
                      tracks.string(), "--rig", rig_file.string()});
    o.require(c.code == 0, "export failed: " + c.err);
    c = cli({"run-tracks", "--layout", layout, "--rig", rig_file.string(), "--tracks",
             tracks.string(), "--out", poses.string()});
    o.require(c.code == 0, "run-tracks failed: " + c.err);
    if (!o.pass) return o;

    std::ifstream in(poses);
    const auto from_file = read_poses(in);
    const CameraRig rig = load_rig(rig_file.string());
    const TrialData data = simulate_trial(cfg, 3);
    std::vector<PoseEstimateSeries> direct;
    if (layout == "stereo") {
      direct.push_back(
          run_stereo_sequence(data.overlap, CameraRig(rig.cameras(), Layout::Overlapping),
                              EkfTuning{}, PipelineConfig{}));
    } else {
      const NonOverlapResult r = run_nonoverlap_sequence(
          data.nonoverlap, CameraRig(rig.cameras(), Layout::NonOverlapping), EkfTuning{},
          PipelineConfig{});
      for (const PoseEstimateSeries* s : r.all()) direct.push_back(*s);
    }
    o.require(from_file.size() == direct.size(), layout + ": series count differs");
    for (const PoseEstimateSeries& s : direct) {
      const auto it = from_file.find(s.method);
      if (it == from_file.end() || it->second.size() != s.poses.size()) {
        o.require(false, layout + ": missing or short series " + s.method);
        continue;
      }
      worst = std::max(worst, worst_error(it->second, s.poses));
    }
  }
  o.require(worst <= 1e-12, "max difference " + num(worst));
  if (o.pass) o.detail = "max difference " + num(worst);
  return o;
}

}  // namespace

int main() {
  const fs::path dir = fs::temp_directory_path() / "mcpose_acceptance";
  fs::create_directories(dir);

  ExperimentReport report;
  struct Row {
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Row> rows = {
      {"1 table-ordering", [&] { return table_ordering(report); }},
      {"2 four-camera-magnitude", [&] { return magnitude(report); }},
      {"3 jacobian-oracle", jacobian_oracle},
      {"4 noiseless-exactness", noiseless_suite},
      {"5 degenerate-handling", degenerate_handling},
      {"6 determinism", [&] { return determinism(dir); }},
      {"7 filter-sanity", filter_sanity},
      {"8 run-tracks-equality", [&] { return run_tracks_equality(dir); }},
  };

  int failures = 0;
  for (const Row& row : rows) {
    Outcome o;
    try {
      o = row.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS " : "FAIL ") << row.name;
    if (!o.detail.empty()) std::cout << "  (" << o.detail << ")";
    std::cout << std::endl;
    if (row.name[0] == '1') {
      std::ostringstream table;
      write_report_csv(table, report);
      std::cout << table.str();
    }
  }
  fs::remove_all(dir);
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
