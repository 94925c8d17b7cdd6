#include "mcpose/selftest.hpp"

#include <algorithm>
#include <cmath>

#include "mcpose/ekf.hpp"
#include "mcpose/fusion.hpp"
#include "mcpose/harness.hpp"
#include "mcpose/pipeline.hpp"
#include "mcpose/simulate.hpp"
#include "mcpose/stereo.hpp"

namespace mcpose {

namespace {

Vec3 uniform3(Rng& rng, double a) {
  std::uniform_real_distribution<double> u(-a, a);
  return {u(rng), u(rng), u(rng)};
}

Pose small_pose(Rng& rng, double t, double r) { return {uniform3(rng, t), uniform3(rng, r)}; }

double jacobian_residual(Rng& rng) {
  const CameraRig rig = default_nonoverlapping_rig();
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    PoseFilterState s;
    s.x.head<6>() = small_pose(rng, 0.05, 0.2).vector();
    MeasurementBatch batch;
    for (std::size_t k = 0; k < rig.size(); ++k) {
      Vec3 local = uniform3(rng, 0.3);
      local.z() = 1.0;
      const Camera& cam = rig.camera(k);
      batch.push_back({k, static_cast<int>(k), Vec2::Zero(),
                       s.pose().rotation() * (cam.R * local + cam.D) + s.pose().t});
    }
    const Eigen::MatrixXd H = measurement_jacobian(s, batch, rig);
    const double h = 1e-6;
    for (int i = 0; i < 6; ++i) {
      PoseFilterState plus = s, minus = s;
      plus.x[i] += h;
      minus.x[i] -= h;
      for (std::size_t n = 0; n < batch.size(); ++n) {
        const Vec2 fd = (project_in_camera(plus.pose(), rig, batch[n].camera, batch[n].M) -
                         project_in_camera(minus.pose(), rig, batch[n].camera, batch[n].M)) /
                        (2 * h);
        const Vec2 an = H.block<2, 1>(2 * static_cast<Eigen::Index>(n), i);
        worst = std::max(worst, (fd - an).norm() / std::max(1.0, an.norm()));
      }
    }
  }
  return worst;
}

double triangulation_residual(Rng& rng) {
  const CameraRig rig = default_overlapping_rig();
  double worst = 0.0;
  for (const StereoPair& pair : stereo_pairs(rig)) {
    for (int trial = 0; trial < 50; ++trial) {
      const Pose pose = small_pose(rng, 0.05, 0.05);
      const Camera& cam = rig.camera(pair.cam_a);
      Vec3 local = uniform3(rng, 0.2);
      local.z() = 1.0;
      const Vec3 M = pose.rotation() * (cam.R * local + cam.D) + pose.t;
      const Vec3 X = triangulate(rig, pose, pair, project_in_camera(pose, rig, pair.cam_a, M),
                                 project_in_camera(pose, rig, pair.cam_b, M));
      worst = std::max(worst, (X - M).norm());
    }
  }
  return worst;
}

std::array<CameraLocalPose, 4> true_locals(const CameraRig& rig, const Pose& pose) {
  std::array<CameraLocalPose, 4> locals;
  const Mat3 R = pose.rotation();
  for (std::size_t k = 0; k < 4; ++k) {
    const Camera& cam = rig.camera(k);
    locals[k].k = k;
    locals[k].r = cam.R.transpose() * R * cam.R;
    locals[k].l = cam.R.transpose() * (pose.t + R * cam.D - cam.D);
  }
  return locals;
}

double scale_residual(Rng& rng) {
  const CameraRig rig = default_nonoverlapping_rig();
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const Pose pose = small_pose(rng, 0.02, 0.05);
    const auto locals = true_locals(rig, pose);
    const ScaleSystem sys = build_scale_system(
        pose.t, pose.rotation(), std::span<const CameraLocalPose>(locals).subspan(1), rig);
    const ScaleSolution sol = solve_scales(sys);
    worst = std::max(worst, (sol.s - Vec4::Ones()).cwiseAbs().maxCoeff());
  }
  return worst;
}

double conjugation_residual(Rng& rng) {
  const CameraRig rig = default_nonoverlapping_rig();
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Mat3 r = rot_from_angles(uniform3(rng, 0.5));
    for (const Camera& cam : rig.cameras()) {
      worst = std::max(worst,
                       std::abs(rotation_angle(equivalent_rotation(cam.R, r)) - rotation_angle(r)));
    }
  }
  return worst;
}

double lowe_residual(Rng& rng) {
  const Intrinsics intr;
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const Pose truth = small_pose(rng, 0.05, 0.1);
    std::vector<Match> matches;
    while (matches.size() < 50) {
      Vec3 local = uniform3(rng, 0.4);
      local.z() += 1.2;
      const Vec3 M = truth.rotation() * local + truth.t;
      const Vec2 px = project(local, intr);
      if (intr.contains(px)) matches.push_back({M, px});
    }
    Pose init = truth;
    init.t += Vec3::Constant(0.01);
    init.angles += Vec3::Constant(0.01);
    const Pose est = lowe_pose(matches, intr, init);
    worst = std::max(worst, (est.vector() - truth.vector()).cwiseAbs().maxCoeff());
  }
  return worst;
}

Trajectory scripted(std::size_t frames) {
  Vec6 step;
  step << 0.004, -0.003, 0.005, 0.004, -0.005, 0.003;
  Trajectory traj;
  for (std::size_t j = 0; j < frames; ++j) {
    traj.poses.push_back(Pose::from_vector(step * static_cast<double>(j)));
    traj.deltas.push_back(Pose{});
  }
  return traj;
}

double worst_error(const std::vector<Pose>& est, const std::vector<Pose>& truth) {
  double worst = 0.0;
  for (std::size_t j = 0; j < est.size(); ++j) {
    worst = std::max(worst, (est[j].vector() - truth[j].vector()).cwiseAbs().maxCoeff());
  }
  return worst;
}

double stereo_tracking_residual() {
  SimConfig sim;
  sim.n_points = 2000;
  sim.noise_sigma = 0.0;
  Rng rng = derive_rng(11, {0});
  const auto scene = gen_scene(sim, rng);
  const Trajectory traj = scripted(100);
  const CameraRig rig = default_overlapping_rig();
  const auto series = run_stereo_sequence(render_sequence(scene, traj, rig, sim, 1), rig,
                                          EkfTuning{}, PipelineConfig{});
  return worst_error(series.poses, traj.poses);
}

double mono_tracking_residual() {
  SimConfig sim;
  sim.n_points = 2000;
  sim.noise_sigma = 0.0;
  Rng rng = derive_rng(12, {0});
  const auto scene = gen_scene(sim, rng);
  TrueStructure truth;
  for (const ScenePoint& p : scene) truth.emplace(p.id, p.M);
  const Trajectory traj = scripted(100);
  const CameraRig rig = default_nonoverlapping_rig();
  const auto result = run_nonoverlap_sequence(render_sequence(scene, traj, rig, sim, 1), rig,
                                              EkfTuning{}, PipelineConfig{}, &truth);
  return worst_error(result.cameras[0].poses, traj.poses);
}

}  // namespace

std::vector<OracleResult> run_selftest() {
  Rng rng = derive_rng(2024, {0});
  return {{"jacobian_vs_finite_difference", jacobian_residual(rng), 1e-5},
          {"project_triangulate_roundtrip", triangulation_residual(rng), 1e-9},
          {"scale_system_unit_scales", scale_residual(rng), 1e-9},
          {"conjugation_preserves_angle", conjugation_residual(rng), 1e-10},
          {"lowe_recovers_pose", lowe_residual(rng), 1e-8},
          {"stereo_tracks_scripted_motion", stereo_tracking_residual(), 1e-6},
          {"single_camera_ideal_init", mono_tracking_residual(), 1e-4}};
}

}  // namespace mcpose
