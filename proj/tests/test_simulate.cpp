#include <gtest/gtest.h>

#include <cmath>

#include "mcpose/error.hpp"
#include "mcpose/harness.hpp"
#include "mcpose/simulate.hpp"

using namespace mcpose;

TEST(Scene, PointsInsideShell) {
  SimConfig cfg;
  Rng rng = derive_rng(1, {0});
  const auto scene = gen_scene(cfg, rng);
  ASSERT_EQ(scene.size(), 10000u);
  for (const ScenePoint& p : scene) {
    EXPECT_GE(p.M.norm(), 0.667);
    EXPECT_LE(p.M.norm(), 1.0);
  }
}

TEST(Scene, EmptyScene) {
  SimConfig cfg;
  cfg.n_points = 0;
  Rng rng = derive_rng(1, {0});
  EXPECT_TRUE(gen_scene(cfg, rng).empty());
}

TEST(Scene, DirectionsAreUniform) {
  SimConfig cfg;
  Rng rng = derive_rng(2, {0});
  Vec3 mean = Vec3::Zero();
  const auto scene = gen_scene(cfg, rng);
  for (const ScenePoint& p : scene) mean += p.M.normalized();
  EXPECT_LT((mean / static_cast<double>(scene.size())).norm(), 0.05);
}

TEST(Scene, IdsAreUnique) {
  SimConfig cfg;
  cfg.n_points = 500;
  Rng rng = derive_rng(3, {0});
  const auto scene = gen_scene(cfg, rng);
  for (std::size_t i = 0; i < scene.size(); ++i) EXPECT_EQ(scene[i].id, static_cast<int>(i));
}

TEST(Trajectory, StartsAtIdentityAndRespectsBands) {
  SimConfig cfg;
  Rng rng = derive_rng(4, {1});
  const Trajectory traj = gen_trajectory(cfg, rng);
  ASSERT_EQ(traj.poses.size(), 100u);
  EXPECT_EQ(traj.poses[0].vector(), Vec6::Zero());
  int negative = 0;
  for (std::size_t j = 1; j < traj.deltas.size(); ++j) {
    const Pose& d = traj.deltas[j];
    for (int i = 0; i < 3; ++i) {
      EXPECT_GE(std::abs(d.t[i]), cfg.trans_min);
      EXPECT_LE(std::abs(d.t[i]), cfg.trans_max);
      EXPECT_GE(std::abs(d.angles[i]), cfg.rot_min);
      EXPECT_LE(std::abs(d.angles[i]), cfg.rot_max);
      negative += d.t[i] < 0;
    }
  }
  EXPECT_GT(negative, 100);
  EXPECT_LT(negative, 200);
}

TEST(Trajectory, MatrixChainReproducesPoses) {
  SimConfig cfg;
  Rng rng = derive_rng(5, {1});
  const Trajectory traj = gen_trajectory(cfg, rng);
  Eigen::Matrix4d T = Eigen::Matrix4d::Identity();
  for (std::size_t j = 1; j < traj.poses.size(); ++j) {
    Eigen::Matrix4d step = Eigen::Matrix4d::Identity();
    step.topLeftCorner<3, 3>() = rot_from_angles(traj.deltas[j].angles);
    step.topRightCorner<3, 1>() = traj.deltas[j].t;
    T = T * step;
    EXPECT_LT((T.topRightCorner<3, 1>() - traj.poses[j].t).norm(), 1e-12);
    EXPECT_LT((T.topLeftCorner<3, 3>() - traj.poses[j].rotation()).norm(), 1e-12);
  }
}

TEST(Render, NoiselessIdentityIsExact) {
  SimConfig cfg;
  cfg.noise_sigma = 0.0;
  cfg.n_points = 300;
  Rng rng = derive_rng(6, {0});
  const auto scene = gen_scene(cfg, rng);
  const CameraRig rig = default_nonoverlapping_rig();
  const auto frames = render_frame(scene, Pose{}, rig, cfg, 99);
  for (std::size_t k = 0; k < rig.size(); ++k) {
    for (const Observation& o : frames[k]) {
      const Vec2 exact = project_in_camera(Pose{}, rig, k, scene[static_cast<std::size_t>(o.feature)].M);
      EXPECT_EQ(o.pixel, exact);
    }
  }
}

TEST(Render, PointBehindCameraIsAbsent) {
  SimConfig cfg;
  const std::vector<ScenePoint> scene{{0, Vec3(0, 0, -0.8)}, {1, Vec3(0, 0, 0.8)}};
  const auto frames = render_frame(scene, Pose{}, CameraRig::single(Intrinsics{}), cfg, 1);
  ASSERT_EQ(frames[0].size(), 1u);
  EXPECT_EQ(frames[0][0].feature, 1);
}

TEST(Render, NoiseStatistics) {
  SimConfig cfg;
  cfg.n_points = 20000;
  Rng rng = derive_rng(7, {0});
  const auto scene = gen_scene(cfg, rng);
  const CameraRig rig = default_nonoverlapping_rig();
  SimConfig clean = cfg;
  clean.noise_sigma = 0.0;
  const auto noisy = render_frame(scene, Pose{}, rig, cfg, 5);
  const auto exact = render_frame(scene, Pose{}, rig, clean, 5);
  double sum = 0.0, sq = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < rig.size() && n < 10000; ++k) {
    for (std::size_t i = 0; i < noisy[k].size() && n < 10000; ++i) {
      // Noise can push a border point in or out; compare matched ids only.
      if (noisy[k][i].feature != exact[k][i].feature) break;
      const Vec2 e = noisy[k][i].pixel - exact[k][i].pixel;
      sum += e.x();
      sq += e.x() * e.x();
      ++n;
    }
  }
  ASSERT_GE(n, 5000u);
  const double mean = sum / static_cast<double>(n);
  const double sd = std::sqrt(sq / static_cast<double>(n) - mean * mean);
  EXPECT_GE(sd, 0.48);
  EXPECT_LE(sd, 0.52);
}

TEST(Render, DeterministicPerSeed) {
  ExperimentConfig cfg = desk_scale_config();
  cfg.sim.n_frames = 5;
  const TrialData a = simulate_trial(cfg, 3);
  const TrialData b = simulate_trial(cfg, 3);
  const TrialData c = simulate_trial(cfg, 4);
  ASSERT_EQ(a.nonoverlap.frames.size(), b.nonoverlap.frames.size());
  for (std::size_t j = 0; j < a.nonoverlap.frames.size(); ++j) {
    for (std::size_t k = 0; k < 4; ++k) {
      const auto& x = a.nonoverlap.frames[j][k];
      const auto& y = b.nonoverlap.frames[j][k];
      ASSERT_EQ(x.size(), y.size());
      for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(x[i].pixel, y[i].pixel);
    }
  }
  EXPECT_NE(a.scene[0].M, c.scene[0].M);
}

TEST(Render, DefaultRigSeesEnoughPoints) {
  const ExperimentConfig cfg = desk_scale_config();
  for (std::size_t run = 0; run < 5; ++run) {
    const TrialData data = simulate_trial(cfg, run);
    for (const ObservationStream* s : {&data.overlap, &data.nonoverlap}) {
      for (std::size_t k = 0; k < s->n_cameras; ++k) EXPECT_GE(s->frames[0][k].size(), 100u);
    }
  }
}

TEST(Render, SharedMountsSeeIdenticalPixels) {
  const ExperimentConfig cfg = desk_scale_config();
  const TrialData data = simulate_trial(cfg, 0);
  // Cameras 1 and 3 of the overlapping rig are cameras 1 and 3 of the other.
  for (std::size_t j = 0; j < data.overlap.frames.size(); j += 17) {
    for (std::size_t k : {0u, 2u}) {
      const auto& a = data.overlap.frames[j][k];
      const auto& b = data.nonoverlap.frames[j][k];
      ASSERT_EQ(a.size(), b.size());
      for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].pixel, b[i].pixel);
    }
  }
}

TEST(Streams, SelectReordersCameras) {
  ObservationStream s;
  s.n_cameras = 2;
  s.frames = {{{{1, Vec2(1, 1)}}, {{2, Vec2(2, 2)}}}};
  const ObservationStream t = s.select({1, 0});
  EXPECT_EQ(t.frames[0][0][0].feature, 2);
  EXPECT_THROW(s.select({2}), Error);
}

TEST(SimConfigValidation, RejectsBadShell) {
  SimConfig cfg;
  cfg.shell_inner = 1.2;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = SimConfig{};
  cfg.noise_sigma = -1;
  EXPECT_THROW(cfg.validate(), Error);
}
