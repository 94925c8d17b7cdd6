#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <random>

#include "mcpose/error.hpp"
#include "mcpose/fusion.hpp"
#include "mcpose/harness.hpp"

using namespace mcpose;

namespace {

// Local poses of every camera obtained by moving the rig to `pose`: camera k
// ends at orientation R R_k and centre d + R D_k, both measured relative to its
// rest placement (R_k, D_k).
std::array<CameraLocalPose, 4> exact_locals(const CameraRig& rig, const Pose& pose) {
  std::array<CameraLocalPose, 4> out;
  const Mat3 R = pose.rotation();
  for (std::size_t k = 0; k < 4; ++k) {
    const Camera& c = rig.camera(k);
    const Mat3 world_orient = R * c.R;
    const Vec3 world_center = pose.t + R * c.D;
    out[k] = {k, c.R.transpose() * (world_center - c.D), c.R.transpose() * world_orient, true};
  }
  return out;
}

std::span<const CameraLocalPose> others(const std::array<CameraLocalPose, 4>& locals) {
  return std::span<const CameraLocalPose>(locals).subspan(1);
}

Pose random_motion(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> t(-0.05, 0.05), a(-0.1, 0.1);
  return {Vec3(t(rng), t(rng), t(rng)), Vec3(a(rng), a(rng), a(rng))};
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST(Median, OddAndEven) {
  EXPECT_EQ(median({3.0, 1.0, 2.0}), 2.0);
  EXPECT_DOUBLE_EQ(median({0.03, 0.0, 0.02, 0.01}), 0.015);
  EXPECT_EQ(code_of([] { median({}); }), ErrorCode::InvalidArgument);
}

TEST(RotationMedian, IdenticalRotations) {
  const Vec3 a(0.01, -0.02, 0.03);
  const std::array<Mat3, 4> rs{rot_from_angles(a), rot_from_angles(a), rot_from_angles(a),
                               rot_from_angles(a)};
  EXPECT_LT((fuse_rotation_median(rs) - a).norm(), 1e-15);
}

TEST(RotationMedian, RejectsOutlier) {
  const std::array<Mat3, 4> rs{rot_from_angles(Vec3(0.01, 0, 0)), rot_from_angles(Vec3(0.01, 0, 0)),
                               rot_from_angles(Vec3(0.01, 0, 0)), rot_from_angles(Vec3(0.30, 0, 0))};
  EXPECT_NEAR(fuse_rotation_median(rs).x(), 0.01, 1e-15);
}

TEST(RotationMedian, EvenCountAverage) {
  std::array<Mat3, 4> rs;
  for (int i = 0; i < 4; ++i) rs[static_cast<std::size_t>(i)] = rot_from_angles(Vec3::Constant(0.01 * i));
  EXPECT_LT((fuse_rotation_median(rs) - Vec3::Constant(0.015)).norm(), 1e-15);
}

TEST(RotationMedian, GimbalProximityPropagates) {
  const std::array<Mat3, 4> rs{Mat3::Identity(), Mat3::Identity(), Mat3::Identity(),
                               rot_y(std::acos(-1.0) / 2)};
  EXPECT_EQ(code_of([&] { fuse_rotation_median(rs); }), ErrorCode::GimbalProximity);
}

TEST(RotationMedian, OneCorruptCameraStaysWithinHonestSpread) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> small(0.0, 0.002);
  std::uniform_real_distribution<double> wild(-0.8, 0.8);
  for (int trial = 0; trial < 100; ++trial) {
    const Vec3 base(0.05, -0.03, 0.02);
    std::array<Vec3, 4> angles;
    for (Vec3& a : angles) a = base + Vec3(small(rng), small(rng), small(rng));
    const std::size_t bad = static_cast<std::size_t>(trial % 4);
    std::array<Mat3, 4> clean, dirty;
    for (std::size_t k = 0; k < 4; ++k) clean[k] = dirty[k] = rot_from_angles(angles[k]);
    dirty[bad] = rot_from_angles(Vec3(wild(rng), wild(rng), wild(rng)));
    const Vec3 f0 = fuse_rotation_median(clean);
    const Vec3 f1 = fuse_rotation_median(dirty);
    for (int i = 0; i < 3; ++i) {
      double lo = 1e9, hi = -1e9;
      for (std::size_t k = 0; k < 4; ++k) {
        if (k == bad) continue;
        lo = std::min(lo, angles[k][i]);
        hi = std::max(hi, angles[k][i]);
      }
      EXPECT_LE(std::abs(f1[i] - f0[i]), hi - lo + 1e-12);
    }
  }
}

TEST(RotationMedian, InvariantToRelabelling) {
  const CameraRig rig = default_nonoverlapping_rig();
  std::mt19937_64 rng(10);
  std::normal_distribution<double> small(0.0, 0.003);
  std::array<Mat3, 4> rs;
  for (Mat3& r : rs) r = rot_from_angles(Vec3(0.02 + small(rng), small(rng), -0.01 + small(rng)));
  const Vec3 a = fuse_rotation_median(rs);
  std::swap(rs[1], rs[3]);
  std::swap(rs[2], rs[3]);
  EXPECT_EQ(fuse_rotation_median(rs), a);
}

TEST(ScaleSystem, NoRotationGivesZeroRhs) {
  const CameraRig rig = default_nonoverlapping_rig();
  const Pose motion{Vec3(0.01, 0.02, -0.01), Vec3::Zero()};
  const auto locals = exact_locals(rig, motion);
  const ScaleSystem sys = build_scale_system(motion.t, Mat3::Identity(), others(locals), rig);
  EXPECT_EQ(sys.b.norm(), 0.0);
}

TEST(ScaleSystem, GroundTruthSatisfiedByUnitScales) {
  const CameraRig rig = default_nonoverlapping_rig();
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const Pose motion = random_motion(rng);
    const auto locals = exact_locals(rig, motion);
    const ScaleSystem sys = build_scale_system(motion.t, motion.rotation(), others(locals), rig);
    EXPECT_LT((sys.A * Vec4::Ones() - sys.b).cwiseAbs().maxCoeff(), 1e-12);
    for (int r = 0; r < 9; ++r) {
      int nonzero = 0;
      for (int c = 1; c < 4; ++c) nonzero += sys.A(r, c) != 0.0;
      EXPECT_LE(nonzero, 1);
      EXPECT_EQ(sys.A(r, 1 + r / 3), -(rig.camera(static_cast<std::size_t>(1 + r / 3)).R *
                                        locals[static_cast<std::size_t>(1 + r / 3)].l)[r % 3]);
    }
    const ScaleSolution sol = solve_scales(sys);
    EXPECT_LT((sol.s - Vec4::Ones()).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT(sol.residual, 1e-10);
  }
}

TEST(ScaleSystem, RigidityEquationHolds) {
  const CameraRig rig = default_nonoverlapping_rig();
  std::mt19937_64 rng(12);
  const Pose motion = random_motion(rng);
  const auto locals = exact_locals(rig, motion);
  for (std::size_t k = 1; k < 4; ++k) {
    const Camera& c = rig.camera(k);
    const Vec3 lhs = motion.rotation() * c.D + motion.t;
    const Vec3 rhs = c.R * locals[k].l + c.D;
    EXPECT_LT((lhs - rhs).norm(), 1e-10);
  }
}

TEST(ScaleSystem, HomogeneousInLocalTranslations) {
  const CameraRig rig = default_nonoverlapping_rig();
  std::mt19937_64 rng(13);
  const Pose motion = random_motion(rng);
  auto locals = exact_locals(rig, motion);
  for (double c : {2.0, 0.5, 3.7}) {
    auto scaled = locals;
    for (std::size_t k = 1; k < 4; ++k) scaled[k].l *= c;
    const ScaleSolution sol =
        solve_scales(build_scale_system(motion.t, motion.rotation(), others(scaled), rig));
    EXPECT_NEAR(sol.s[0], 1.0, 1e-9);
    for (int k = 1; k < 4; ++k) EXPECT_NEAR(sol.s[k], 1.0 / c, 1e-9);
    const FusedPose fused = fuse_pose(scaled, rig, Vec4::Ones());
    EXPECT_LT((fused.pose.t - motion.t).norm(), 1e-9);
  }
}

TEST(ScaleSystem, WrongCameraCount) {
  const CameraRig rig = default_nonoverlapping_rig();
  const auto locals = exact_locals(rig, Pose{});
  EXPECT_EQ(code_of([&] {
              build_scale_system(Vec3::Ones(), Mat3::Identity(),
                                 std::span<const CameraLocalPose>(locals).subspan(2), rig);
            }),
            ErrorCode::WrongCameraCount);
}

TEST(SolveScales, PureRotationIsIllConditioned) {
  const CameraRig rig = default_nonoverlapping_rig();
  const Pose motion{Vec3::Zero(), Vec3(0.02, -0.01, 0.015)};
  const auto locals = exact_locals(rig, motion);
  const ScaleSystem sys = build_scale_system(motion.t, motion.rotation(), others(locals), rig);
  EXPECT_EQ(sys.A.col(0).norm(), 0.0);
  EXPECT_EQ(code_of([&] { solve_scales(sys); }), ErrorCode::IllConditioned);
}

TEST(SolveScales, NoRotationIsIllConditioned) {
  const CameraRig rig = default_nonoverlapping_rig();
  const Pose motion{Vec3(0.01, 0.02, 0.03), Vec3::Zero()};
  const auto locals = exact_locals(rig, motion);
  EXPECT_EQ(code_of([&] {
              solve_scales(build_scale_system(motion.t, Mat3::Identity(), others(locals), rig));
            }),
            ErrorCode::IllConditioned);
}

TEST(FusePose, ExactCamerasGiveTruth) {
  const CameraRig rig = default_nonoverlapping_rig();
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 20; ++trial) {
    const Pose motion = random_motion(rng);
    const FusedPose fused = fuse_pose(exact_locals(rig, motion), rig, Vec4::Ones());
    EXPECT_FALSE(fused.fallback);
    EXPECT_LT((fused.pose.vector() - motion.vector()).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(FusePose, RecoversReferenceScale) {
  const CameraRig rig = default_nonoverlapping_rig();
  const Pose motion{Vec3(0.02, -0.01, 0.015), Vec3(0.03, 0.02, -0.025)};
  auto locals = exact_locals(rig, motion);
  locals[0].l *= 0.5;
  const FusedPose fused = fuse_pose(locals, rig, Vec4::Ones());
  EXPECT_NEAR(fused.scales[0], 2.0, 1e-9);
  EXPECT_LT((fused.pose.t - motion.t).norm(), 1e-6);
}

TEST(FusePose, FirstFrameFallsBack) {
  const CameraRig rig = default_nonoverlapping_rig();
  const FusedPose fused = fuse_pose(exact_locals(rig, Pose{}), rig, Vec4::Ones());
  EXPECT_TRUE(fused.fallback);
  EXPECT_EQ(fused.scales, Vec4::Ones());
  EXPECT_EQ(fused.pose.t, Vec3::Zero());
}

TEST(FusePose, PureRotationKeepsPreviousScales) {
  const CameraRig rig = default_nonoverlapping_rig();
  const Pose motion{Vec3::Zero(), Vec3(0.02, -0.01, 0.015)};
  const Vec4 prev(1.1, 0.9, 1.2, 0.8);
  const FusedPose fused = fuse_pose(exact_locals(rig, motion), rig, prev);
  EXPECT_TRUE(fused.fallback);
  EXPECT_EQ(fused.scales, prev);
}

TEST(FusePose, MissingCamera) {
  const CameraRig rig = default_nonoverlapping_rig();
  auto locals = exact_locals(rig, Pose{});
  locals[2].k = 1;
  EXPECT_EQ(code_of([&] { fuse_pose(locals, rig, Vec4::Ones()); }), ErrorCode::MissingCamera);
}

TEST(RigPoseFromCamera, ExactForEveryCamera) {
  const CameraRig rig = default_nonoverlapping_rig();
  std::mt19937_64 rng(15);
  const Pose motion = random_motion(rng);
  for (const CameraLocalPose& local : exact_locals(rig, motion)) {
    EXPECT_LT((rig_pose_from_camera(local, rig).vector() - motion.vector()).cwiseAbs().maxCoeff(),
              1e-12);
  }
}
