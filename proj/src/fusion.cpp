#include "mcpose/fusion.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <array>
#include <limits>
#include <string>

#include "mcpose/error.hpp"

namespace mcpose {

double median(std::vector<double> values) {
  if (values.empty()) throw Error(ErrorCode::InvalidArgument, "median of nothing");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

Vec3 fuse_rotation_median(std::span<const Mat3> rotations) {
  std::array<std::vector<double>, 3> per_axis;
  for (const Mat3& R : rotations) {
    const Vec3 a = angles_from_rot(R);
    for (int i = 0; i < 3; ++i) per_axis[i].push_back(a[i]);
  }
  return {median(per_axis[0]), median(per_axis[1]), median(per_axis[2])};
}

ScaleSystem build_scale_system(const Vec3& d_j, const Mat3& R_j,
                               std::span<const CameraLocalPose> locals, const CameraRig& rig) {
  if (locals.size() != 3) {
    throw Error(ErrorCode::WrongCameraCount,
                "expected 3 non-reference cameras, got " + std::to_string(locals.size()));
  }
  ScaleSystem sys;
  const Mat3 I_minus_R = Mat3::Identity() - R_j;
  for (const CameraLocalPose& local : locals) {
    if (local.k < 1 || local.k > 3) {
      throw Error(ErrorCode::WrongCameraCount, "camera index " + std::to_string(local.k));
    }
    const Camera& cam = rig.camera(local.k);
    const Eigen::Index row = 3 * static_cast<Eigen::Index>(local.k - 1);
    const auto col = static_cast<Eigen::Index>(local.k);
    sys.A.block<3, 1>(row, 0) = d_j;
    sys.A.block<3, 1>(row, col) = -(cam.R * local.l);
    sys.b.segment<3>(row) = I_minus_R * cam.D;
  }
  return sys;
}

ScaleSolution solve_scales(const ScaleSystem& sys) {
  ScaleSolution sol;
  const Eigen::Matrix4d AtA = sys.A.transpose() * sys.A;
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(AtA, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  sol.condition = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();

  if (sys.A.col(0).norm() < kMinReferenceTranslation) {
    throw Error(ErrorCode::IllConditioned, "reference translation below 1e-5 m");
  }
  if (!(sol.condition < kMaxScaleCondition)) {
    throw Error(ErrorCode::IllConditioned, "cond(A^T A) = " + std::to_string(sol.condition));
  }
  if (sys.b.norm() <= 1e-12) {
    throw Error(ErrorCode::IllConditioned, "zero right-hand side: no rotation");
  }
  sol.s = sys.A.colPivHouseholderQr().solve(sys.b);
  sol.residual = (sys.A * sol.s - sys.b).norm();
  return sol;
}

Pose rig_pose_from_camera(const CameraLocalPose& local, const CameraRig& rig) {
  const Camera& cam = rig.camera(local.k);
  const Mat3 R_j = equivalent_rotation(cam.R, local.r);
  // Camera k sits at d + R D_k and at D_k + R_k l in the world frame.
  const Vec3 d = cam.R * local.l + cam.D - R_j * cam.D;
  return Pose::from_rotation(d, R_j);
}

FusedPose fuse_pose(std::span<const CameraLocalPose> per_camera, const CameraRig& rig,
                    const Vec4& prev_scales) {
  if (rig.size() != 4) {
    throw Error(ErrorCode::WrongCameraCount, "fusion needs a 4-camera rig");
  }
  std::array<const CameraLocalPose*, 4> by_camera{};
  for (const CameraLocalPose& p : per_camera) {
    if (p.k < 4) by_camera[p.k] = &p;
  }
  for (std::size_t k = 0; k < 4; ++k) {
    if (by_camera[k] == nullptr) {
      throw Error(ErrorCode::MissingCamera, "no pose for camera " + std::to_string(k));
    }
  }

  std::array<Mat3, 4> rotations;
  for (std::size_t k = 0; k < 4; ++k) {
    rotations[k] = equivalent_rotation(rig.camera(k).R, by_camera[k]->r);
  }
  FusedPose fused;
  fused.pose.angles = fuse_rotation_median(rotations);

  const Vec3 d_j = by_camera[0]->l;
  const std::array<CameraLocalPose, 3> others{*by_camera[1], *by_camera[2], *by_camera[3]};
  const ScaleSystem sys = build_scale_system(d_j, fused.pose.rotation(), others, rig);
  try {
    const ScaleSolution sol = solve_scales(sys);
    fused.scales = sol.s;
    fused.condition = sol.condition;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::IllConditioned) throw;
    fused.scales = prev_scales;
    fused.fallback = true;
  }
  fused.pose.t = fused.scales[0] * d_j;
  return fused;
}

}  // namespace mcpose
