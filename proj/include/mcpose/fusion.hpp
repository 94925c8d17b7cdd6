#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "mcpose/geometry.hpp"

namespace mcpose {

// Pose of camera k at one frame, measured in camera k's own initial frame
// (x_k, y_k, z_k). With a monocular estimator l is known only up to scale.
struct CameraLocalPose {
  std::size_t k = 0;
  Vec3 l = Vec3::Zero();
  Mat3 r = Mat3::Identity();
  bool scale_free = true;
};

// Stacked rigidity equations S_j d_j - S_kj R_k l_kj = (I - R_j) D_k for the
// three non-reference cameras. Rows 3(k-1)..3(k-1)+2 belong to camera k.
struct ScaleSystem {
  Eigen::Matrix<double, 9, 4> A = Eigen::Matrix<double, 9, 4>::Zero();
  Eigen::Matrix<double, 9, 1> b = Eigen::Matrix<double, 9, 1>::Zero();
};

struct ScaleSolution {
  Vec4 s = Vec4::Ones();
  double residual = 0.0;   // ||A s - b||
  double condition = 0.0;  // cond(A^T A)
};

inline constexpr double kMaxScaleCondition = 1e12;
inline constexpr double kMinReferenceTranslation = 1e-5;

// Median of the values; for an even count, the mean of the middle two.
double median(std::vector<double> values);

// Per-axis median of the decomposed angles. Throws GimbalProximity.
Vec3 fuse_rotation_median(std::span<const Mat3> rotations);

// Throws WrongCameraCount unless exactly three non-reference cameras are
// supplied.
ScaleSystem build_scale_system(const Vec3& d_j, const Mat3& R_j,
                               std::span<const CameraLocalPose> locals, const CameraRig& rig);

// Least-squares s for A s = b. Throws IllConditioned when cond(A^T A) >= 1e12,
// when ||d_j|| < 1e-5 m, or when b vanishes (no rotation, scale unobservable).
ScaleSolution solve_scales(const ScaleSystem& sys);

struct FusedPose {
  Pose pose;
  Vec4 scales = Vec4::Ones();
  bool fallback = false;   // solve_scales was ill-conditioned; prev scales reused
  double condition = 0.0;
};

// Rigidity-constraint fusion of all four cameras' local poses: rotation is the
// per-axis median of the equivalent rotations, translation is S_j d_j with d_j
// camera 1's translation. Throws MissingCamera and WrongCameraCount.
FusedPose fuse_pose(std::span<const CameraLocalPose> per_camera, const CameraRig& rig,
                    const Vec4& prev_scales);

// Rig pose implied by one camera's local pose, assuming unit scale.
Pose rig_pose_from_camera(const CameraLocalPose& local, const CameraRig& rig);

}  // namespace mcpose
