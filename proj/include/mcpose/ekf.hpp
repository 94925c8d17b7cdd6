#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "mcpose/geometry.hpp"

namespace mcpose {

using Vec12 = Eigen::Matrix<double, 12, 1>;
using Mat12 = Eigen::Matrix<double, 12, 12>;

// Filter tuning. Variances are per frame; r_px is the pixel noise standard
// deviation (the filter uses r_px^2).
struct EkfTuning {
  double q_pose = 1e-6;
  double q_vel = 1e-4;
  double r_px = 0.5;
  double p0_pose = 1e-4;
  double p0_vel = 1e-4;
  double p0_struct_lateral = 1e-2;
  double p0_struct_depth = 0.25;

  void validate() const;
};

// State x = (tx, ty, tz, alpha, beta, gamma, and their per-frame rates).
struct PoseFilterState {
  Vec12 x = Vec12::Zero();
  Mat12 P = Mat12::Zero();
  Mat12 Q = Mat12::Zero();
  double r_var = 0.25;

  Pose pose() const { return Pose::from_vector(x.head<6>()); }
  Vec6 velocity() const { return x.tail<6>(); }

  static PoseFilterState initial(const Pose& pose, const Vec6& velocity, const EkfTuning& tuning);
};

struct StructureFilterState {
  Vec3 m = Vec3::Zero();
  Mat3 P = Mat3::Zero();
};

struct Measurement {
  std::size_t camera = 0;
  int feature = 0;
  Vec2 pixel = Vec2::Zero();
  Vec3 M = Vec3::Zero();
};

using MeasurementBatch = std::vector<Measurement>;

struct UpdateDiagnostics {
  double nis = 0.0;       // normalized innovation squared
  std::size_t dof = 0;    // measurement dimension
};

// Constant-velocity transition matrix.
Mat12 transition_matrix();

PoseFilterState pose_predict(const PoseFilterState& state);

// Analytic (2n x 12) Jacobian of the stacked pixel predictions. Columns 6..11
// are zero. Throws BehindCamera.
Eigen::MatrixXd measurement_jacobian(const PoseFilterState& state,
                                     std::span<const Measurement> batch, const CameraRig& rig);

// Batched EKF update with a Joseph-form covariance update. The gain is formed
// through the 12x12 push-through identity
//   P H^T (r I + H P H^T)^-1 = P (r I + H^T H P)^-1 H^T
// so large batches never build the (2n x 2n) innovation covariance.
// Throws EmptyBatch, SingularInnovationCovariance and BehindCamera.
PoseFilterState pose_update(const PoseFilterState& state, std::span<const Measurement> batch,
                            const CameraRig& rig, UpdateDiagnostics* diagnostics = nullptr);

// Orthographic seed: the point on the ray through `pixel` at depth z0 in
// camera k, with covariance lateral/lateral/depth along camera k's axes.
StructureFilterState orthographic_init(const Vec2& pixel, const Pose& pose, const CameraRig& rig,
                                       std::size_t k, double z0, const EkfTuning& tuning);

// Point EKF update from one pixel observation with the pose held fixed.
// Throws BehindCamera.
StructureFilterState structure_update(const StructureFilterState& s, const Vec2& observed,
                                      const Pose& pose, const CameraRig& rig, std::size_t k,
                                      double r_var);

}  // namespace mcpose
