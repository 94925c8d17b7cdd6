#include "mcpose/ekf.hpp"

#include <Eigen/LU>

#include <string>

#include "mcpose/error.hpp"

namespace mcpose {

void EkfTuning::validate() const {
  const double values[] = {q_pose, q_vel, p0_pose, p0_vel, p0_struct_lateral, p0_struct_depth};
  for (double v : values) {
    if (!(v >= 0.0)) throw Error(ErrorCode::InvalidArgument, "tuning variances must be >= 0");
  }
  if (!(r_px > 0.0)) throw Error(ErrorCode::InvalidArgument, "r_px must be positive");
}

PoseFilterState PoseFilterState::initial(const Pose& pose, const Vec6& velocity,
                                         const EkfTuning& tuning) {
  PoseFilterState s;
  s.x << pose.vector(), velocity;
  Vec12 p0, q;
  p0 << Vec6::Constant(tuning.p0_pose), Vec6::Constant(tuning.p0_vel);
  q << Vec6::Constant(tuning.q_pose), Vec6::Constant(tuning.q_vel);
  s.P = p0.asDiagonal();
  s.Q = q.asDiagonal();
  s.r_var = tuning.r_px * tuning.r_px;
  return s;
}

Mat12 transition_matrix() {
  Mat12 A = Mat12::Identity();
  A.topRightCorner<6, 6>().setIdentity();
  return A;
}

PoseFilterState pose_predict(const PoseFilterState& state) {
  const Mat12 A = transition_matrix();
  PoseFilterState out = state;
  out.x.head<6>() += state.x.tail<6>();
  out.P = A * state.P * A.transpose() + state.Q;
  out.P = 0.5 * (out.P + out.P.transpose()).eval();
  return out;
}

namespace {

// Predicted pixels and Jacobian for the batch at the state's pose.
void linearize(const PoseFilterState& state, std::span<const Measurement> batch,
               const CameraRig& rig, Eigen::VectorXd& predicted, Eigen::MatrixXd& H) {
  const Pose pose = state.pose();
  const auto n = static_cast<Eigen::Index>(batch.size());
  predicted.resize(2 * n);
  H.setZero(2 * n, 12);
  Mat26 J;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Measurement& m = batch[static_cast<std::size_t>(i)];
    predicted.segment<2>(2 * i) = project_in_camera(pose, rig, m.camera, m.M, &J);
    H.block<2, 6>(2 * i, 0) = J;
  }
}

}  // namespace

Eigen::MatrixXd measurement_jacobian(const PoseFilterState& state,
                                     std::span<const Measurement> batch, const CameraRig& rig) {
  Eigen::VectorXd predicted;
  Eigen::MatrixXd H;
  linearize(state, batch, rig, predicted, H);
  return H;
}

PoseFilterState pose_update(const PoseFilterState& state, std::span<const Measurement> batch,
                            const CameraRig& rig, UpdateDiagnostics* diagnostics) {
  if (batch.empty()) throw Error(ErrorCode::EmptyBatch, "pose update without measurements");

  Eigen::VectorXd predicted;
  Eigen::MatrixXd H;
  linearize(state, batch, rig, predicted, H);

  Eigen::VectorXd innovation(predicted.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    innovation.segment<2>(2 * static_cast<Eigen::Index>(i)) = batch[i].pixel;
  }
  innovation -= predicted;

  const double r = state.r_var;
  const Mat12 HtH = H.transpose() * H;
  const Mat12 X = r * Mat12::Identity() + state.P * HtH;
  const Eigen::PartialPivLU<Mat12> lu(X);
  if (!(lu.rcond() > 1e-15)) {
    throw Error(ErrorCode::SingularInnovationCovariance,
                "rcond " + std::to_string(lu.rcond()));
  }
  const Eigen::Matrix<double, 12, Eigen::Dynamic> PHt = state.P * H.transpose();
  const Eigen::Matrix<double, 12, Eigen::Dynamic> K = lu.solve(PHt);

  PoseFilterState out = state;
  out.x += K * innovation;
  const Mat12 IKH = Mat12::Identity() - K * H;
  out.P = IKH * state.P * IKH.transpose() + r * (K * K.transpose());
  out.P = 0.5 * (out.P + out.P.transpose()).eval();

  if (diagnostics != nullptr) {
    // nu^T S^-1 nu with S^-1 = (I - H X^-1 P H^T) / r.
    const Vec12 Htnu = H.transpose() * innovation;
    const Vec12 y = lu.solve(state.P * Htnu);
    diagnostics->nis = (innovation.squaredNorm() - Htnu.dot(y)) / r;
    diagnostics->dof = static_cast<std::size_t>(innovation.size());
  }
  return out;
}

StructureFilterState orthographic_init(const Vec2& pixel, const Pose& pose, const CameraRig& rig,
                                       std::size_t k, double z0, const EkfTuning& tuning) {
  const Camera& cam = rig.camera(k);
  const Mat3 orient = camera_orientation(pose, rig, k);
  const Vec3 local = back_project(pixel, cam.intrinsics, z0);
  StructureFilterState s;
  s.m = camera_center(pose, rig, k) + orient * local;
  const Vec3 diag(tuning.p0_struct_lateral, tuning.p0_struct_lateral, tuning.p0_struct_depth);
  s.P = orient * diag.asDiagonal() * orient.transpose();
  return s;
}

StructureFilterState structure_update(const StructureFilterState& s, const Vec2& observed,
                                      const Pose& pose, const CameraRig& rig, std::size_t k,
                                      double r_var) {
  const Camera& cam = rig.camera(k);
  const Vec3 P = world_to_camera_k(pose, rig, k, s.m);
  const Vec2 predicted = project(P, cam.intrinsics);
  const Mat23 J = projection_jacobian(P, cam.intrinsics) * camera_orientation(pose, rig, k).transpose();

  const Eigen::Matrix2d S = J * s.P * J.transpose() + r_var * Eigen::Matrix2d::Identity();
  const Eigen::Matrix<double, 3, 2> K = s.P * J.transpose() * S.inverse();

  StructureFilterState out;
  out.m = s.m + K * (observed - predicted);
  const Mat3 IKH = Mat3::Identity() - K * J;
  out.P = IKH * s.P * IKH.transpose() + r_var * (K * K.transpose());
  out.P = 0.5 * (out.P + out.P.transpose()).eval();
  return out;
}

}  // namespace mcpose
