#include "mcpose/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mcpose/error.hpp"

namespace mcpose {

Mat3 rot_x(double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  Mat3 R;
  R << 1, 0, 0,
       0, c, -s,
       0, s, c;
  return R;
}

Mat3 rot_y(double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  Mat3 R;
  R << c, 0, s,
       0, 1, 0,
       -s, 0, c;
  return R;
}

Mat3 rot_z(double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  Mat3 R;
  R << c, -s, 0,
       s, c, 0,
       0, 0, 1;
  return R;
}

Mat3 rot_from_angles(const Vec3& angles) {
  return rot_x(angles.x()) * rot_y(angles.y()) * rot_z(angles.z());
}

namespace {

Mat3 drot_x(double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  Mat3 R;
  R << 0, 0, 0,
       0, -s, -c,
       0, c, -s;
  return R;
}

Mat3 drot_y(double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  Mat3 R;
  R << -s, 0, c,
       0, 0, 0,
       -c, 0, -s;
  return R;
}

Mat3 drot_z(double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  Mat3 R;
  R << -s, -c, 0,
       c, -s, 0,
       0, 0, 0;
  return R;
}

}  // namespace

std::array<Mat3, 3> rot_derivatives(const Vec3& angles) {
  const Mat3 Rx = rot_x(angles.x()), Ry = rot_y(angles.y()), Rz = rot_z(angles.z());
  return {drot_x(angles.x()) * Ry * Rz, Rx * drot_y(angles.y()) * Rz,
          Rx * Ry * drot_z(angles.z())};
}

bool is_rotation(const Mat3& R, double tol) {
  if (!R.allFinite()) return false;
  const double ortho = (R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff();
  return ortho <= tol && std::abs(R.determinant() - 1.0) <= tol;
}

Vec3 angles_from_rot(const Mat3& R) {
  if (!is_rotation(R, 1e-8)) {
    throw Error(ErrorCode::NonOrthonormalInput, "matrix is not a rotation");
  }
  const double cos_beta = std::hypot(R(0, 0), R(0, 1));
  if (cos_beta < 1e-6) {
    throw Error(ErrorCode::GimbalProximity, "|cos(beta)| below 1e-6");
  }
  return {std::atan2(-R(1, 2), R(2, 2)), std::atan2(R(0, 2), cos_beta),
          std::atan2(-R(0, 1), R(0, 0))};
}

double rotation_angle(const Mat3& R) {
  const Vec3 axis(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
  return std::atan2(axis.norm(), R.trace() - 1.0);
}

Vec6 Pose::vector() const {
  Vec6 v;
  v << t, angles;
  return v;
}

Pose Pose::from_vector(const Vec6& v) { return Pose{v.head<3>(), v.tail<3>()}; }

Pose Pose::from_rotation(const Vec3& t, const Mat3& R) { return Pose{t, angles_from_rot(R)}; }

bool Intrinsics::contains(const Vec2& pixel) const {
  return pixel.x() >= 0.0 && pixel.y() >= 0.0 && pixel.x() <= width && pixel.y() <= height;
}

void Intrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "focal lengths must be positive");
  }
  if (width <= 0 || height <= 0) {
    throw Error(ErrorCode::InvalidArgument, "resolution must be positive");
  }
  if (!(cx >= 0.0 && cx <= width && cy >= 0.0 && cy <= height)) {
    throw Error(ErrorCode::InvalidArgument, "principal point outside the image");
  }
}

std::string_view to_string(Layout layout) noexcept {
  return layout == Layout::Overlapping ? "overlapping" : "non-overlapping";
}

Layout layout_from_string(std::string_view text) {
  if (text == "overlapping" || text == "stereo") return Layout::Overlapping;
  if (text == "non-overlapping" || text == "nonoverlap") return Layout::NonOverlapping;
  throw Error(ErrorCode::InvalidArgument, "unknown layout '" + std::string(text) + "'");
}

CameraRig::CameraRig(std::vector<Camera> cameras, Layout layout)
    : cameras_(std::move(cameras)), layout_(layout) {
  if (cameras_.empty()) throw Error(ErrorCode::InvalidArgument, "rig has no cameras");
  if (!cameras_.front().D.isZero(0.0) || !cameras_.front().R.isIdentity(0.0)) {
    throw Error(ErrorCode::InvalidArgument,
                "reference camera must have D = 0 and R = I");
  }
  for (std::size_t k = 0; k < cameras_.size(); ++k) {
    if (!is_rotation(cameras_[k].R, 1e-12)) {
      throw Error(ErrorCode::NonOrthonormalInput,
                  "camera " + std::to_string(k) + " rotation is not orthonormal");
    }
    cameras_[k].intrinsics.validate();
  }
}

const Camera& CameraRig::camera(std::size_t k) const {
  if (k >= cameras_.size()) {
    throw Error(ErrorCode::InvalidCameraIndex,
                "camera " + std::to_string(k) + " of " + std::to_string(cameras_.size()));
  }
  return cameras_[k];
}

CameraRig CameraRig::subset(const std::vector<std::size_t>& indices, Layout layout) const {
  if (indices.empty()) throw Error(ErrorCode::InvalidArgument, "empty camera subset");
  const Camera& base = camera(indices.front());
  std::vector<Camera> picked;
  picked.reserve(indices.size());
  for (std::size_t i : indices) {
    const Camera& c = camera(i);
    Camera rel = c;
    if (i == indices.front()) {
      rel.D = Vec3::Zero();
      rel.R = Mat3::Identity();
    } else {
      rel.D = base.R.transpose() * (c.D - base.D);
      rel.R = base.R.transpose() * c.R;
    }
    picked.push_back(rel);
  }
  return CameraRig(std::move(picked), layout);
}

CameraRig CameraRig::single(const Intrinsics& intrinsics) {
  return CameraRig({Camera{Vec3::Zero(), Mat3::Identity(), intrinsics}}, Layout::NonOverlapping);
}

Vec3 world_to_camera(const Pose& pose, const Vec3& M) {
  const Mat3 R = pose.rotation();
  return R.transpose() * (M - pose.t);
}

Vec3 world_to_camera_k(const Pose& pose, const CameraRig& rig, std::size_t k, const Vec3& M) {
  const Camera& cam = rig.camera(k);
  const Mat3 R = pose.rotation();
  return cam.R.transpose() * (R.transpose() * (M - pose.t - R * cam.D));
}

Vec2 project(const Vec3& P, const Intrinsics& intr) {
  if (!(P.z() > kMinDepth)) {
    throw Error(ErrorCode::BehindCamera, "point depth " + std::to_string(P.z()));
  }
  return {intr.fx * P.x() / P.z() + intr.cx, intr.fy * P.y() / P.z() + intr.cy};
}

Mat23 projection_jacobian(const Vec3& P, const Intrinsics& intr) {
  const double iz = 1.0 / P.z();
  Mat23 J;
  J << intr.fx * iz, 0.0, -intr.fx * P.x() * iz * iz,
       0.0, intr.fy * iz, -intr.fy * P.y() * iz * iz;
  return J;
}

Vec3 back_project(const Vec2& pixel, const Intrinsics& intr, double depth) {
  return {(pixel.x() - intr.cx) / intr.fx * depth, (pixel.y() - intr.cy) / intr.fy * depth, depth};
}

Vec2 project_in_camera(const Pose& pose, const CameraRig& rig, std::size_t k, const Vec3& M,
                       Mat26* jacobian) {
  const Camera& cam = rig.camera(k);
  const Vec3 P = world_to_camera_k(pose, rig, k, M);
  const Vec2 uv = project(P, cam.intrinsics);
  if (jacobian != nullptr) {
    // P = R_k^T (R^T (M - d) - D_k), so dP/dd = -R_k^T R^T and
    // dP/dangle_i = R_k^T (dR/dangle_i)^T (M - d).
    const Mat3 R = pose.rotation();
    const auto dR = rot_derivatives(pose.angles);
    const Vec3 rel = M - pose.t;
    Eigen::Matrix<double, 3, 6> dP;
    dP.leftCols<3>() = -cam.R.transpose() * R.transpose();
    for (int i = 0; i < 3; ++i) dP.col(3 + i) = cam.R.transpose() * (dR[i].transpose() * rel);
    *jacobian = projection_jacobian(P, cam.intrinsics) * dP;
  }
  return uv;
}

Mat3 equivalent_rotation(const Mat3& R_k, const Mat3& r) {
  if (!is_rotation(R_k, 1e-8) || !is_rotation(r, 1e-8)) {
    throw Error(ErrorCode::NonOrthonormalInput, "equivalent_rotation needs rotations");
  }
  return R_k * r * R_k.transpose();
}

Vec3 camera_center(const Pose& pose, const CameraRig& rig, std::size_t k) {
  return pose.t + pose.rotation() * rig.camera(k).D;
}

Mat3 camera_orientation(const Pose& pose, const CameraRig& rig, std::size_t k) {
  return pose.rotation() * rig.camera(k).R;
}

}  // namespace mcpose
