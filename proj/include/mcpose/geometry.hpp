#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cstddef>
#include <string_view>
#include <vector>

namespace mcpose {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat23 = Eigen::Matrix<double, 2, 3>;
using Mat26 = Eigen::Matrix<double, 2, 6>;

// Points closer than this along the optical axis are not projected.
inline constexpr double kMinDepth = 1e-6;

// Rotation angles use a single convention everywhere in the library:
//   R = Rx(alpha) * Ry(beta) * Rz(gamma)
// where alpha, beta, gamma rotate about the reference axes x1, y1, z1.
Mat3 rot_x(double angle);
Mat3 rot_y(double angle);
Mat3 rot_z(double angle);
Mat3 rot_from_angles(const Vec3& angles);

// Inverse of rot_from_angles. Throws NonOrthonormalInput when R is not a
// rotation within 1e-8 and GimbalProximity when |cos(beta)| < 1e-6.
Vec3 angles_from_rot(const Mat3& R);

// Partial derivatives of rot_from_angles with respect to each angle.
std::array<Mat3, 3> rot_derivatives(const Vec3& angles);

bool is_rotation(const Mat3& R, double tol = 1e-8);

// Angle of the axis-angle form of R, in [0, pi].
double rotation_angle(const Mat3& R);

// Pose of the reference camera in the world frame: translation d and the
// rotation angles of R.
struct Pose {
  Vec3 t = Vec3::Zero();
  Vec3 angles = Vec3::Zero();

  Mat3 rotation() const { return rot_from_angles(angles); }
  Vec6 vector() const;

  static Pose identity() { return {}; }
  static Pose from_vector(const Vec6& v);
  static Pose from_rotation(const Vec3& t, const Mat3& R);
};

struct Intrinsics {
  double fx = 500.0;
  double fy = 500.0;
  double cx = 320.0;
  double cy = 240.0;
  int width = 640;
  int height = 480;

  bool contains(const Vec2& pixel) const;
  // Throws InvalidArgument on non-positive focal lengths or an out-of-image
  // principal point.
  void validate() const;
};

enum class Layout { Overlapping, NonOverlapping };

std::string_view to_string(Layout layout) noexcept;
Layout layout_from_string(std::string_view text);

// Fixed mounting of one camera on the rig. D is the displacement from camera
// 1 and R the camera's rotation, both expressed in the world frame at rest.
struct Camera {
  Vec3 D = Vec3::Zero();
  Mat3 R = Mat3::Identity();
  Intrinsics intrinsics;
};

class CameraRig {
 public:
  CameraRig() = default;
  // Validates that camera 0 sits at the origin with identity rotation and that
  // every R is a rotation.
  CameraRig(std::vector<Camera> cameras, Layout layout);

  std::size_t size() const noexcept { return cameras_.size(); }
  const Camera& camera(std::size_t k) const;
  const std::vector<Camera>& cameras() const noexcept { return cameras_; }
  Layout layout() const noexcept { return layout_; }

  // Rig made of the listed cameras re-expressed relative to the first one.
  CameraRig subset(const std::vector<std::size_t>& indices, Layout layout) const;

  // A rig with a single reference camera.
  static CameraRig single(const Intrinsics& intrinsics);

 private:
  std::vector<Camera> cameras_;
  Layout layout_ = Layout::Overlapping;
};

struct ScenePoint {
  int id = 0;
  Vec3 M = Vec3::Zero();
};

// Reference camera coordinates of a world point: R^T (M - d).
Vec3 world_to_camera(const Pose& pose, const Vec3& M);

// Camera k coordinates of a world point: R_k^T R^T (M - d - R D_k).
Vec3 world_to_camera_k(const Pose& pose, const CameraRig& rig, std::size_t k, const Vec3& M);

// Pinhole projection. Throws BehindCamera when P.z <= kMinDepth.
Vec2 project(const Vec3& P, const Intrinsics& intrinsics);

// d(u, v) / d(P) for the pinhole model.
Mat23 projection_jacobian(const Vec3& P, const Intrinsics& intrinsics);

// Point at the given depth along the ray through pixel, in camera coordinates.
Vec3 back_project(const Vec2& pixel, const Intrinsics& intrinsics, double depth);

// Predicted pixel of M in camera k and its Jacobian with respect to the six
// pose parameters (t, angles). Throws BehindCamera.
Vec2 project_in_camera(const Pose& pose, const CameraRig& rig, std::size_t k, const Vec3& M,
                       Mat26* jacobian = nullptr);

// Change of basis R_k r R_k^T: the rotation r, measured in camera k's own
// initial frame, expressed about the reference axes.
Mat3 equivalent_rotation(const Mat3& R_k, const Mat3& r);

// World position and orientation of camera k when the rig is at `pose`.
Vec3 camera_center(const Pose& pose, const CameraRig& rig, std::size_t k);
Mat3 camera_orientation(const Pose& pose, const CameraRig& rig, std::size_t k);

}  // namespace mcpose
