#include "mcpose/stereo.hpp"

#include <cmath>
#include <string>

#include "mcpose/error.hpp"

namespace mcpose {

namespace {

Mat3 skew(const Vec3& v) {
  Mat3 S;
  S << 0, -v.z(), v.y(),
       v.z(), 0, -v.x(),
       -v.y(), v.x(), 0;
  return S;
}

Mat3 camera_matrix(const Intrinsics& intr) {
  Mat3 K;
  K << intr.fx, 0, intr.cx,
       0, intr.fy, intr.cy,
       0, 0, 1;
  return K;
}

}  // namespace

FundamentalMatrix fundamental_from_calib(const CameraRig& rig, std::size_t a, std::size_t b) {
  const Camera& ca = rig.camera(a);
  const Camera& cb = rig.camera(b);
  const Vec3 offset = ca.D - cb.D;
  if (a == b || offset.norm() < 1e-9) {
    throw Error(ErrorCode::CoincidentCenters,
                "cameras " + std::to_string(a) + " and " + std::to_string(b));
  }
  // X_b = R_rel X_a + t for camera coordinates of the same point.
  const Mat3 R_rel = cb.R.transpose() * ca.R;
  const Vec3 t = cb.R.transpose() * offset;
  const Mat3 E = skew(t) * R_rel;
  const Mat3 Ka_inv = camera_matrix(ca.intrinsics).inverse();
  const Mat3 Kb_inv = camera_matrix(cb.intrinsics).inverse();
  Mat3 F = Kb_inv.transpose() * E * Ka_inv;
  F /= F.norm();
  return {F};
}

StereoPair make_stereo_pair(const CameraRig& rig, std::size_t a, std::size_t b) {
  StereoPair pair;
  pair.cam_a = a;
  pair.cam_b = b;
  pair.F = fundamental_from_calib(rig, a, b);
  pair.baseline = (rig.camera(a).D - rig.camera(b).D).norm();
  return pair;
}

std::vector<StereoPair> stereo_pairs(const CameraRig& rig) {
  if (rig.size() < 2 || rig.size() % 2 != 0) {
    throw Error(ErrorCode::InvalidArgument,
                "overlapping rig needs an even number of cameras, got " +
                    std::to_string(rig.size()));
  }
  std::vector<StereoPair> pairs;
  for (std::size_t k = 0; k + 1 < rig.size(); k += 2) pairs.push_back(make_stereo_pair(rig, k, k + 1));
  return pairs;
}

double epipolar_distance(const FundamentalMatrix& F, const Vec2& p_a, const Vec2& p_b) {
  const Vec3 line = F.F * p_a.homogeneous();
  const double norm = std::hypot(line.x(), line.y());
  if (std::abs(line.x()) < 1e-15 && std::abs(line.y()) < 1e-15) {
    throw Error(ErrorCode::DegenerateLine, "epipolar line has no direction");
  }
  return std::abs(line.dot(p_b.homogeneous())) / norm;
}

Vec3 triangulate(const CameraRig& rig, const Pose& pose, const StereoPair& pair, const Vec2& p_a,
                 const Vec2& p_b) {
  const Vec3 c_a = camera_center(pose, rig, pair.cam_a);
  const Vec3 c_b = camera_center(pose, rig, pair.cam_b);
  // Rays with unit depth in their own camera, so the ray parameter is depth.
  const Vec3 r_a =
      camera_orientation(pose, rig, pair.cam_a) * back_project(p_a, rig.camera(pair.cam_a).intrinsics, 1.0);
  const Vec3 r_b =
      camera_orientation(pose, rig, pair.cam_b) * back_project(p_b, rig.camera(pair.cam_b).intrinsics, 1.0);

  const double sin_angle = r_a.cross(r_b).norm() / (r_a.norm() * r_b.norm());
  if (sin_angle <= 1e-8) throw Error(ErrorCode::ParallelRays, "rays are parallel");

  const Vec3 w0 = c_a - c_b;
  const double aa = r_a.dot(r_a), ab = r_a.dot(r_b), bb = r_b.dot(r_b);
  const double da = r_a.dot(w0), db = r_b.dot(w0);
  const double denom = aa * bb - ab * ab;
  const double s = (ab * db - bb * da) / denom;
  const double u = (aa * db - ab * da) / denom;
  if (!(s > kMinDepth) || !(u > kMinDepth)) {
    throw Error(ErrorCode::BehindCamera, "triangulated point behind a camera");
  }
  return 0.5 * ((c_a + s * r_a) + (c_b + u * r_b));
}

}  // namespace mcpose
