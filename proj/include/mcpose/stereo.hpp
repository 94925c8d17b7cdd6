#pragma once

#include <cstddef>
#include <vector>

#include "mcpose/geometry.hpp"

namespace mcpose {

// Maps homogeneous pixels of camera a to epipolar lines in camera b
// (p_b^T F p_a = 0). Normalized to unit Frobenius norm.
struct FundamentalMatrix {
  Mat3 F = Mat3::Zero();
};

struct StereoPair {
  std::size_t cam_a = 0;
  std::size_t cam_b = 1;
  FundamentalMatrix F;
  double baseline = 0.0;
};

// F = K_b^-T [t]x R K_a^-1 from the fixed rig extrinsics. The result does not
// depend on the rig pose. Throws CoincidentCenters when the baseline is below
// 1e-9 m.
FundamentalMatrix fundamental_from_calib(const CameraRig& rig, std::size_t a, std::size_t b);

StereoPair make_stereo_pair(const CameraRig& rig, std::size_t a, std::size_t b);

// Consecutive pairs (0,1), (2,3), ... of an overlapping rig.
std::vector<StereoPair> stereo_pairs(const CameraRig& rig);

// Pixel distance from p_b to the epipolar line F p_a. Throws DegenerateLine.
double epipolar_distance(const FundamentalMatrix& F, const Vec2& p_a, const Vec2& p_b);

// Midpoint of the common perpendicular of the two back-projected rays, cast
// from the camera placements implied by `pose`. Throws ParallelRays and
// BehindCamera.
Vec3 triangulate(const CameraRig& rig, const Pose& pose, const StereoPair& pair, const Vec2& p_a,
                 const Vec2& p_b);

}  // namespace mcpose
