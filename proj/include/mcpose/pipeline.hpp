#pragma once

#include <array>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mcpose/ekf.hpp"
#include "mcpose/geometry.hpp"
#include "mcpose/simulate.hpp"

namespace mcpose {

struct PipelineConfig {
  double epipolar_threshold = 2.0;  // pixels
  std::size_t min_features = 50;    // refresh when active tracks drop below this
  double z0 = 1.0;                  // orthographic initialization depth, meters

  void validate() const;
};

// World positions by feature id. When handed to the non-overlapping pipeline,
// features are seeded at their true positions instead of orthographically.
using TrueStructure = std::unordered_map<int, Vec3>;

struct FrameDiagnostics {
  std::size_t frame = 0;
  std::vector<std::size_t> feature_counts;  // active tracks per chain (stereo pair or camera)
  std::vector<std::size_t> refreshed;       // chains re-triangulated or re-detected at this frame
  bool updated = false;                     // a filter update ran at this frame
  double nis = std::numeric_limits<double>::quiet_NaN();
  std::size_t nis_dof = 0;
  // Rigidity fusion only.
  bool fused = false;
  Vec4 scales = Vec4::Ones();
  bool scale_fallback = false;
  double condition = 0.0;
};

struct PoseEstimateSeries {
  std::string method;
  std::vector<Pose> poses;
  std::vector<FrameDiagnostics> diagnostics;
};

struct Match {
  Vec3 M = Vec3::Zero();
  Vec2 pixel = Vec2::Zero();
};

struct RigMatch {
  std::size_t camera = 0;
  Vec3 M = Vec3::Zero();
  Vec2 pixel = Vec2::Zero();
};

struct LoweReport {
  double cost = 0.0;  // sum of squared pixel residuals at the solution
  int iterations = 0;
};

// Damped Gauss-Newton on the reprojection error over the six pose parameters.
// Stops when the step norm drops below 1e-10 or after 50 iterations; a step is
// halved while it increases the cost. Throws InsufficientMatches (< 4) and
// Diverged (5 consecutive increasing steps).
Pose lowe_pose(std::span<const Match> matches, const Intrinsics& intrinsics, const Pose& init,
               LoweReport* report = nullptr);

// Same solver with correspondences spread over the cameras of a rig.
Pose lowe_pose_rig(std::span<const RigMatch> matches, const CameraRig& rig, const Pose& init,
                   LoweReport* report = nullptr);

// Overlapping layout: stereo matching and triangulation at frame 0, Lowe's
// method at frame 1, then one batched pose EKF over every camera. A pair whose
// active tracks fall below min_features is re-triangulated from the previous
// frame with the pose estimated there.
PoseEstimateSeries run_stereo_sequence(const ObservationStream& frames, const CameraRig& rig,
                                       const EkfTuning& tuning, const PipelineConfig& config);

struct NonOverlapResult {
  std::array<PoseEstimateSeries, 4> cameras;  // single-camera estimates of the rig pose
  PoseEstimateSeries rc;                      // rigidity-constraint fusion

  std::vector<const PoseEstimateSeries*> all() const;
};

// Non-overlapping layout: every camera runs its own pose EKF over
// structure-EKF features seeded on the plane z = z0, and the four local poses
// are fused per frame.
NonOverlapResult run_nonoverlap_sequence(const ObservationStream& frames, const CameraRig& rig,
                                         const EkfTuning& tuning, const PipelineConfig& config,
                                         const TrueStructure* true_structure = nullptr);

using ErrorRow = std::array<double, 6>;

// Mean absolute error per pose parameter (tx, ty, tz, alpha, beta, gamma) over
// frames [skip_frames, n). Throws LengthMismatch.
ErrorRow pose_error_report(const std::vector<Pose>& estimate, const std::vector<Pose>& truth,
                           std::size_t skip_frames = 1);

}  // namespace mcpose
