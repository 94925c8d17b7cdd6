#include "mcpose/pipeline.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "mcpose/error.hpp"
#include "mcpose/fusion.hpp"
#include "mcpose/stereo.hpp"

namespace mcpose {

void PipelineConfig::validate() const {
  if (!(epipolar_threshold > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "epipolar_threshold must be positive");
  }
  if (!(z0 > 0.0)) throw Error(ErrorCode::InvalidArgument, "z0 must be positive");
}

// ---------------------------------------------------------------------------
// Lowe's method

namespace {

constexpr int kLoweMaxIterations = 50;
constexpr double kLoweStepTol = 1e-10;
constexpr int kLoweMaxIncreases = 5;

double reprojection_cost(std::span<const RigMatch> matches, const CameraRig& rig,
                         const Pose& pose) {
  double cost = 0.0;
  for (const RigMatch& m : matches) {
    const Vec3 P = world_to_camera_k(pose, rig, m.camera, m.M);
    if (!(P.z() > kMinDepth)) return std::numeric_limits<double>::infinity();
    cost += (m.pixel - project(P, rig.camera(m.camera).intrinsics)).squaredNorm();
  }
  return cost;
}

}  // namespace

Pose lowe_pose_rig(std::span<const RigMatch> matches, const CameraRig& rig, const Pose& init,
                   LoweReport* report) {
  if (matches.size() < 4) {
    throw Error(ErrorCode::InsufficientMatches,
                std::to_string(matches.size()) + " matches, need at least 4");
  }
  Pose pose = init;
  double cost = reprojection_cost(matches, rig, pose);
  if (!std::isfinite(cost)) {
    throw Error(ErrorCode::BehindCamera, "initial pose puts a match behind its camera");
  }

  int iteration = 0;
  int increases = 0;
  for (; iteration < kLoweMaxIterations; ++iteration) {
    Eigen::Matrix<double, 6, 6> JtJ = Eigen::Matrix<double, 6, 6>::Zero();
    Vec6 Jtr = Vec6::Zero();
    Mat26 J;
    for (const RigMatch& m : matches) {
      const Vec2 r = m.pixel - project_in_camera(pose, rig, m.camera, m.M, &J);
      JtJ.noalias() += J.transpose() * J;
      Jtr.noalias() += J.transpose() * r;
    }
    const Eigen::LDLT<Eigen::Matrix<double, 6, 6>> ldlt(JtJ);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
      throw Error(ErrorCode::Diverged, "degenerate normal equations");
    }
    Vec6 step = ldlt.solve(Jtr);
    if (!step.allFinite()) throw Error(ErrorCode::Diverged, "non-finite step");

    if (step.norm() < kLoweStepTol) {
      pose = Pose::from_vector(pose.vector() + step);
      cost = reprojection_cost(matches, rig, pose);
      ++iteration;
      break;
    }
    // Halve the step while the cost goes up; ties within rounding count as
    // progress.
    bool accepted = false;
    while (!accepted) {
      const Pose trial = Pose::from_vector(pose.vector() + step);
      const double trial_cost = reprojection_cost(matches, rig, trial);
      if (trial_cost <= cost + 1e-12 * std::max(1.0, cost)) {
        pose = trial;
        cost = trial_cost;
        increases = 0;
        accepted = true;
      } else {
        if (++increases >= kLoweMaxIncreases) {
          throw Error(ErrorCode::Diverged, "cost increased for 5 consecutive steps");
        }
        step *= 0.5;
      }
    }
    if (step.norm() < kLoweStepTol) {
      ++iteration;
      break;
    }
  }
  if (report != nullptr) {
    report->cost = cost;
    report->iterations = iteration;
  }
  return pose;
}

Pose lowe_pose(std::span<const Match> matches, const Intrinsics& intrinsics, const Pose& init,
               LoweReport* report) {
  const CameraRig rig = CameraRig::single(intrinsics);
  std::vector<RigMatch> rig_matches;
  rig_matches.reserve(matches.size());
  for (const Match& m : matches) rig_matches.push_back({0, m.M, m.pixel});
  return lowe_pose_rig(rig_matches, rig, init, report);
}

// ---------------------------------------------------------------------------
// Shared helpers

namespace {

const Observation* find_observation(const CameraFrame& frame, int feature) {
  const auto it = std::lower_bound(
      frame.begin(), frame.end(), feature,
      [](const Observation& o, int id) { return o.feature < id; });
  if (it == frame.end() || it->feature != feature) return nullptr;
  return &*it;
}

void check_stream(const ObservationStream& frames, const CameraRig& rig) {
  if (frames.n_cameras != rig.size()) {
    throw Error(ErrorCode::LengthMismatch, "stream has " + std::to_string(frames.n_cameras) +
                                               " cameras, rig has " + std::to_string(rig.size()));
  }
  for (const auto& frame : frames.frames) {
    if (frame.size() != rig.size()) {
      throw Error(ErrorCode::LengthMismatch, "frame with wrong camera count");
    }
  }
}

// Keeps measurements whose point is comfortably in front of its camera at the
// given pose.
bool in_front(const Pose& pose, const CameraRig& rig, std::size_t k, const Vec3& M) {
  return world_to_camera_k(pose, rig, k, M).z() > 1e-3;
}

// ---------------------------------------------------------------------------
// Overlapping layout

using StereoTracks = std::map<int, Vec3>;

StereoTracks triangulate_pair(const std::vector<CameraFrame>& frame, const CameraRig& rig,
                              const Pose& pose, const StereoPair& pair, double threshold) {
  StereoTracks tracks;
  const CameraFrame& obs_a = frame[pair.cam_a];
  const CameraFrame& obs_b = frame[pair.cam_b];
  auto ia = obs_a.begin();
  auto ib = obs_b.begin();
  while (ia != obs_a.end() && ib != obs_b.end()) {
    if (ia->feature < ib->feature) {
      ++ia;
    } else if (ib->feature < ia->feature) {
      ++ib;
    } else {
      if (epipolar_distance(pair.F, ia->pixel, ib->pixel) <= threshold) {
        try {
          tracks.emplace(ia->feature, triangulate(rig, pose, pair, ia->pixel, ib->pixel));
        } catch (const Error& e) {
          if (e.code() != ErrorCode::ParallelRays && e.code() != ErrorCode::BehindCamera) throw;
        }
      }
      ++ia;
      ++ib;
    }
  }
  return tracks;
}

std::size_t count_active(const StereoTracks& tracks, const std::vector<CameraFrame>& frame,
                         const StereoPair& pair) {
  std::size_t n = 0;
  for (const auto& [id, M] : tracks) {
    if (find_observation(frame[pair.cam_a], id) || find_observation(frame[pair.cam_b], id)) ++n;
  }
  return n;
}

}  // namespace

PoseEstimateSeries run_stereo_sequence(const ObservationStream& frames, const CameraRig& rig,
                                       const EkfTuning& tuning, const PipelineConfig& config) {
  check_stream(frames, rig);
  const std::vector<StereoPair> pairs = stereo_pairs(rig);
  const std::size_t n_frames = frames.n_frames();

  PoseEstimateSeries series;
  series.method = rig.size() == 2 ? "2cameras" : std::to_string(rig.size()) + "cameras";
  if (n_frames == 0) return series;

  // (1) match and triangulate at the first frame.
  std::vector<StereoTracks> tracks;
  std::size_t total = 0;
  for (const StereoPair& pair : pairs) {
    tracks.push_back(
        triangulate_pair(frames.frames[0], rig, Pose::identity(), pair, config.epipolar_threshold));
    total += tracks.back().size();
  }
  if (total < 4) {
    throw Error(ErrorCode::InsufficientFeatures,
                std::to_string(total) + " validated stereo matches at the first frame");
  }

  auto frame_diag = [&](std::size_t j) {
    FrameDiagnostics d;
    d.frame = j;
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      d.feature_counts.push_back(count_active(tracks[p], frames.frames[j], pairs[p]));
    }
    return d;
  };

  series.poses.push_back(Pose::identity());
  series.diagnostics.push_back(frame_diag(0));
  if (n_frames == 1) return series;

  // (2) Lowe's method at the second frame seeds the filter.
  {
    std::vector<RigMatch> matches;
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      for (const auto& [id, M] : tracks[p]) {
        for (std::size_t k : {pairs[p].cam_a, pairs[p].cam_b}) {
          if (const Observation* o = find_observation(frames.frames[1][k], id)) {
            matches.push_back({k, M, o->pixel});
          }
        }
      }
    }
    series.poses.push_back(lowe_pose_rig(matches, rig, Pose::identity()));
    series.diagnostics.push_back(frame_diag(1));
  }

  // (3)-(4) recursive pose EKF.
  PoseFilterState state = PoseFilterState::initial(
      series.poses[1], series.poses[1].vector() - series.poses[0].vector(), tuning);

  for (std::size_t j = 2; j < n_frames; ++j) {
    const std::vector<CameraFrame>& frame = frames.frames[j];
    FrameDiagnostics diag;
    diag.frame = j;

    // (5) refresh depleted pairs from the previous frame and its estimate.
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      if (count_active(tracks[p], frame, pairs[p]) < config.min_features) {
        tracks[p] = triangulate_pair(frames.frames[j - 1], rig, series.poses[j - 1], pairs[p],
                                     config.epipolar_threshold);
        diag.refreshed.push_back(p);
      }
      diag.feature_counts.push_back(count_active(tracks[p], frame, pairs[p]));
    }

    state = pose_predict(state);
    const Pose predicted = state.pose();
    MeasurementBatch batch;
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      for (const auto& [id, M] : tracks[p]) {
        for (std::size_t k : {pairs[p].cam_a, pairs[p].cam_b}) {
          const Observation* o = find_observation(frame[k], id);
          if (o != nullptr && in_front(predicted, rig, k, M)) batch.push_back({k, id, o->pixel, M});
        }
      }
    }
    if (!batch.empty()) {
      UpdateDiagnostics ud;
      state = pose_update(state, batch, rig, &ud);
      diag.updated = true;
      diag.nis = ud.nis;
      diag.nis_dof = ud.dof;
    }
    series.poses.push_back(state.pose());
    series.diagnostics.push_back(std::move(diag));
  }
  return series;
}

// ---------------------------------------------------------------------------
// Non-overlapping layout

namespace {

using MonoTracks = std::map<int, StructureFilterState>;

struct MonoChainOutput {
  std::vector<Pose> local;  // camera pose in its own initial frame
  std::vector<std::size_t> counts;
  std::vector<bool> redetected;
  std::vector<bool> updated;
  std::vector<double> nis;
  std::vector<std::size_t> nis_dof;
};

// Seeds a track for every observation in `frame` and folds that observation
// into its structure filter.
MonoTracks seed_tracks(const CameraFrame& frame, const Pose& pose, const CameraRig& local_rig,
                       const EkfTuning& tuning, double z0, const TrueStructure* truth,
                       const Camera& mount) {
  MonoTracks tracks;
  const double r_var = tuning.r_px * tuning.r_px;
  for (const Observation& o : frame) {
    StructureFilterState s = orthographic_init(o.pixel, pose, local_rig, 0, z0, tuning);
    if (truth != nullptr) {
      const auto it = truth->find(o.feature);
      if (it == truth->end()) continue;
      s.m = mount.R.transpose() * (it->second - mount.D);
      s.P.setZero();
    }
    try {
      tracks.emplace(o.feature, structure_update(s, o.pixel, pose, local_rig, 0, r_var));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::BehindCamera) throw;
    }
  }
  return tracks;
}

// Folds the frame's observations into the structure filters at `pose` and
// drops tracks that were not observed.
void refine_and_prune(MonoTracks& tracks, const CameraFrame& frame, const Pose& pose,
                      const CameraRig& local_rig, double r_var) {
  for (auto it = tracks.begin(); it != tracks.end();) {
    const Observation* o = find_observation(frame, it->first);
    bool keep = o != nullptr;
    if (keep) {
      try {
        it->second = structure_update(it->second, o->pixel, pose, local_rig, 0, r_var);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::BehindCamera) throw;
        keep = false;
      }
    }
    it = keep ? std::next(it) : tracks.erase(it);
  }
}

std::size_t count_active(const MonoTracks& tracks, const CameraFrame& frame) {
  std::size_t n = 0;
  for (const auto& [id, s] : tracks) {
    if (find_observation(frame, id)) ++n;
  }
  return n;
}

MonoChainOutput run_mono_chain(const ObservationStream& frames, std::size_t k,
                               const CameraRig& rig, const EkfTuning& tuning,
                               const PipelineConfig& config, const TrueStructure* truth) {
  const Camera& mount = rig.camera(k);
  const CameraRig local_rig = CameraRig::single(mount.intrinsics);
  const double r_var = tuning.r_px * tuning.r_px;
  const std::size_t n_frames = frames.n_frames();
  auto obs = [&](std::size_t j) -> const CameraFrame& { return frames.frames[j][k]; };

  MonoChainOutput out;
  auto record = [&](const Pose& pose, std::size_t count, bool redetected, bool updated,
                    double nis, std::size_t dof) {
    out.local.push_back(pose);
    out.counts.push_back(count);
    out.redetected.push_back(redetected);
    out.updated.push_back(updated);
    out.nis.push_back(nis);
    out.nis_dof.push_back(dof);
  };
  const double nan = std::numeric_limits<double>::quiet_NaN();

  // (1) orthographic seeds at the first frame.
  MonoTracks tracks =
      seed_tracks(obs(0), Pose::identity(), local_rig, tuning, config.z0, truth, mount);
  record(Pose::identity(), tracks.size(), false, false, nan, 0);
  if (n_frames == 1) return out;

  // (2) Lowe's method on the second frame.
  {
    std::vector<Match> matches;
    for (const auto& [id, s] : tracks) {
      if (const Observation* o = find_observation(obs(1), id)) matches.push_back({s.m, o->pixel});
    }
    const Pose pose = lowe_pose(matches, mount.intrinsics, Pose::identity());
    refine_and_prune(tracks, obs(1), pose, local_rig, r_var);
    record(pose, tracks.size(), false, false, nan, 0);
  }

  // (3)-(4) pose EKF with per-feature structure filters.
  PoseFilterState state =
      PoseFilterState::initial(out.local[1], out.local[1].vector() - out.local[0].vector(), tuning);
  for (std::size_t j = 2; j < n_frames; ++j) {
    bool redetected = false;
    // (5) re-detect from the previous frame when tracks run low.
    if (count_active(tracks, obs(j)) < config.min_features) {
      tracks = seed_tracks(obs(j - 1), out.local[j - 1], local_rig, tuning, config.z0, truth, mount);
      redetected = true;
    }
    state = pose_predict(state);
    const Pose predicted = state.pose();
    MeasurementBatch batch;
    for (const auto& [id, s] : tracks) {
      const Observation* o = find_observation(obs(j), id);
      if (o != nullptr && in_front(predicted, local_rig, 0, s.m)) {
        batch.push_back({0, id, o->pixel, s.m});
      }
    }
    UpdateDiagnostics ud;
    const bool updated = !batch.empty();
    if (updated) state = pose_update(state, batch, local_rig, &ud);
    const Pose pose = state.pose();
    refine_and_prune(tracks, obs(j), pose, local_rig, r_var);
    record(pose, batch.size(), redetected, updated, updated ? ud.nis : nan, ud.dof);
  }
  return out;
}

}  // namespace

std::vector<const PoseEstimateSeries*> NonOverlapResult::all() const {
  return {&cameras[0], &cameras[1], &cameras[2], &cameras[3], &rc};
}

NonOverlapResult run_nonoverlap_sequence(const ObservationStream& frames, const CameraRig& rig,
                                         const EkfTuning& tuning, const PipelineConfig& config,
                                         const TrueStructure* true_structure) {
  if (rig.size() != 4) {
    throw Error(ErrorCode::WrongCameraCount, "non-overlapping layout needs 4 cameras");
  }
  check_stream(frames, rig);
  const std::size_t n_frames = frames.n_frames();

  std::array<MonoChainOutput, 4> chains;
  for (std::size_t k = 0; k < 4; ++k) {
    chains[k] = run_mono_chain(frames, k, rig, tuning, config, true_structure);
  }

  NonOverlapResult result;
  for (std::size_t k = 0; k < 4; ++k) {
    PoseEstimateSeries& s = result.cameras[k];
    s.method = "cam" + std::to_string(k + 1);
    for (std::size_t j = 0; j < n_frames; ++j) {
      s.poses.push_back(rig_pose_from_camera({k, chains[k].local[j].t,
                                              chains[k].local[j].rotation(), true},
                                             rig));
      FrameDiagnostics d;
      d.frame = j;
      d.feature_counts = {chains[k].counts[j]};
      if (chains[k].redetected[j]) d.refreshed = {k};
      d.updated = chains[k].updated[j];
      d.nis = chains[k].nis[j];
      d.nis_dof = chains[k].nis_dof[j];
      s.diagnostics.push_back(std::move(d));
    }
  }

  result.rc.method = "RC";
  Vec4 scales = Vec4::Ones();
  for (std::size_t j = 0; j < n_frames; ++j) {
    std::array<CameraLocalPose, 4> locals;
    FrameDiagnostics d;
    d.frame = j;
    for (std::size_t k = 0; k < 4; ++k) {
      locals[k] = {k, chains[k].local[j].t, chains[k].local[j].rotation(), true};
      d.feature_counts.push_back(chains[k].counts[j]);
      if (chains[k].redetected[j]) d.refreshed.push_back(k);
    }
    const FusedPose fused = fuse_pose(locals, rig, scales);
    scales = fused.scales;
    d.fused = true;
    d.scales = fused.scales;
    d.scale_fallback = fused.fallback;
    d.condition = fused.condition;
    result.rc.poses.push_back(fused.pose);
    result.rc.diagnostics.push_back(std::move(d));
  }
  return result;
}

ErrorRow pose_error_report(const std::vector<Pose>& estimate, const std::vector<Pose>& truth,
                           std::size_t skip_frames) {
  if (estimate.size() != truth.size()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(estimate.size()) + " estimates vs " +
                                               std::to_string(truth.size()) + " truth frames");
  }
  ErrorRow row{};
  if (estimate.size() <= skip_frames) return row;
  for (std::size_t j = skip_frames; j < estimate.size(); ++j) {
    const Vec6 diff = (estimate[j].vector() - truth[j].vector()).cwiseAbs();
    for (int i = 0; i < 6; ++i) row[static_cast<std::size_t>(i)] += diff[i];
  }
  const double n = static_cast<double>(estimate.size() - skip_frames);
  for (double& v : row) v /= n;
  return row;
}

}  // namespace mcpose
