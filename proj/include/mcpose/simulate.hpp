#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

#include "mcpose/geometry.hpp"

namespace mcpose {

struct SimConfig {
  std::size_t n_points = 10000;
  double shell_inner = 0.667;
  double shell_outer = 1.0;
  double trans_min = 0.005;
  double trans_max = 0.015;
  double rot_min = 0.005;
  double rot_max = 0.02;
  double noise_sigma = 0.5;
  std::size_t n_frames = 100;
  std::size_t n_runs = 1500;
  std::uint64_t seed = 1;

  void validate() const;
};

using Rng = std::mt19937_64;

// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

// Independent generator for one (seed, key...) tuple, e.g. (seed, run, camera,
// frame). Streams never depend on execution order.
Rng derive_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> keys);

struct Trajectory {
  std::vector<Pose> poses;   // cumulative, world frame; poses[0] is identity
  std::vector<Pose> deltas;  // body-frame increments; deltas[0] is identity
};

struct Observation {
  int feature = 0;
  Vec2 pixel = Vec2::Zero();
};

using CameraFrame = std::vector<Observation>;

// frames[j][k]: observations of camera k at frame j, sorted by feature id.
struct ObservationStream {
  std::size_t n_cameras = 0;
  std::vector<std::vector<CameraFrame>> frames;

  std::size_t n_frames() const noexcept { return frames.size(); }
  // Stream restricted to the given cameras, in the given order.
  ObservationStream select(const std::vector<std::size_t>& cameras) const;
};

std::vector<ScenePoint> gen_scene(const SimConfig& cfg, Rng& rng);

// Body-frame random walk: each delta component has magnitude uniform in the
// configured band and an independent random sign. R_j = R_{j-1} dR_j and
// d_j = d_{j-1} + R_{j-1} dt_j.
Trajectory gen_trajectory(const SimConfig& cfg, Rng& rng);

// Composition of one body-frame increment onto a pose.
Pose compose(const Pose& pose, const Pose& delta);

// Exact projections plus N(0, noise_sigma^2) pixel noise for every point in
// front of and inside each camera. Camera k draws from derive_rng(frame_seed,
// {k}).
std::vector<CameraFrame> render_frame(const std::vector<ScenePoint>& scene, const Pose& pose,
                                      const CameraRig& rig, const SimConfig& cfg,
                                      std::uint64_t frame_seed);

// All frames of a trajectory. Frame j uses frame_seed = mix64(seed ^ mix64(j)).
ObservationStream render_sequence(const std::vector<ScenePoint>& scene, const Trajectory& traj,
                                  const CameraRig& rig, const SimConfig& cfg, std::uint64_t seed);

}  // namespace mcpose
