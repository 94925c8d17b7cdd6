#include "mcpose/simulate.hpp"

#include <string>

#include "mcpose/error.hpp"

namespace mcpose {

void SimConfig::validate() const {
  if (!(shell_inner > 0.0 && shell_inner < shell_outer)) {
    throw Error(ErrorCode::InvalidArgument, "need 0 < shell_inner < shell_outer");
  }
  if (!(trans_min >= 0.0 && trans_min <= trans_max)) {
    throw Error(ErrorCode::InvalidArgument, "need 0 <= trans_min <= trans_max");
  }
  if (!(rot_min >= 0.0 && rot_min <= rot_max)) {
    throw Error(ErrorCode::InvalidArgument, "need 0 <= rot_min <= rot_max");
  }
  if (!(noise_sigma >= 0.0)) throw Error(ErrorCode::InvalidArgument, "noise_sigma must be >= 0");
  if (n_frames < 1) throw Error(ErrorCode::InvalidArgument, "n_frames must be >= 1");
}

std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng derive_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = mix64(seed);
  for (std::uint64_t key : keys) h = mix64(h ^ mix64(key + 0x632be59bd9b4e019ULL));
  std::seed_seq seq{static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
  return Rng(seq);
}

ObservationStream ObservationStream::select(const std::vector<std::size_t>& cameras) const {
  ObservationStream out;
  out.n_cameras = cameras.size();
  out.frames.reserve(frames.size());
  for (const auto& frame : frames) {
    std::vector<CameraFrame> picked;
    picked.reserve(cameras.size());
    for (std::size_t k : cameras) {
      if (k >= frame.size()) {
        throw Error(ErrorCode::InvalidCameraIndex, "stream has no camera " + std::to_string(k));
      }
      picked.push_back(frame[k]);
    }
    out.frames.push_back(std::move(picked));
  }
  return out;
}

std::vector<ScenePoint> gen_scene(const SimConfig& cfg, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> radius(cfg.shell_inner, cfg.shell_outer);
  std::vector<ScenePoint> scene;
  scene.reserve(cfg.n_points);
  for (std::size_t i = 0; i < cfg.n_points; ++i) {
    Vec3 dir;
    do {
      dir = Vec3(gauss(rng), gauss(rng), gauss(rng));
    } while (dir.norm() < 1e-12);
    scene.push_back({static_cast<int>(i), radius(rng) * dir.normalized()});
  }
  return scene;
}

Pose compose(const Pose& pose, const Pose& delta) {
  const Mat3 R = pose.rotation();
  return Pose::from_rotation(pose.t + R * delta.t, R * delta.rotation());
}

Trajectory gen_trajectory(const SimConfig& cfg, Rng& rng) {
  std::uniform_real_distribution<double> trans(cfg.trans_min, cfg.trans_max);
  std::uniform_real_distribution<double> rot(cfg.rot_min, cfg.rot_max);
  std::bernoulli_distribution flip(0.5);
  auto signed_draw = [&](auto& dist) {
    const double magnitude = dist(rng);
    return flip(rng) ? -magnitude : magnitude;
  };

  Trajectory traj;
  traj.poses.push_back(Pose::identity());
  traj.deltas.push_back(Pose::identity());
  for (std::size_t j = 1; j < cfg.n_frames; ++j) {
    Pose delta;
    for (int i = 0; i < 3; ++i) delta.t[i] = signed_draw(trans);
    for (int i = 0; i < 3; ++i) delta.angles[i] = signed_draw(rot);
    traj.deltas.push_back(delta);
    traj.poses.push_back(compose(traj.poses.back(), delta));
  }
  return traj;
}

std::vector<CameraFrame> render_frame(const std::vector<ScenePoint>& scene, const Pose& pose,
                                      const CameraRig& rig, const SimConfig& cfg,
                                      std::uint64_t frame_seed) {
  std::vector<CameraFrame> frames(rig.size());
  const Mat3 R = pose.rotation();
  for (std::size_t k = 0; k < rig.size(); ++k) {
    Rng rng = derive_rng(frame_seed, {k});
    std::normal_distribution<double> noise(0.0, 1.0);
    const Camera& cam = rig.camera(k);
    const Mat3 to_cam = (R * cam.R).transpose();
    const Vec3 center = pose.t + R * cam.D;
    for (const ScenePoint& p : scene) {
      const Vec3 P = to_cam * (p.M - center);
      if (!(P.z() > kMinDepth)) continue;
      const Vec2 uv = project(P, cam.intrinsics);
      if (!cam.intrinsics.contains(uv)) continue;
      Vec2 observed = uv;
      if (cfg.noise_sigma > 0.0) {
        observed.x() += cfg.noise_sigma * noise(rng);
        observed.y() += cfg.noise_sigma * noise(rng);
      }
      frames[k].push_back({p.id, observed});
    }
  }
  return frames;
}

ObservationStream render_sequence(const std::vector<ScenePoint>& scene, const Trajectory& traj,
                                  const CameraRig& rig, const SimConfig& cfg, std::uint64_t seed) {
  ObservationStream stream;
  stream.n_cameras = rig.size();
  stream.frames.reserve(traj.poses.size());
  for (std::size_t j = 0; j < traj.poses.size(); ++j) {
    stream.frames.push_back(render_frame(scene, traj.poses[j], rig, cfg, mix64(seed ^ mix64(j))));
  }
  return stream;
}

}  // namespace mcpose
