#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mcpose/ekf.hpp"
#include "mcpose/geometry.hpp"
#include "mcpose/pipeline.hpp"
#include "mcpose/simulate.hpp"

namespace mcpose {

enum class Method { FourCameras, TwoCameras, Cam1, Cam2, Cam3, Cam4, RC };

inline constexpr std::array<Method, 7> kAllMethods = {
    Method::FourCameras, Method::TwoCameras, Method::Cam1, Method::Cam2,
    Method::Cam3,        Method::Cam4,       Method::RC};

std::string_view method_name(Method method) noexcept;
Method method_from_name(std::string_view name);
// Comma-separated list such as "4cameras,cam1,RC".
std::vector<Method> parse_methods(std::string_view list);

// Two back-to-back stereo pairs with 0.1 m baselines: front pair looking +z,
// back pair looking -z, 0.1 m behind.
CameraRig default_overlapping_rig(const Intrinsics& intrinsics = {});

// Four cameras looking +z, +x, -z, -x. Each is 0.1 m from camera 1 and the
// axes through the back-to-back pairs cross at right angles.
CameraRig default_nonoverlapping_rig(const Intrinsics& intrinsics = {});

struct ExperimentConfig {
  SimConfig sim;
  CameraRig rig_overlap = default_overlapping_rig();
  CameraRig rig_nonoverlap = default_nonoverlapping_rig();
  EkfTuning tuning;
  PipelineConfig pipeline;
  std::vector<Method> methods{kAllMethods.begin(), kAllMethods.end()};
  // Seed single-camera structure at the true positions.
  bool ideal_init = false;
  // Cameras that must see this many points at frame 0 for a run to count.
  std::size_t min_visible = 100;

  void validate() const;
};

// Desk-scale defaults: 50 runs of 100 frames over 2,000 points.
ExperimentConfig desk_scale_config();

enum class Execution { Serial, Parallel };

struct TrialResult {
  std::size_t run = 0;
  bool valid = false;
  std::string failure;
  std::vector<ErrorRow> errors;  // one per requested method, same order
};

struct ExperimentReport {
  std::vector<Method> methods;
  std::vector<ErrorRow> rows;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::size_t runs = 0;
  std::size_t valid_runs = 0;
  std::size_t frames = 0;
  double wall_seconds = 0.0;
  std::vector<std::string> failures;  // "run N: reason"

  const ErrorRow& row(Method method) const;
};

// Everything one Monte Carlo run produces: the shared scene and trajectory,
// the rendered streams for both rigs, and every requested estimate.
struct TrialData {
  std::vector<ScenePoint> scene;
  Trajectory truth;
  ObservationStream overlap;     // rig_overlap cameras
  ObservationStream nonoverlap;  // rig_nonoverlap cameras
};

TrialData simulate_trial(const ExperimentConfig& cfg, std::size_t run);
TrialResult run_trial(const ExperimentConfig& cfg, std::size_t run);

// Serial reference: runs trials in index order on the calling thread.
ExperimentReport monte_carlo_serial(const ExperimentConfig& cfg);
// OpenMP work-sharing over runs; the reduction is ordered by run index, so
// the report equals the serial one for any thread count.
ExperimentReport monte_carlo_parallel(const ExperimentConfig& cfg);
ExperimentReport monte_carlo(const ExperimentConfig& cfg, Execution exec = Execution::Parallel);

// Stable FNV-1a hash of the canonical JSON form of the configuration.
std::string config_hash(const ExperimentConfig& cfg);

}  // namespace mcpose
