#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "mcpose/geometry.hpp"
#include "mcpose/harness.hpp"
#include "mcpose/pipeline.hpp"
#include "mcpose/simulate.hpp"

namespace mcpose {

using nlohmann::json;

// Shortest decimal form that parses back to the same double.
std::string format_double(double value);
double parse_double(std::string_view text, std::string_view context);

// Rig file:
//   { "cameras": [ { "D": [x,y,z], "R_angles": [a,b,g], "fx", "fy", "cx", "cy",
//                    "width", "height" } ], "layout": "overlapping" }
json rig_to_json(const CameraRig& rig);
CameraRig rig_from_json(const json& j);
CameraRig load_rig(const std::string& path);
void save_rig(const std::string& path, const CameraRig& rig);

// Angles for any rotation, including the gimbal-locked mounts of sideways
// cameras (gamma is set to zero there).
Vec3 mount_angles(const Mat3& R);

// Harness config: { "sim": {...}, "rigs": { "overlapping": rig,
// "non_overlapping": rig }, "tuning": {...}, "pipeline": {...} }. Every field
// is optional and defaults to `base`.
ExperimentConfig config_from_json(const json& j, ExperimentConfig base = desk_scale_config());
json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::string& path, ExperimentConfig base = desk_scale_config());

// Tracks CSV with header `cam,frame,feature,u,v`, 0-based camera and frame
// indices. Observations are sorted by feature id on read.
void write_tracks(std::ostream& out, const ObservationStream& stream);
ObservationStream read_tracks(std::istream& in, std::size_t n_cameras,
                              std::string_view source = "tracks");

// Poses CSV with header `frame,tx,ty,tz,alpha,beta,gamma,method`.
void write_poses(std::ostream& out, const std::vector<const PoseEstimateSeries*>& series);
// Poses by method. A file without the method column yields one entry keyed
// "truth".
std::map<std::string, std::vector<Pose>> read_poses(std::istream& in,
                                                    std::string_view source = "poses");

// Report CSV with header `method,tx,ty,tz,alpha,beta,gamma`.
void write_report_csv(std::ostream& out, const ExperimentReport& report);
std::vector<std::pair<std::string, ErrorRow>> read_report_csv(std::istream& in,
                                                              std::string_view source = "report");
json report_to_json(const ExperimentReport& report);

// One JSON object per frame and series.
void write_diagnostics(std::ostream& out, const std::vector<const PoseEstimateSeries*>& series);

}  // namespace mcpose
