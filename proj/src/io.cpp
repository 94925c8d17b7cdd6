#include "mcpose/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "mcpose/error.hpp"

namespace mcpose {

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text, std::string_view context) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) {
    text.remove_suffix(1);
  }
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw Error(ErrorCode::ParseError,
                std::string(context) + ": not a number '" + std::string(text) + "'");
  }
  return value;
}

namespace {

long parse_index(std::string_view text, std::string_view context) {
  const double v = parse_double(text, context);
  if (v < 0.0 || v != std::floor(v) || v > 1e9) {
    throw Error(ErrorCode::ParseError,
                std::string(context) + ": expected a non-negative integer, got '" +
                    std::string(text) + "'");
  }
  return static_cast<long>(v);
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  while (true) {
    const std::size_t comma = line.find(',');
    out.push_back(line.substr(0, comma));
    if (comma == std::string_view::npos) break;
    line.remove_prefix(comma + 1);
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string where(std::string_view source, std::size_t line) {
  return std::string(source) + ":" + std::to_string(line);
}

Vec3 vec3_from_json(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_array() || j.at(key).size() != 3) {
    throw Error(ErrorCode::ParseError, std::string("'") + key + "' must be an array of 3 numbers");
  }
  const json& a = j.at(key);
  return {a.at(0).get<double>(), a.at(1).get<double>(), a.at(2).get<double>()};
}

template <typename T>
void read_opt(const json& j, const char* key, T& value) {
  if (j.contains(key)) value = j.at(key).get<T>();
}

}  // namespace

Vec3 mount_angles(const Mat3& R) {
  const double cos_beta = std::hypot(R(0, 0), R(0, 1));
  if (cos_beta < 1e-6) {
    // Gimbal lock: only alpha + gamma (or alpha - gamma) is defined.
    return {std::atan2(R(2, 1), R(1, 1)), std::atan2(R(0, 2), cos_beta), 0.0};
  }
  return angles_from_rot(R);
}

json rig_to_json(const CameraRig& rig) {
  json cams = json::array();
  for (const Camera& c : rig.cameras()) {
    const Vec3 a = mount_angles(c.R);
    cams.push_back({{"D", {c.D.x(), c.D.y(), c.D.z()}},
                    {"R_angles", {a.x(), a.y(), a.z()}},
                    {"fx", c.intrinsics.fx},
                    {"fy", c.intrinsics.fy},
                    {"cx", c.intrinsics.cx},
                    {"cy", c.intrinsics.cy},
                    {"width", c.intrinsics.width},
                    {"height", c.intrinsics.height}});
  }
  return {{"cameras", cams}, {"layout", std::string(to_string(rig.layout()))}};
}

CameraRig rig_from_json(const json& j) {
  try {
    if (!j.is_object() || !j.contains("cameras") || !j.at("cameras").is_array()) {
      throw Error(ErrorCode::ParseError, "rig needs a 'cameras' array");
    }
    const Layout layout = layout_from_string(j.value("layout", std::string("overlapping")));
    std::vector<Camera> cameras;
    for (const json& c : j.at("cameras")) {
      Camera cam;
      cam.D = c.contains("D") ? vec3_from_json(c, "D") : Vec3::Zero();
      cam.R = c.contains("R_angles") ? rot_from_angles(vec3_from_json(c, "R_angles"))
                                     : Mat3::Identity();
      read_opt(c, "fx", cam.intrinsics.fx);
      read_opt(c, "fy", cam.intrinsics.fy);
      read_opt(c, "width", cam.intrinsics.width);
      read_opt(c, "height", cam.intrinsics.height);
      cam.intrinsics.cx = cam.intrinsics.width / 2.0;
      cam.intrinsics.cy = cam.intrinsics.height / 2.0;
      read_opt(c, "cx", cam.intrinsics.cx);
      read_opt(c, "cy", cam.intrinsics.cy);
      cameras.push_back(cam);
    }
    // The reference camera is the origin by definition.
    if (!cameras.empty() && cameras.front().D.isZero(0.0) &&
        cameras.front().R.isApprox(Mat3::Identity(), 1e-15)) {
      cameras.front().R = Mat3::Identity();
    }
    return CameraRig(std::move(cameras), layout);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("rig: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::NonOrthonormalInput) {
      throw Error(ErrorCode::ParseError, std::string("rig: ") + e.what());
    }
    throw;
  }
}

namespace {

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, path + ": " + e.what());
  }
}

}  // namespace

CameraRig load_rig(const std::string& path) { return rig_from_json(read_json_file(path)); }

void save_rig(const std::string& path, const CameraRig& rig) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  out << rig_to_json(rig).dump(2) << '\n';
}

ExperimentConfig config_from_json(const json& j, ExperimentConfig cfg) {
  try {
    if (!j.is_object()) throw Error(ErrorCode::ParseError, "config must be a JSON object");
    if (j.contains("sim")) {
      const json& s = j.at("sim");
      read_opt(s, "n_points", cfg.sim.n_points);
      read_opt(s, "shell_inner", cfg.sim.shell_inner);
      read_opt(s, "shell_outer", cfg.sim.shell_outer);
      read_opt(s, "trans_min", cfg.sim.trans_min);
      read_opt(s, "trans_max", cfg.sim.trans_max);
      read_opt(s, "rot_min", cfg.sim.rot_min);
      read_opt(s, "rot_max", cfg.sim.rot_max);
      read_opt(s, "noise_sigma", cfg.sim.noise_sigma);
      read_opt(s, "n_frames", cfg.sim.n_frames);
      read_opt(s, "n_runs", cfg.sim.n_runs);
      read_opt(s, "seed", cfg.sim.seed);
    }
    if (j.contains("rigs")) {
      const json& r = j.at("rigs");
      if (r.contains("overlapping")) cfg.rig_overlap = rig_from_json(r.at("overlapping"));
      if (r.contains("non_overlapping")) cfg.rig_nonoverlap = rig_from_json(r.at("non_overlapping"));
    }
    if (j.contains("tuning")) {
      const json& t = j.at("tuning");
      read_opt(t, "q_pose", cfg.tuning.q_pose);
      read_opt(t, "q_vel", cfg.tuning.q_vel);
      read_opt(t, "r_px", cfg.tuning.r_px);
      read_opt(t, "p0_pose", cfg.tuning.p0_pose);
      read_opt(t, "p0_vel", cfg.tuning.p0_vel);
      read_opt(t, "p0_struct_lateral", cfg.tuning.p0_struct_lateral);
      read_opt(t, "p0_struct_depth", cfg.tuning.p0_struct_depth);
    }
    if (j.contains("pipeline")) {
      const json& p = j.at("pipeline");
      read_opt(p, "epipolar_threshold", cfg.pipeline.epipolar_threshold);
      read_opt(p, "min_features", cfg.pipeline.min_features);
      read_opt(p, "z0", cfg.pipeline.z0);
      read_opt(p, "ideal_init", cfg.ideal_init);
      read_opt(p, "min_visible", cfg.min_visible);
    }
    if (j.contains("methods")) {
      cfg.methods.clear();
      for (const json& m : j.at("methods")) cfg.methods.push_back(method_from_name(m.get<std::string>()));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

json config_to_json(const ExperimentConfig& cfg) {
  json methods = json::array();
  for (Method m : cfg.methods) methods.push_back(std::string(method_name(m)));
  return {
      {"sim",
       {{"n_points", cfg.sim.n_points},
        {"shell_inner", cfg.sim.shell_inner},
        {"shell_outer", cfg.sim.shell_outer},
        {"trans_min", cfg.sim.trans_min},
        {"trans_max", cfg.sim.trans_max},
        {"rot_min", cfg.sim.rot_min},
        {"rot_max", cfg.sim.rot_max},
        {"noise_sigma", cfg.sim.noise_sigma},
        {"n_frames", cfg.sim.n_frames},
        {"n_runs", cfg.sim.n_runs},
        {"seed", cfg.sim.seed}}},
      {"rigs",
       {{"overlapping", rig_to_json(cfg.rig_overlap)},
        {"non_overlapping", rig_to_json(cfg.rig_nonoverlap)}}},
      {"tuning",
       {{"q_pose", cfg.tuning.q_pose},
        {"q_vel", cfg.tuning.q_vel},
        {"r_px", cfg.tuning.r_px},
        {"p0_pose", cfg.tuning.p0_pose},
        {"p0_vel", cfg.tuning.p0_vel},
        {"p0_struct_lateral", cfg.tuning.p0_struct_lateral},
        {"p0_struct_depth", cfg.tuning.p0_struct_depth}}},
      {"pipeline",
       {{"epipolar_threshold", cfg.pipeline.epipolar_threshold},
        {"min_features", cfg.pipeline.min_features},
        {"z0", cfg.pipeline.z0},
        {"ideal_init", cfg.ideal_init},
        {"min_visible", cfg.min_visible}}},
      {"methods", methods}};
}

ExperimentConfig load_config(const std::string& path, ExperimentConfig base) {
  return config_from_json(read_json_file(path), std::move(base));
}

void write_tracks(std::ostream& out, const ObservationStream& stream) {
  out << "cam,frame,feature,u,v\n";
  for (std::size_t j = 0; j < stream.frames.size(); ++j) {
    for (std::size_t k = 0; k < stream.frames[j].size(); ++k) {
      for (const Observation& o : stream.frames[j][k]) {
        out << k << ',' << j << ',' << o.feature << ',' << format_double(o.pixel.x()) << ','
            << format_double(o.pixel.y()) << '\n';
      }
    }
  }
}

ObservationStream read_tracks(std::istream& in, std::size_t n_cameras, std::string_view source) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) {
    throw Error(ErrorCode::ParseError, where(source, 1) + ": empty tracks file");
  }
  ++line_no;
  if (trim(line) != "cam,frame,feature,u,v") {
    throw Error(ErrorCode::ParseError,
                where(source, 1) + ": expected header 'cam,frame,feature,u,v'");
  }
  ObservationStream stream;
  stream.n_cameras = n_cameras;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split(line);
    const std::string ctx = where(source, line_no);
    if (fields.size() != 5) {
      throw Error(ErrorCode::ParseError, ctx + ": expected 5 fields, got " +
                                             std::to_string(fields.size()));
    }
    const auto cam = static_cast<std::size_t>(parse_index(fields[0], ctx));
    const auto frame = static_cast<std::size_t>(parse_index(fields[1], ctx));
    const double feature = parse_double(fields[2], ctx);
    if (feature != std::floor(feature) || std::abs(feature) > 2e9) {
      throw Error(ErrorCode::ParseError, ctx + ": feature id must be an integer");
    }
    const Vec2 pixel(parse_double(fields[3], ctx), parse_double(fields[4], ctx));
    if (cam >= n_cameras) {
      throw Error(ErrorCode::ParseError,
                  ctx + ": camera " + std::to_string(cam) + " not in rig of " +
                      std::to_string(n_cameras));
    }
    if (frame >= stream.frames.size()) {
      stream.frames.resize(frame + 1, std::vector<CameraFrame>(n_cameras));
    }
    stream.frames[frame][cam].push_back({static_cast<int>(feature), pixel});
  }
  for (auto& frame : stream.frames) {
    for (CameraFrame& obs : frame) {
      std::stable_sort(obs.begin(), obs.end(),
                       [](const Observation& a, const Observation& b) { return a.feature < b.feature; });
      const auto dup = std::adjacent_find(obs.begin(), obs.end(), [](const auto& a, const auto& b) {
        return a.feature == b.feature;
      });
      if (dup != obs.end()) {
        throw Error(ErrorCode::ParseError, std::string(source) + ": feature " +
                                               std::to_string(dup->feature) +
                                               " observed twice by one camera in one frame");
      }
    }
  }
  return stream;
}

void write_poses(std::ostream& out, const std::vector<const PoseEstimateSeries*>& series) {
  out << "frame,tx,ty,tz,alpha,beta,gamma,method\n";
  for (const PoseEstimateSeries* s : series) {
    for (std::size_t j = 0; j < s->poses.size(); ++j) {
      const Vec6 v = s->poses[j].vector();
      out << j;
      for (int i = 0; i < 6; ++i) out << ',' << format_double(v[i]);
      out << ',' << s->method << '\n';
    }
  }
}

std::map<std::string, std::vector<Pose>> read_poses(std::istream& in, std::string_view source) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, where(source, 1) + ": empty file");
  const std::string_view header = trim(line);
  bool with_method = false;
  if (header == "frame,tx,ty,tz,alpha,beta,gamma,method") {
    with_method = true;
  } else if (header != "frame,tx,ty,tz,alpha,beta,gamma") {
    throw Error(ErrorCode::ParseError,
                where(source, 1) + ": expected header 'frame,tx,ty,tz,alpha,beta,gamma[,method]'");
  }
  std::map<std::string, std::vector<Pose>> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split(line);
    const std::string ctx = where(source, line_no);
    if (fields.size() != (with_method ? 8u : 7u)) {
      throw Error(ErrorCode::ParseError, ctx + ": wrong field count");
    }
    const auto frame = static_cast<std::size_t>(parse_index(fields[0], ctx));
    Vec6 v;
    for (int i = 0; i < 6; ++i) v[i] = parse_double(fields[static_cast<std::size_t>(i) + 1], ctx);
    const std::string method = with_method ? std::string(trim(fields[7])) : "truth";
    auto& poses = out[method];
    if (frame != poses.size()) {
      throw Error(ErrorCode::ParseError, ctx + ": frames of '" + method + "' must be consecutive from 0");
    }
    poses.push_back(Pose::from_vector(v));
  }
  return out;
}

void write_report_csv(std::ostream& out, const ExperimentReport& report) {
  out << "method,tx,ty,tz,alpha,beta,gamma\n";
  for (std::size_t m = 0; m < report.methods.size(); ++m) {
    out << method_name(report.methods[m]);
    for (double v : report.rows[m]) out << ',' << format_double(v);
    out << '\n';
  }
}

std::vector<std::pair<std::string, ErrorRow>> read_report_csv(std::istream& in,
                                                              std::string_view source) {
  std::string line;
  if (!std::getline(in, line) || trim(line) != "method,tx,ty,tz,alpha,beta,gamma") {
    throw Error(ErrorCode::ParseError, where(source, 1) + ": bad report header");
  }
  std::vector<std::pair<std::string, ErrorRow>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split(line);
    const std::string ctx = where(source, line_no);
    if (fields.size() != 7) throw Error(ErrorCode::ParseError, ctx + ": expected 7 fields");
    ErrorRow row{};
    for (std::size_t i = 0; i < 6; ++i) row[i] = parse_double(fields[i + 1], ctx);
    rows.emplace_back(std::string(trim(fields[0])), row);
  }
  return rows;
}

json report_to_json(const ExperimentReport& report) {
  json rows = json::array();
  static const char* kCols[] = {"tx", "ty", "tz", "alpha", "beta", "gamma"};
  for (std::size_t m = 0; m < report.methods.size(); ++m) {
    json row = {{"method", std::string(method_name(report.methods[m]))}};
    for (std::size_t i = 0; i < 6; ++i) row[kCols[i]] = report.rows[m][i];
    rows.push_back(row);
  }
  return {{"rows", rows},
          {"metadata",
           {{"config_hash", report.config_hash},
            {"seed", report.seed},
            {"runs", report.runs},
            {"valid_runs", report.valid_runs},
            {"frames", report.frames},
            {"wall_seconds", report.wall_seconds},
            {"failures", report.failures}}}};
}

void write_diagnostics(std::ostream& out, const std::vector<const PoseEstimateSeries*>& series) {
  for (const PoseEstimateSeries* s : series) {
    for (const FrameDiagnostics& d : s->diagnostics) {
      json j = {{"method", s->method},
                {"frame", d.frame},
                {"feature_counts", d.feature_counts},
                {"refreshed", d.refreshed},
                {"updated", d.updated}};
      if (d.updated && std::isfinite(d.nis)) {
        j["nis"] = d.nis;
        j["nis_dof"] = d.nis_dof;
      }
      if (d.fused) {
        j["scales"] = {d.scales[0], d.scales[1], d.scales[2], d.scales[3]};
        j["scale_fallback"] = d.scale_fallback;
        j["condition"] = std::isfinite(d.condition) ? json(d.condition) : json(nullptr);
      }
      out << j.dump() << '\n';
    }
  }
}

}  // namespace mcpose
