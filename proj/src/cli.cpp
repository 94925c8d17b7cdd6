#include "mcpose/cli.hpp"

#include <omp.h>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "mcpose/error.hpp"
#include "mcpose/harness.hpp"
#include "mcpose/io.hpp"
#include "mcpose/pipeline.hpp"
#include "mcpose/selftest.hpp"

namespace mcpose {

namespace {

struct SimulateArgs {
  std::string config;
  std::optional<std::size_t> runs, frames, points;
  std::optional<std::uint64_t> seed;
  std::string out, json_out, methods;
  int threads = 0;
  bool ideal_init = false;
  bool full_scale = false;
  bool serial = false;
};

struct RunTracksArgs {
  std::string layout, rig, tracks, out, truth, diag;
};

struct ExportArgs {
  std::string config, layout = "nonoverlap", tracks, truth, rig;
  std::optional<std::size_t> frames, points;
  std::optional<std::uint64_t> seed;
  std::size_t run = 0;
  double noise = -1.0;
};

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorCode::IoError, "cannot write " + path);
  return f;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::IoError, "cannot open " + path);
  return f;
}

ExperimentConfig build_config(const std::string& config_path, bool full_scale) {
  ExperimentConfig base = full_scale ? ExperimentConfig{} : desk_scale_config();
  return config_path.empty() ? base : load_config(config_path, base);
}

int cmd_simulate(const SimulateArgs& a, std::ostream& out, std::ostream& err) {
  ExperimentConfig cfg = build_config(a.config, a.full_scale);
  if (a.runs) cfg.sim.n_runs = *a.runs;
  if (a.frames) cfg.sim.n_frames = *a.frames;
  if (a.points) cfg.sim.n_points = *a.points;
  if (a.seed) cfg.sim.seed = *a.seed;
  if (!a.methods.empty()) cfg.methods = parse_methods(a.methods);
  if (a.ideal_init) cfg.ideal_init = true;
  cfg.validate();
  if (a.threads > 0) omp_set_num_threads(a.threads);

  const ExperimentReport report =
      monte_carlo(cfg, a.serial ? Execution::Serial : Execution::Parallel);

  if (a.out.empty()) {
    write_report_csv(out, report);
  } else {
    std::ofstream f = open_out(a.out);
    write_report_csv(f, report);
  }
  if (!a.json_out.empty()) {
    std::ofstream f = open_out(a.json_out);
    f << report_to_json(report).dump(2) << '\n';
  }
  err << "valid runs " << report.valid_runs << "/" << report.runs << ", " << report.wall_seconds
      << " s, config " << report.config_hash << '\n';
  for (const std::string& f : report.failures) err << "  " << f << '\n';
  return report.valid_runs > 0 ? kExitOk : kExitNumericalFailure;
}

int cmd_run_tracks(const RunTracksArgs& a, std::ostream& out, std::ostream& err) {
  const Layout layout = layout_from_string(a.layout);
  const CameraRig loaded = load_rig(a.rig);
  const CameraRig rig(loaded.cameras(), layout);

  std::ifstream tracks_in = open_in(a.tracks);
  const ObservationStream stream = read_tracks(tracks_in, rig.size(), a.tracks);

  std::vector<PoseEstimateSeries> owned;
  if (layout == Layout::Overlapping) {
    PipelineConfig pc;
    owned.push_back(run_stereo_sequence(stream, rig, EkfTuning{}, pc));
  } else {
    NonOverlapResult r = run_nonoverlap_sequence(stream, rig, EkfTuning{}, PipelineConfig{});
    for (PoseEstimateSeries& s : r.cameras) owned.push_back(std::move(s));
    owned.push_back(std::move(r.rc));
  }
  std::vector<const PoseEstimateSeries*> series;
  for (const PoseEstimateSeries& s : owned) series.push_back(&s);

  if (a.out.empty()) {
    write_poses(out, series);
  } else {
    std::ofstream f = open_out(a.out);
    write_poses(f, series);
  }
  if (!a.diag.empty()) {
    std::ofstream f = open_out(a.diag);
    write_diagnostics(f, series);
  }
  if (!a.truth.empty()) {
    std::ifstream truth_in = open_in(a.truth);
    const auto poses = read_poses(truth_in, a.truth);
    if (poses.size() != 1) {
      throw Error(ErrorCode::ParseError, a.truth + ": expected a single pose series");
    }
    std::ostream& table = a.out.empty() ? err : out;
    table << "method,tx,ty,tz,alpha,beta,gamma\n";
    for (const PoseEstimateSeries* s : series) {
      const ErrorRow row = pose_error_report(s->poses, poses.begin()->second);
      table << s->method;
      for (double v : row) table << ',' << format_double(v);
      table << '\n';
    }
  }
  return kExitOk;
}

int cmd_export(const ExportArgs& a, std::ostream& out) {
  ExperimentConfig cfg = build_config(a.config, false);
  if (a.frames) cfg.sim.n_frames = *a.frames;
  if (a.points) cfg.sim.n_points = *a.points;
  if (a.seed) cfg.sim.seed = *a.seed;
  if (a.noise >= 0.0) cfg.sim.noise_sigma = a.noise;
  cfg.validate();
  const Layout layout = layout_from_string(a.layout);
  const TrialData data = simulate_trial(cfg, a.run);
  const ObservationStream& stream = layout == Layout::Overlapping ? data.overlap : data.nonoverlap;
  const CameraRig& rig = layout == Layout::Overlapping ? cfg.rig_overlap : cfg.rig_nonoverlap;

  std::ofstream tracks = open_out(a.tracks);
  write_tracks(tracks, stream);
  if (!a.rig.empty()) save_rig(a.rig, rig);
  if (!a.truth.empty()) {
    PoseEstimateSeries truth{"truth", data.truth.poses, {}};
    std::ofstream f = open_out(a.truth);
    write_poses(f, {&truth});
  }
  out << "exported run " << a.run << " (" << stream.n_frames() << " frames, " << rig.size()
      << " cameras)\n";
  return kExitOk;
}

int cmd_selftest(std::ostream& out) {
  bool ok = true;
  for (const OracleResult& r : run_selftest()) {
    out << (r.pass() ? "PASS " : "FAIL ") << r.name << " residual=" << r.residual
        << " tolerance=" << r.tolerance << '\n';
    ok = ok && r.pass();
  }
  return ok ? kExitOk : kExitNumericalFailure;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-camera rig ego-motion estimation"};
  app.name("mcpose");
  app.require_subcommand(1);

  SimulateArgs sim;
  CLI::App* simulate = app.add_subcommand("simulate", "Run the Monte Carlo comparison");
  simulate->add_option("--config", sim.config, "JSON config file")->check(CLI::ExistingFile);
  simulate->add_option("--runs", sim.runs, "Number of Monte Carlo runs");
  simulate->add_option("--frames", sim.frames, "Frames per run");
  simulate->add_option("--seed", sim.seed, "Master seed");
  simulate->add_option("--out", sim.out, "Report CSV (stdout if omitted)");
  simulate->add_option("--json", sim.json_out, "Report JSON with metadata");
  simulate->add_option("--methods", sim.methods, "Comma-separated methods, e.g. 4cameras,RC");
  simulate->add_option("--points", sim.points, "Scene points per run");
  simulate->add_option("--threads", sim.threads, "OpenMP threads (0 = runtime default)");
  simulate->add_flag("--ideal-init", sim.ideal_init, "Seed single-camera structure at truth");
  simulate->add_flag("--full-scale", sim.full_scale, "Start from 1500 runs x 10000 points");
  simulate->add_flag("--serial", sim.serial, "Use the single-threaded reference driver");

  RunTracksArgs rt;
  CLI::App* run_tracks = app.add_subcommand("run-tracks", "Estimate poses from a tracks file");
  run_tracks->add_option("--layout", rt.layout, "stereo or nonoverlap")->required();
  run_tracks->add_option("--rig", rt.rig, "Rig JSON")->required();
  run_tracks->add_option("--tracks", rt.tracks, "Tracks CSV")->required();
  run_tracks->add_option("--out", rt.out, "Poses CSV (stdout if omitted)");
  run_tracks->add_option("--truth", rt.truth, "Ground-truth poses CSV for an error table");
  run_tracks->add_option("--diag", rt.diag, "Per-frame diagnostics (JSON lines)");

  ExportArgs ex;
  CLI::App* exporter = app.add_subcommand("export", "Write one simulated run as tracks, truth and rig files");
  exporter->add_option("--config", ex.config, "JSON config file")->check(CLI::ExistingFile);
  exporter->add_option("--layout", ex.layout, "stereo or nonoverlap");
  exporter->add_option("--run", ex.run, "Run index");
  exporter->add_option("--seed", ex.seed, "Master seed");
  exporter->add_option("--frames", ex.frames, "Frames");
  exporter->add_option("--points", ex.points, "Scene points");
  exporter->add_option("--noise", ex.noise, "Pixel noise sigma override");
  exporter->add_option("--tracks", ex.tracks, "Tracks CSV")->required();
  exporter->add_option("--truth", ex.truth, "Ground-truth poses CSV");
  exporter->add_option("--rig", ex.rig, "Rig JSON");

  CLI::App* selftest = app.add_subcommand("selftest", "Run the noiseless oracles");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    err << "error: " << e.what() << '\n';
    return kExitInputError;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(sim, out, err);
    if (run_tracks->parsed()) return cmd_run_tracks(rt, out, err);
    if (exporter->parsed()) return cmd_export(ex, out);
    if (selftest->parsed()) return cmd_selftest(out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return is_input_error(e.code()) ? kExitInputError : kExitNumericalFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumericalFailure;
  }
  return kExitInputError;
}

}  // namespace mcpose
