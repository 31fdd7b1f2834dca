#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "windtree/config.hpp"
#include "windtree/io.hpp"
#include "windtree/runs.hpp"

using namespace windtree;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;
constexpr int kExitCheck = 4;

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::ParseError:
    case ErrorKind::ValidationError:
    case ErrorKind::NotAdmissible:
    case ErrorKind::DegenerateAngle:
    case ErrorKind::DegenerateLattice:
    case ErrorKind::StartInsideObstacle:
      return kExitValidation;
    default:
      return kExitRuntime;
  }
}

std::string out_path(const RunConfig& cfg, const std::string& name) {
  return (std::filesystem::path(cfg.output_dir) / name).string();
}

double stride_for(const RunConfig& cfg) {
  return cfg.checkpoint_stride > 0.0 ? cfg.checkpoint_stride : cfg.params.lattice_scale();
}

std::vector<Vec2> event_path(const TrajectoryRecord& rec) {
  std::vector<Vec2> p{rec.start};
  for (const auto& e : rec.events) p.push_back(e.point);
  return p;
}

int cmd_trace_plane(const RunConfig& cfg) {
  const Vec2 start = resolve_start(cfg);
  const TrajectoryRecord rec = trace_plane(cfg.params, start, !cfg.down, cfg.max_events, stride_for(cfg));
  write_trajectory_csv(out_path(cfg, "trajectory.csv"), rec);
  write_svg(out_path(cfg, "plot.svg"), {cfg.params, event_path(rec), std::nullopt});
  json j = stamp(cfg.params);
  j["start"] = vec_json(start);
  j["obstacle_visits"] = rec.obstacle_visits;
  j["arclength"] = rec.arclength;
  j["final_pos"] = vec_json(rec.final_pos);
  j["stop"] = to_string(rec.stop);
  std::cout << j.dump(2) << '\n';
  return kExitOk;
}

int cmd_trace_surface(const RunConfig& cfg) {
  const Vec2 start = resolve_start(cfg);
  const SlitTorus torus = build_torus(cfg.params, cfg.epsilon);
  const SurfaceRecord rec = trace_surface(torus, start, !cfg.down, cfg.max_events, stride_for(cfg));
  write_trajectory_csv(out_path(cfg, "trajectory.csv"), rec);
  write_json(out_path(cfg, "surface.json"), surface_json(torus, cfg.epsilon));
  write_svg(out_path(cfg, "plot.svg"), {cfg.params, event_path(rec), std::nullopt});
  json j = stamp(cfg.params);
  j["start"] = vec_json(start);
  j["slit_crossings"] = rec.obstacle_visits;
  j["time"] = rec.arclength;
  j["crossings"] = {rec.crossings.n1, rec.crossings.n2};
  j["stop"] = to_string(rec.stop);
  std::cout << j.dump(2) << '\n';
  return kExitOk;
}

int cmd_compare(const RunConfig& cfg) {
  const json j = run_compare(cfg);
  write_json(out_path(cfg, "report.json"), j);
  std::cout << j.dump(2) << '\n';
  return kExitOk;
}

int cmd_renorm(const RunConfig& cfg) {
  const SlitTorus torus = build_torus(cfg.params, cfg.epsilon);
  write_json(out_path(cfg, "surface.json"), surface_json(torus, cfg.epsilon));
  RenormOptions ro;
  ro.steps = cfg.renorm_steps;
  ro.keep_levels = false;
  const RenormRun run = run_renorm(torus, ro);
  write_renorm_jsonl(out_path(cfg, "renorm.jsonl"), cfg.params, run.log);
  const LyapunovEstimate est = lyapunov_estimate(run.acc);
  const StripPrediction pred = predict_strip(to_params_coords(torus, est.contracted_dir), cfg.params);
  json j = stamp(cfg.params);
  j["steps"] = run.log.size();
  j["time"] = run.acc.time();
  j["theta_top"] = est.theta_top;
  j["theta_bottom"] = est.theta_bottom;
  j["contracted_dir"] = {est.contracted_dir[0], est.contracted_dir[1]};
  j["Theta_predicted"] = pred.Theta;
  j["direction_drift_deg"] = direction_drift_deg(run.acc);
  try {
    const HalvesEstimate h = two_half_estimate(run.acc);
    j["halves"] = {{"theta_first", h.theta_first}, {"theta_second", h.theta_second}, {"stderr_diff", h.stderr_diff}};
  } catch (const Error& e) {
    j["halves"] = {{"error", e.what()}};
  }
  j["K"] = run.K;
  write_json(out_path(cfg, "report.json"), j);
  std::cout << j.dump(2) << '\n';
  return kExitOk;
}

int cmd_analyze(const RunConfig& cfg) {
  const Vec2 start = resolve_start(cfg);
  AnalyzeOptions opt = analyze_options(cfg);
  opt.keep_path = true;
  const AnalysisResult r = analyze(cfg.params, start, !cfg.down, opt);
  const json j = analysis_json(r);
  write_json(out_path(cfg, "report.json"), j);
  write_svg(out_path(cfg, "plot.svg"), {cfg.params, r.path, SvgBand{r.Theta_fit, r.center_offset, r.width}});
  std::cout << j.dump(2) << '\n';
  if (cfg.check && !analysis_check(r)) {
    std::cerr << "check failed\n";
    return kExitCheck;
  }
  return kExitOk;
}

int cmd_sweep(const RunConfig& cfg) {
  const json j = run_sweep(cfg);
  write_json(out_path(cfg, "report.json"), j);
  json summary = j;
  summary.erase("per_sample");
  std::cout << summary.dump(2) << '\n';
  return kExitOk;
}

std::string read_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorKind::IoError, "cannot read " + path);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wind-tree tiling billiards simulator"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1, 1);

  // Flags are applied after the config file.
  struct Flags {
    std::string config;
    bool down = false, check = false;
  } flags;
  const std::vector<std::pair<std::string, std::string>> valued = {
      {"a", "Rectangle side a"},
      {"b", "Rectangle side b"},
      {"theta", "Tilt angle in radians, in (0, pi/2)"},
      {"e1", "First lattice vector x,y"},
      {"e2", "Second lattice vector x,y"},
      {"start", "Start point x,y (default: drawn from the seed)"},
      {"events", "Maximum number of obstacle visits"},
      {"stride", "Checkpoint stride in arclength (0: one lattice scale)"},
      {"seed", "Random seed"},
      {"epsilon", "O_eps parameter"},
      {"out", "Output directory"},
      {"samples", "Sweep sample count"},
      {"threads", "Sweep worker threads (0: all cores)"},
      {"steps", "Renormalization steps"},
      {"range_r", "Sweep range of lattice vector lengths lo,hi"},
      {"range_side", "Sweep range of rectangle sides lo,hi"},
      {"range_theta", "Sweep range of theta lo,hi"},
      {"range_arg1", "Sweep range of arg(e1) lo,hi"},
      {"range_arg2", "Sweep range of arg(e2) lo,hi"}};
  std::vector<std::string> slots(valued.size());

  for (const char* name : {"trace-plane", "trace-surface", "compare", "renorm", "analyze", "sweep"}) {
    CLI::App* sub = app.add_subcommand(name, std::string("Run ") + name);
    sub->add_option("--config", flags.config, "Config file (key = value lines)");
    for (std::size_t i = 0; i < valued.size(); ++i)
      sub->add_option("--" + valued[i].first, slots[i], valued[i].second)->allow_extra_args(false);
    sub->add_flag("--down", flags.down, "Start downward");
    if (std::string(name) == "analyze") sub->add_flag("--check", flags.check, "Exit with 4 if the checks fail");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  CLI::App* sub = app.get_subcommands().front();
  try {
    RunConfig cfg;
    cfg.mode = parse_mode(sub->get_name());
    if (!flags.config.empty()) apply_config_text(cfg, read_file(flags.config), flags.config);
    for (std::size_t i = 0; i < valued.size(); ++i)
      if (sub->count("--" + valued[i].first) > 0) apply_setting(cfg, valued[i].first, slots[i], "--" + valued[i].first);
    if (sub->count("--down") > 0) cfg.down = flags.down;
    if (sub->get_name() == "analyze" && sub->count("--check") > 0) cfg.check = flags.check;
    validate_config(cfg);
    std::filesystem::create_directories(cfg.output_dir);
    switch (cfg.mode) {
      case Mode::TracePlane: return cmd_trace_plane(cfg);
      case Mode::TraceSurface: return cmd_trace_surface(cfg);
      case Mode::Compare: return cmd_compare(cfg);
      case Mode::Renorm: return cmd_renorm(cfg);
      case Mode::Analyze: return cmd_analyze(cfg);
      case Mode::Sweep: return cmd_sweep(cfg);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: IoError: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitRuntime;
}
