#pragma once

// Run orchestration shared by the command-line tool, sweeps and the
// acceptance harness.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "windtree/analysis.hpp"
#include "windtree/compare.hpp"
#include "windtree/config.hpp"
#include "windtree/io.hpp"
#include "windtree/renorm.hpp"
#include "windtree/sampling.hpp"
#include "windtree/slit.hpp"
#include "windtree/windtree.hpp"

namespace windtree {

/// True if p is strictly outside every obstacle, with a margin.
inline bool outside_obstacles(const SystemParams& params, Vec2 p, double margin = 0.0) {
  const ObstacleShape sh(params.a, params.b, params.theta);
  const double r = params.diameter() + margin;
  bool free = true;
  LatticeWindow(params).for_each(p.x - r, p.x + r, p.y - r, p.y + r, [&](std::int64_t, std::int64_t, Vec2 c) {
    if (sh.contains(p - c, margin)) free = false;
  });
  return free;
}

/// Uniform point of the fundamental cell outside the obstacles.
template <class Rng>
Vec2 random_start(const SystemParams& params, Rng& rng) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const double margin = 1e-6 * params.diameter();
  for (int i = 0; i < 10000; ++i) {
    const Vec2 p = U(rng) * params.e1 + U(rng) * params.e2;
    if (outside_obstacles(params, p, margin)) return p;
  }
  throw Error(ErrorKind::ValidationError, "could not place a start point outside the obstacles");
}

/// Configured start, or one drawn from the seed.
inline Vec2 resolve_start(const RunConfig& cfg) {
  if (cfg.start) return *cfg.start;
  std::mt19937_64 rng(cfg.seed);
  return random_start(cfg.params, rng);
}

// ---------------------------------------------------------------------------
// Event-point trace

/// Plane positions at the slit crossings, with their arclengths.
struct EventCloud {
  std::vector<Vec2> points;  // start first
  std::vector<double> arclength;
  std::vector<Checkpoint> checkpoints;
  StopReason stop = StopReason::MaxEvents;
  std::int64_t events = 0;
};

namespace detail {
struct CloudSink {
  EventCloud* c;
  void on_event(const TraceEvent& e) {
    c->points.push_back(e.point);
    c->arclength.push_back(e.arclength);
  }
  void on_checkpoint(const Checkpoint& k) { c->checkpoints.push_back(k); }
};
}  // namespace detail

inline EventCloud trace_cloud(const SlitTorus& torus, Vec2 start, bool up, std::int64_t events,
                              double checkpoint_stride = 0.0) {
  EventCloud c;
  c.points.reserve(std::size_t(std::min<std::int64_t>(events, 20000000)) + 1);
  c.arclength.reserve(c.points.capacity());
  c.points.push_back(start);
  c.arclength.push_back(0.0);
  SurfaceTracer tr(torus, start, up);
  detail::CloudSink sink{&c};
  while (c.events < events && tr.step(sink, checkpoint_stride)) ++c.events;
  c.stop = tr.stopped() ? tr.stop_reason() : StopReason::MaxEvents;
  return c;
}

// ---------------------------------------------------------------------------
// Trapping statistic

struct TrappingCheck {
  std::int64_t early_events = 0, late_events = 0;
  Extent early, late;
  double width_ratio = 0.0;  // late.across / early.across
  double along_ratio = 0.0;  // late.along / early.along
  bool width_saturated = false;
  bool along_grows = false;
  bool pass = false;
  bool near_degenerate = false;
  std::string degeneracy;
};

inline constexpr double kWidthSaturation = 1.05;
inline constexpr double kAlongGrowth = 3.0;

/// Extents of the first n/10 and all n event points along Theta.
inline TrappingCheck trapping_check(const EventCloud& c, double Theta) {
  TrappingCheck t;
  const std::size_t n = c.points.size();
  const std::size_t m = std::max<std::size_t>(1, (n - 1) / 10) + 1;
  t.late_events = std::int64_t(n - 1);
  t.early_events = std::int64_t(m - 1);
  t.early = extent_in_direction({c.points.begin(), c.points.begin() + std::ptrdiff_t(m)}, Theta);
  t.late = extent_in_direction(c.points, Theta);
  t.width_ratio = t.early.across > 0.0 ? t.late.across / t.early.across : std::numeric_limits<double>::infinity();
  t.along_ratio = t.early.along > 0.0 ? t.late.along / t.early.along : std::numeric_limits<double>::infinity();
  t.width_saturated = t.late.across <= kWidthSaturation * t.early.across;
  t.along_grows = t.late.along >= kAlongGrowth * t.early.along;
  t.pass = t.width_saturated && t.along_grows;
  if (c.stop != StopReason::MaxEvents) {
    t.near_degenerate = true;
    t.degeneracy = std::string("trajectory stopped: ") + to_string(c.stop);
  } else if (t.late.along < 10.0 * t.late.across) {
    t.near_degenerate = true;
    t.degeneracy = "strip not resolved: along extent below ten widths";
  }
  return t;
}

/// Points kept so that the running max of |u·(p − p0)| is reproduced exactly.
inline std::vector<std::pair<double, Vec2>> running_max_projection(const EventCloud& c, double Theta) {
  const Vec2 u{std::cos(Theta), std::sin(Theta)};
  std::vector<std::pair<double, Vec2>> out;
  if (c.points.empty()) return out;
  const double p0 = dot(u, c.points.front());
  double m = -1.0;
  for (std::size_t k = 0; k < c.points.size(); ++k) {
    const double s = dot(u, c.points[k]);
    const double d = std::fabs(s - p0);
    if (d > m || k + 1 == c.points.size()) {
      m = std::max(m, d);
      out.emplace_back(c.arclength[k], Vec2{s, 0.0});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Analyze

struct WidthPoint {
  std::int64_t events = 0;
  double arclength = 0.0;
  double across = 0.0, along = 0.0;
};

struct AnalysisResult {
  SystemParams params;
  Vec2 start;
  bool up = true;
  std::int64_t events = 0;
  StopReason stop = StopReason::MaxEvents;
  double Theta_fit = 0.0;
  double width = 0.0;
  double center_offset = 0.0;
  std::vector<WidthPoint> width_profile;
  TrappingCheck trapping;
  std::optional<double> theta_top, Theta_predicted, strip_gap_deg;
  std::optional<double> diffusion_slope, diffusion_stderr;
  std::optional<bool> audit_pass;
  std::map<std::string, std::string> errors;
  std::vector<Vec2> path;  // event points, kept when requested
};

struct AnalyzeOptions {
  std::int64_t events = 100000;
  double epsilon = 0.05;
  int renorm_steps = 120;
  std::int64_t audit_events = 100000;
  bool renorm = true;
  bool audit = true;
  bool keep_path = false;
};

inline constexpr double kStripAgreementDeg = 2.0;

inline double angle_gap_mod_pi(double a, double b) {
  double d = std::fmod(std::fabs(a - b), kPi);
  return std::min(d, kPi - d);
}

/// Traces, fits the strip and runs the renormalization and audit stages.
/// Stage failures are recorded in `errors` and leave their fields empty.
inline AnalysisResult analyze(const SystemParams& params, Vec2 start, bool up, const AnalyzeOptions& opt) {
  AnalysisResult r;
  r.params = params;
  r.start = start;
  r.up = up;
  const SlitTorus torus = build_torus(params, opt.epsilon);
  EventCloud c = trace_cloud(torus, start, up, opt.events);
  r.events = c.events;
  r.stop = c.stop;
  const StripFit f = fit_strip(c.points, c.arclength);
  r.Theta_fit = f.Theta;
  r.width = f.width;
  r.center_offset = f.center_offset;
  r.trapping = trapping_check(c, f.Theta);
  {
    const Vec2 u{std::cos(f.Theta), std::sin(f.Theta)}, z{-u.y, u.x};
    double a0 = dot(u, c.points[0]), a1 = a0, z0 = dot(z, c.points[0]), z1 = z0;
    std::int64_t next = 10;
    for (std::size_t k = 1; k < c.points.size(); ++k) {
      a0 = std::min(a0, dot(u, c.points[k]));
      a1 = std::max(a1, dot(u, c.points[k]));
      z0 = std::min(z0, dot(z, c.points[k]));
      z1 = std::max(z1, dot(z, c.points[k]));
      if (std::int64_t(k) == next || k + 1 == c.points.size()) {
        r.width_profile.push_back({std::int64_t(k), c.arclength[k], z1 - z0, a1 - a0});
        if (std::int64_t(k) == next) next *= 10;
      }
    }
  }
  try {
    const SlopeFit s = diffusion_exponent(running_max_projection(c, f.Theta));
    r.diffusion_slope = s.slope;
    r.diffusion_stderr = s.std_error;
  } catch (const Error& e) {
    r.errors["diffusion"] = e.what();
  }
  if (opt.keep_path) r.path = std::move(c.points);
  c = EventCloud{};
  if (opt.renorm) {
    try {
      RenormOptions ro;
      ro.steps = opt.renorm_steps;
      ro.keep_levels = opt.audit;
      const RenormRun run = run_renorm(torus, ro);
      const LyapunovEstimate est = lyapunov_estimate(run.acc);
      r.theta_top = est.theta_top;
      const StripPrediction pred = predict_strip(to_params_coords(torus, est.contracted_dir), params);
      r.Theta_predicted = pred.Theta;
      r.strip_gap_deg = angle_gap_mod_pi(pred.Theta, f.Theta) * 180.0 / kPi;
      if (opt.audit) {
        try {
          const auto log = trace_transversal_hits(torus, run.I, start, up, opt.audit_events);
          r.audit_pass = decomposition_audit(log, run, torus).pass;
        } catch (const Error& e) {
          r.errors["audit"] = e.what();
        }
      }
    } catch (const Error& e) {
      r.errors["renorm"] = e.what();
    }
  }
  return r;
}

/// Trapping saturation, exponent in (0, 1), strip agreement and audit.
inline bool analysis_check(const AnalysisResult& r) {
  return r.trapping.pass && r.theta_top && *r.theta_top > 0.0 && *r.theta_top < 1.0 && r.strip_gap_deg &&
         *r.strip_gap_deg <= kStripAgreementDeg && r.audit_pass.value_or(false);
}

template <class T>
json opt_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

inline json trapping_json(const TrappingCheck& t) {
  return {{"early_events", t.early_events},   {"late_events", t.late_events},
          {"width_early", t.early.across},    {"width_late", t.late.across},
          {"along_early", t.early.along},     {"along_late", t.late.along},
          {"width_ratio", t.width_ratio},     {"along_ratio", t.along_ratio},
          {"width_saturated", t.width_saturated}, {"along_grows", t.along_grows},
          {"pass", t.pass},                   {"near_degenerate", t.near_degenerate},
          {"degeneracy", t.degeneracy}};
}

inline json analysis_json(const AnalysisResult& r) {
  json j = stamp(r.params);
  j["start"] = vec_json(r.start);
  j["direction"] = r.up ? "up" : "down";
  j["events"] = r.events;
  j["stop"] = to_string(r.stop);
  j["Theta_fit"] = r.Theta_fit;
  j["width"] = r.width;
  j["center_offset"] = r.center_offset;
  json prof = json::array();
  for (const auto& w : r.width_profile)
    prof.push_back({{"events", w.events}, {"arclength", w.arclength}, {"width", w.across}, {"along", w.along}});
  j["width_profile"] = prof;
  j["trapping"] = trapping_json(r.trapping);
  j["Theta_predicted"] = opt_json(r.Theta_predicted);
  j["strip_gap_deg"] = opt_json(r.strip_gap_deg);
  j["theta_top"] = opt_json(r.theta_top);
  j["diffusion_slope"] = opt_json(r.diffusion_slope);
  j["diffusion_stderr"] = opt_json(r.diffusion_stderr);
  j["audit_pass"] = opt_json(r.audit_pass);
  j["check_pass"] = analysis_check(r);
  j["errors"] = r.errors;
  return j;
}

inline AnalyzeOptions analyze_options(const RunConfig& cfg) {
  AnalyzeOptions o;
  o.events = cfg.max_events;
  o.epsilon = cfg.epsilon;
  o.renorm_steps = cfg.renorm_steps;
  o.audit_events = std::min<std::int64_t>(cfg.max_events, 100000);
  return o;
}

// ---------------------------------------------------------------------------
// Compare

inline json run_compare(const RunConfig& cfg) {
  const SlitTorus torus = build_torus(cfg.params, cfg.epsilon);
  const Vec2 start = resolve_start(cfg);
  const EquivalenceReport rep = compare_models(torus, start, !cfg.down, cfg.max_events);
  const bool pass = !rep.index_mismatch && !rep.corner_mismatch &&
                    rep.max_discrepancy <= 1e-8 * rep.lattice_scale &&
                    rep.max_reconstruction <= rep.domain_diameter;
  json j = stamp(cfg.params);
  j["start"] = vec_json(start);
  j["direction"] = cfg.down ? "down" : "up";
  j["matched_events"] = rep.matched;
  j["max_discrepancy"] = rep.max_discrepancy;
  j["lattice_scale"] = rep.lattice_scale;
  j["max_reconstruction_residual"] = rep.max_reconstruction;
  j["domain_diameter"] = rep.domain_diameter;
  j["index_mismatch"] = rep.index_mismatch;
  j["corner_mismatch"] = rep.corner_mismatch;
  j["corner_stop"] = rep.corner_stop;
  j["pass"] = pass;
  return j;
}

// ---------------------------------------------------------------------------
// Sweep

struct SweepSample {
  int index = 0;
  std::optional<AnalysisResult> result;
  std::optional<SystemParams> params;
  std::string error;
};

/// Independent generator for sample i of a sweep.
inline std::mt19937_64 sample_rng(std::uint64_t seed, int i) {
  std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(i), 0x5eedu};
  return std::mt19937_64(seq);
}

/// Runs one analysis per sample on `threads` workers; results keep sample order.
inline std::vector<SweepSample> run_sweep_samples(const RunConfig& cfg, const AnalyzeOptions& opt) {
  std::vector<SweepSample> out(std::size_t(cfg.samples));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i; (i = next.fetch_add(1)) < cfg.samples;) {
      SweepSample& s = out[std::size_t(i)];
      s.index = i;
      try {
        auto rng = sample_rng(cfg.seed, i);
        s.params = sample_admissible(rng, cfg.ranges);
        const Vec2 start = random_start(*s.params, rng);
        s.result = analyze(*s.params, start, !cfg.down, opt);
      } catch (const std::exception& e) {
        s.error = e.what();
      }
    }
  };
  int n = cfg.threads > 0 ? cfg.threads : int(std::max(1u, std::thread::hardware_concurrency()));
  n = std::min(n, cfg.samples);
  std::vector<std::thread> pool;
  for (int k = 1; k < n; ++k) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return out;
}

inline json histogram_json(const std::vector<double>& v, double lo, double hi, int bins) {
  std::vector<int> h(std::size_t(bins), 0);
  int below = 0, above = 0;
  for (double x : v) {
    if (x < lo) ++below;
    else if (x >= hi) ++above;
    else ++h[std::size_t((x - lo) / (hi - lo) * bins)];
  }
  return {{"lo", lo}, {"hi", hi}, {"counts", h}, {"below", below}, {"above", above}};
}

inline json sweep_json(const RunConfig& cfg, const std::vector<SweepSample>& samples) {
  json j;
  j["version"] = kVersion;
  j["seed"] = cfg.seed;
  j["samples"] = cfg.samples;
  j["events"] = cfg.max_events;
  j["ranges"] = {{"r", {cfg.ranges.r_min, cfg.ranges.r_max}},
                 {"arg1", {cfg.ranges.arg1_min, cfg.ranges.arg1_max}},
                 {"arg2", {cfg.ranges.arg2_min, cfg.ranges.arg2_max}},
                 {"side", {cfg.ranges.side_min, cfg.ranges.side_max}},
                 {"theta", {cfg.ranges.theta_min, cfg.ranges.theta_max}}};
  json list = json::array();
  int ok = 0, trap = 0, flagged_fail = 0, audit_n = 0, audit_ok = 0, agree_n = 0, agree_ok = 0;
  std::vector<double> thetas, slopes;
  for (const auto& s : samples) {
    json e;
    e["index"] = s.index;
    e["params"] = s.params ? params_json(*s.params) : json(nullptr);
    if (s.result) {
      const AnalysisResult& r = *s.result;
      ++ok;
      trap += r.trapping.pass;
      flagged_fail += !r.trapping.pass && r.trapping.near_degenerate;
      if (r.audit_pass) {
        ++audit_n;
        audit_ok += *r.audit_pass;
      }
      if (r.trapping.pass && r.strip_gap_deg) {
        ++agree_n;
        agree_ok += *r.strip_gap_deg <= kStripAgreementDeg;
      }
      if (r.theta_top) thetas.push_back(*r.theta_top);
      if (r.diffusion_slope) slopes.push_back(*r.diffusion_slope);
      e["start"] = vec_json(r.start);
      e["Theta_fit"] = r.Theta_fit;
      e["width"] = r.width;
      e["trapping"] = trapping_json(r.trapping);
      e["Theta_predicted"] = opt_json(r.Theta_predicted);
      e["strip_gap_deg"] = opt_json(r.strip_gap_deg);
      e["theta_top"] = opt_json(r.theta_top);
      e["diffusion_slope"] = opt_json(r.diffusion_slope);
      e["audit_pass"] = opt_json(r.audit_pass);
      e["errors"] = r.errors;
    } else {
      e["error"] = s.error;
    }
    list.push_back(e);
  }
  auto frac = [](int a, int b) { return b > 0 ? json(double(a) / b) : json(nullptr); };
  auto mean = [](const std::vector<double>& v) {
    if (v.empty()) return json(nullptr);
    double s = 0.0;
    for (double x : v) s += x;
    return json(s / double(v.size()));
  };
  j["completed"] = ok;
  j["failed"] = cfg.samples - ok;
  j["trapping_pass_fraction"] = frac(trap, ok);
  j["trapping_failures_flagged"] = flagged_fail;
  j["trapping_failures_unflagged"] = ok - trap - flagged_fail;
  j["audit_pass_fraction"] = frac(audit_ok, audit_n);
  j["strip_agreement_fraction"] = frac(agree_ok, agree_n);
  j["theta_top_mean"] = mean(thetas);
  j["theta_top_histogram"] = histogram_json(thetas, 0.0, 1.0, 20);
  j["diffusion_slope_mean"] = mean(slopes);
  j["diffusion_slope_histogram"] = histogram_json(slopes, 0.0, 1.0, 20);
  j["per_sample"] = list;
  return j;
}

inline json run_sweep(const RunConfig& cfg) {
  return sweep_json(cfg, run_sweep_samples(cfg, analyze_options(cfg)));
}

}  // namespace windtree
