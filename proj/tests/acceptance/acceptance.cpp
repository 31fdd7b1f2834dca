// Acceptance harness: one PASS/FAIL line per criterion.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "windtree/analysis.hpp"
#include "windtree/compare.hpp"
#include "windtree/renorm.hpp"
#include "windtree/runs.hpp"
#include "windtree/sampling.hpp"
#include "windtree/slit.hpp"
#include "windtree/windtree.hpp"

using namespace windtree;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const char* name, const std::function<Outcome()>& f) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = f();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  failures += !o.pass;
  std::printf("%s criterion %2d %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), s);
  std::fflush(stdout);
}

template <class... Args>
std::string fmt(const char* f, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::vector<SampledSurface> o_eps_surfaces(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<SampledSurface> out;
  while (int(out.size()) < n) out.push_back(sample_o_epsilon(rng, 0.05));
  return out;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / double(v.size());
}

// ---------------------------------------------------------------------------

Outcome slit_identity() {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> side(0.05, 5.0), ang(1e-3, kPi / 2 - 1e-3);
  int n = 0, skipped = 0;
  double worst = 0.0;
  while (n < 10000) {
    SystemParams p;
    p.a = side(rng);
    p.b = side(rng);
    p.theta = ang(rng);
    SlitSpec s;
    try {
      s = build_slit(p);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::DegenerateCase3) throw;
      ++skipped;
      continue;
    }
    const double exact = std::hypot(p.a, p.b);
    worst = std::max(worst, std::fabs(s.x_len + s.y_len - exact) / exact);
    ++n;
  }
  return {worst <= 1e-12, fmt("max relative error %.2e over %d tuples (%d degenerate skipped)", worst, n, skipped)};
}

struct DichotomySink {
  bool up = true;
  bool in = false;
  int entry_side = -1;
  DirAngle before;
  std::int64_t crossings = 0, translations = 0, reversals = 0, bad = 0;
  void on_event(const TraceEvent& e) {
    if (e.kind == EventKind::Enter) {
      in = true;
      entry_side = e.side;
      return;
    }
    if (e.kind != EventKind::Exit || !in) return;
    in = false;
    ++crossings;
    const DirAngle neg = before == DirAngle::up() ? DirAngle::down() : DirAngle::up();
    const bool translation = e.dir_after == before;
    const bool reversal = e.dir_after == neg;
    const CrossingType t = classify_crossing(entry_side, e.side);
    if (translation && t == CrossingType::Translation) ++translations;
    else if (reversal && t == CrossingType::Reversal) ++reversals;
    else ++bad;
    before = e.dir_after;
  }
  void on_checkpoint(const Checkpoint&) {}
};

Outcome crossing_dichotomy() {
  std::mt19937_64 rng(202);
  std::int64_t total = 0, tr = 0, rv = 0, bad = 0, parity_bad = 0;
  const std::int64_t per = 50000;
  for (int c = 0; c < 20; ++c) {
    const SystemParams p = sample_admissible(rng);
    const Vec2 start = random_start(p, rng);
    const bool up = c % 2 == 0;
    TraceOptions opt;
    opt.max_events = per;
    PlaneTracer t(p, start, up, opt);
    DichotomySink sink;
    sink.before = up ? DirAngle::up() : DirAngle::down();
    for (std::int64_t k = 0; k < per && t.step(sink); ++k) {}
    total += sink.crossings;
    tr += sink.translations;
    rv += sink.reversals;
    bad += sink.bad;
    // Reversal parity determines the final direction.
    const bool expect_up = (sink.reversals % 2 == 0) == up;
    parity_bad += t.up() != expect_up;
  }
  return {bad == 0 && parity_bad == 0 && total >= 1000000,
          fmt("%lld crossings: %lld translation, %lld reversal, %lld unclassified, %lld parity mismatches",
              (long long)total, (long long)tr, (long long)rv, (long long)bad, (long long)parity_bad)};
}

struct CompareTotals {
  int configs = 0;
  double worst_ratio = 0.0;     // discrepancy / lattice scale
  double worst_recon = 0.0;     // reconstruction / domain diameter
  int mismatches = 0;
  std::int64_t matched = 0;
};

CompareTotals compare_totals() {
  static CompareTotals cached;
  if (cached.configs > 0) return cached;
  std::mt19937_64 rng(303);
  for (int c = 0; c < 100; ++c) {
    const SystemParams p = sample_admissible(rng);
    const SlitTorus t = build_torus(p);
    const Vec2 start = random_start(p, rng);
    const EquivalenceReport r = compare_models(t, start, c % 2 == 0, 10000);
    cached.worst_ratio = std::max(cached.worst_ratio, r.max_discrepancy / r.lattice_scale);
    cached.worst_recon = std::max(cached.worst_recon, r.max_reconstruction / r.domain_diameter);
    cached.mismatches += r.index_mismatch || r.corner_mismatch;
    cached.matched += r.matched;
    ++cached.configs;
  }
  return cached;
}

Outcome plane_surface_equivalence() {
  const CompareTotals c = compare_totals();
  return {c.worst_ratio <= 1e-8 && c.mismatches == 0,
          fmt("%d configs, %lld matched visits, max discrepancy %.2e x lattice scale, %d event mismatches", c.configs,
              (long long)c.matched, c.worst_ratio, c.mismatches)};
}

Outcome displacement_reconstruction() {
  const CompareTotals c = compare_totals();
  return {c.worst_recon <= 1.0,
          fmt("max |exit - (start + n1 e1 + n2 e2)| = %.3f x domain diameter over %lld exits", c.worst_recon,
              (long long)c.matched)};
}

Outcome singularity_census_check() {
  std::mt19937_64 rng(404);
  int built = 0, ok = 0, rejected = 0;
  for (int i = 0; i < 1000; ++i) {
    const SystemParams p = sample_admissible(rng);
    SlitTorus t;
    try {
      t = build_torus(p);
    } catch (const Error&) {
      ++rejected;
      continue;
    }
    ++built;
    const auto c = singularity_census(t.slit);
    const bool good = c.size() == 4 && std::fabs(c[0].angle - kPi) < 1e-9 && std::fabs(c[1].angle - kPi) < 1e-9 &&
                      std::fabs(c[2].angle - 3 * kPi) < 1e-9 && std::fabs(c[3].angle - 3 * kPi) < 1e-9;
    ok += good;
  }
  return {ok == built && built > 0, fmt("%d/%d built surfaces have cone angles {pi, pi, 3pi, 3pi} (%d not built)",
                                        ok, built, rejected)};
}

// Trapping and strip agreement share one sweep of 50 admissible tuples.
std::vector<SweepSample> trapping_samples() {
  static std::vector<SweepSample> cached;
  if (!cached.empty()) return cached;
  RunConfig cfg;
  cfg.seed = 606;
  cfg.samples = 50;
  cfg.max_events = 1000000;
  cfg.threads = 0;
  AnalyzeOptions opt = analyze_options(cfg);
  opt.audit = false;
  cached = run_sweep_samples(cfg, opt);
  return cached;
}

Outcome trapping_saturation() {
  const auto samples = trapping_samples();
  int n = 0, pass = 0, flagged = 0, unflagged = 0, width_fail = 0, along_fail = 0, errors = 0;
  for (const auto& s : samples) {
    if (!s.result) {
      ++errors;
      continue;
    }
    const TrappingCheck& t = s.result->trapping;
    ++n;
    pass += t.pass;
    width_fail += !t.width_saturated;
    along_fail += !t.along_grows;
    if (!t.pass) (t.near_degenerate ? flagged : unflagged)++;
  }
  const double frac = n > 0 ? double(pass) / n : 0.0;
  return {n >= 50 && frac >= 0.9 && unflagged == 0,
          fmt("%d/%d pass (%.0f%%); width ratio > 1.05 on %d, along growth < 3 on %d; failures flagged "
              "near-degenerate %d, unflagged %d; %d errors",
              pass, n, 100 * frac, width_fail, along_fail, flagged, unflagged, errors)};
}

Outcome strip_cross_check() {
  const auto samples = trapping_samples();
  int n = 0, ok = 0, missing = 0;
  double worst = 0.0;
  for (const auto& s : samples) {
    if (!s.result || !s.result->trapping.pass) continue;
    ++n;
    if (!s.result->strip_gap_deg) {
      ++missing;
      continue;
    }
    worst = std::max(worst, *s.result->strip_gap_deg);
    ok += *s.result->strip_gap_deg <= kStripAgreementDeg;
  }
  const double frac = n > 0 ? double(ok) / n : 0.0;
  return {n > 0 && frac >= 0.8, fmt("%d/%d trapping-passing samples within 2 deg (%.0f%%), max gap among predicted "
                                    "%.3f deg, %d without prediction",
                                    ok, n, 100 * frac, worst, missing)};
}

Outcome lyapunov_exponent() {
  std::vector<double> top, first, second, se2;
  double worst_drift = 0.0;
  std::vector<double> top_again;
  int in_unit = 0;
  for (const auto& sf : o_eps_surfaces(24, 707)) {
    RenormOptions ro;
    ro.keep_levels = false;
    const RenormRun run = run_renorm(sf.torus, ro);
    const LyapunovEstimate e = lyapunov_estimate(run.acc);
    const HalvesEstimate h = two_half_estimate(run.acc);
    top.push_back(e.theta_top);
    first.push_back(h.theta_first);
    second.push_back(h.theta_second);
    se2.push_back(h.stderr_diff * h.stderr_diff);
    worst_drift = std::max(worst_drift, direction_drift_deg(run.acc));
    in_unit += e.theta_top > 0.0 && e.theta_top < 1.0;
    top_again.push_back(lyapunov_estimate(run_renorm(sf.torus, ro).acc).theta_top);
  }
  const double m = mean(top);
  const double diff = mean(first) - mean(second);
  double s = 0.0;
  for (double v : se2) s += v;
  const double se = std::sqrt(s) / double(se2.size());
  const bool reproducible = top == top_again;
  const bool pass = m >= 0.61 && m <= 0.72 && std::fabs(diff) <= se && reproducible;
  return {pass, fmt("mean theta_top %.4f over %zu surfaces at t = %.1f; halves %.4f vs %.4f, |diff| %.4f, reported "
                    "stderr %.4f; %d in (0,1); reproducible %s; max drift over last third %.2e deg",
                    m, top.size(), 120 * 0.25, mean(first), mean(second), std::fabs(diff), se, in_unit,
                    reproducible ? "yes" : "no", worst_drift)};
}

struct IntersectionSink {
  std::int64_t events = 0;
  HomologyVec n;
  std::vector<Checkpoint> cps;
  void on_event(const TraceEvent&) {
    ++events;
    if (events >= 10000) cps.push_back(Checkpoint{double(events), {}, n});
  }
  void on_checkpoint(const Checkpoint&) {}
  void on_homology(double, HomologyVec m) { n = m; }
};

Outcome bounded_intersection() {
  std::mt19937_64 rng(909);
  int n = 0, bounded = 0, positive = 0;
  double worst = 0.0, min_slope = 1e9;
  for (const auto& sf : o_eps_surfaces(24, 808)) {
    RenormOptions ro;
    ro.keep_levels = false;
    const auto w = lyapunov_estimate(run_renorm(sf.torus, ro).acc).contracted_dir;
    std::uniform_real_distribution<double> U(-0.5, 0.5);
    const Vec2 start = U(rng) * sf.torus.u1() + U(rng) * sf.torus.u2() + sf.torus.slit_anchor;
    SurfaceTracer tr(sf.torus, start, true);
    IntersectionSink sink;
    sink.cps.reserve(1000000);
    while (sink.events < 1000000 && tr.step(sink)) {}
    if (sink.events < 1000000) continue;
    ++n;
    const auto along = bounded_intersection_monitor(sink.cps, {w[0], w[1]});
    const double first = profile_max(along, 1e4, 1e5), last = profile_max(along, 1e5, 1e6);
    const double ratio = first > 0.0 ? last / first : (last > 0.0 ? INFINITY : 1.0);
    worst = std::max(worst, ratio);
    bounded += ratio <= 1.5;
    const auto normal = bounded_intersection_monitor(sink.cps, {-w[1], w[0]});
    std::vector<double> xs, ys;
    for (int k = 0; k <= 40; ++k) {
      const double T = std::pow(10.0, 4.0 + k * 0.05);
      const double v = profile_max(normal, 1e4, T);
      if (v <= 0.0) continue;
      xs.push_back(std::log(T));
      ys.push_back(std::log(v));
    }
    double slope = 0.0;
    if (xs.size() >= 3) {
      const double mx = mean(xs), my = mean(ys);
      double sxx = 0.0, sxy = 0.0;
      for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
      }
      slope = sxy / sxx;
    }
    min_slope = std::min(min_slope, slope);
    positive += slope > 0.0;
  }
  const double frac = n > 0 ? double(bounded) / n : 0.0;
  return {n >= 20 && frac >= 0.8 && positive == n,
          fmt("%d/%d surfaces with last-decade max <= 1.5 x first-decade max (%.0f%%, worst ratio %.3f); normal "
              "profile slope > 0 on %d/%d (min %.3f)",
              bounded, n, 100 * frac, worst, positive, n, min_slope)};
}

Outcome diffusion_slope() {
  AnalyzeOptions opt;
  opt.events = 10000000;
  opt.renorm = false;
  opt.audit = false;
  std::vector<double> slopes;
  int in_band = 0, errors = 0;
  for (int i = 0; i < 20; ++i) {
    auto rng = sample_rng(1010, i);
    const SystemParams p = sample_admissible(rng);
    const Vec2 start = random_start(p, rng);
    const AnalysisResult r = analyze(p, start, true, opt);
    if (!r.diffusion_slope) {
      ++errors;
      continue;
    }
    slopes.push_back(*r.diffusion_slope);
    in_band += *r.diffusion_slope >= 0.55 && *r.diffusion_slope <= 0.80;
  }
  const double m = mean(slopes);
  std::vector<double> sorted = slopes;
  std::sort(sorted.begin(), sorted.end());
  const double med = sorted.empty() ? 0.0 : sorted[sorted.size() / 2];
  return {!slopes.empty() && m >= 0.55 && m <= 0.80,
          fmt("mean along-strip slope %.3f over %zu runs of 1e7 events (median %.3f, %d/%zu runs individually in "
              "[0.55, 0.80], %d errors)",
              m, slopes.size(), med, in_band, slopes.size(), errors)};
}

Outcome decomposition_audit_check() {
  std::mt19937_64 rng(1111);
  std::uniform_real_distribution<double> U(-0.5, 0.5);
  int n = 0, identity = 0, bound = 0, top_nonzero = 0;
  for (const auto& sf : o_eps_surfaces(100, 1112)) {
    const RenormRun run = run_renorm(sf.torus);
    const Vec2 start = U(rng) * sf.torus.u1() + U(rng) * sf.torus.u2() + sf.torus.slit_anchor;
    const auto log = trace_transversal_hits(sf.torus, run.I, start, true, 20000);
    const auto a = decomposition_audit(log, run, sf.torus);
    ++n;
    identity += a.identity_holds;
    bound += a.bound_holds;
    top_nonzero += a.top_nonzero;
  }
  return {identity == n && bound == n,
          fmt("%d runs: identity exact on %d, level bound on %d (top-level class nonzero on %d)", n, identity, bound,
              top_nonzero)};
}

Outcome synthetic_estimators() {
  // Fibonacci product.
  CocycleAccumulator acc;
  const Mat2i U{1, 1, 0, 1}, L{1, 0, 1, 1};
  for (int k = 0; k < 10000; ++k) acc.push(k % 2 == 0 ? U : L, 1.0);
  const double phi_err = std::fabs(lyapunov_estimate(acc).theta_top - std::log((1 + std::sqrt(5.0)) / 2));
  // t^{2/3} cloud.
  std::vector<std::pair<double, Vec2>> cloud{{0.0, {0.0, 0.0}}};
  for (int i = 0; i <= 6000; ++i) {
    const double t = std::pow(10.0, i / 1000.0), r = std::pow(t, 2.0 / 3.0);
    cloud.emplace_back(t, Vec2{r * std::cos(0.7), r * std::sin(0.7)});
  }
  const double slope_err = std::fabs(diffusion_exponent(cloud).slope - 2.0 / 3.0);
  // Rotation IETs against Euclid's algorithm on the two lengths.
  std::mt19937_64 rng(1212);
  std::uniform_real_distribution<double> A(0.05, 0.95);
  int steps = 0, mismatches = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const long double alpha = trial == 0 ? (std::sqrt(5.0L) - 1) / 2 : (long double)A(rng);
    auto iet = linear_flow_iet<long double>(alpha);
    long double a = alpha, b = 1 - alpha;
    for (int k = 0; k < 25; ++k) {
      const long double total = a + b;
      const long double ratio = (total - std::min(a, b)) / total;
      Mat2i expect;
      if (b > a) {
        b -= a;
        expect = {1, 1, 0, 1};
      } else {
        a -= b;
        expect = {1, 0, 1, 1};
      }
      auto st = induce(iet, ratio);
      const Mat2i got = st.incidence.size() == 2 ? Mat2i{st.incidence[0][0], st.incidence[0][1], st.incidence[1][0],
                                                         st.incidence[1][1]}
                                                  : Mat2i{};
      mismatches += !(got == expect) || std::llabs(st.B.det()) != 1;
      ++steps;
      iet = std::move(st.iet);
    }
  }
  return {phi_err <= 1e-3 && slope_err <= 1e-6 && mismatches == 0,
          fmt("|theta - log phi| = %.2e at n = 1e4; |slope - 2/3| = %.2e; rotation induction %d/%d steps match "
              "Euclid matrices",
              phi_err, slope_err, steps - mismatches, steps)};
}

}  // namespace

int main() {
  report(1, "slit identity", slit_identity);
  report(2, "crossing dichotomy", crossing_dichotomy);
  report(3, "plane-surface equivalence", plane_surface_equivalence);
  report(4, "displacement reconstruction", displacement_reconstruction);
  report(5, "singularity census", singularity_census_check);
  report(6, "trapping saturation", trapping_saturation);
  report(7, "Lyapunov exponent", lyapunov_exponent);
  report(8, "strip direction cross-check", strip_cross_check);
  report(9, "bounded intersection", bounded_intersection);
  report(10, "diffusion exponent", diffusion_slope);
  report(11, "decomposition audit", decomposition_audit_check);
  report(12, "synthetic estimators", synthetic_estimators);
  std::printf("%d of 12 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
