#pragma once

// Post-processing of traced trajectories: vertical length, the loop bound
// constant, strip fits, diffusion exponent, intersection monitor and the
// level decomposition of γ_T.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <utility>
#include <vector>

#include "windtree/errors.hpp"
#include "windtree/geom.hpp"
#include "windtree/renorm.hpp"
#include "windtree/slit.hpp"
#include "windtree/windtree.hpp"

namespace windtree {

// ---------------------------------------------------------------------------
// Vertical length and the loop bound

/// Σ |Δy| over the segments of a polyline.
inline double vertical_length(const std::vector<Vec2>& path) {
  double s = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i) s += std::fabs(path[i].y - path[i - 1].y);
  return s;
}

/// c = (min(v1,v2) − max(v3,v4)) / max(v1,v2), so that every closed loop γ
/// has vertical length at least c·(|n1| v1 + |n2| v2).
inline double lower_bound_constant(const SlitTorus& t) {
  const double v1 = std::fabs(t.v1), v2 = std::fabs(t.v2);
  const double gap = std::min(v1, v2) - std::max(t.v3, t.v4);
  if (!(gap > 0.0)) throw Error(ErrorKind::NotInOEpsilon, "max(v3,v4) must stay below min(v1,v2)");
  return std::clamp(gap / std::max(v1, v2), std::numeric_limits<double>::min(), 1.0);
}

/// Right-hand side of the loop bound for a class n.
inline double loop_bound(const SlitTorus& t, double c, HomologyVec n) {
  return c * (std::fabs(double(n.n1)) * std::fabs(t.v1) + std::fabs(double(n.n2)) * std::fabs(t.v2));
}

// ---------------------------------------------------------------------------
// Strip fit

struct StripFit {
  double Theta = 0.0;            // [0, π)
  double principal_Theta = 0.0;  // dominant axis of the second-moment form, [0, π)
  double width = 0.0;
  double center_offset = 0.0;  // signed distance of the strip centre line from the origin
  std::vector<std::pair<double, double>> residual_profile;  // (arclength, deviation from the centre line)
};

namespace detail {

inline double angle_mod_pi(double a) {
  a = std::fmod(a, kPi);
  if (a < 0.0) a += kPi;
  if (a >= kPi) a -= kPi;
  return a;
}

/// Convex hull, counter-clockwise, without collinear points.
inline std::vector<Vec2> convex_hull(std::vector<Vec2> p) {
  std::sort(p.begin(), p.end(), [](Vec2 a, Vec2 b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  p.erase(std::unique(p.begin(), p.end(), [](Vec2 a, Vec2 b) { return a.x == b.x && a.y == b.y; }), p.end());
  if (p.size() < 3) return p;
  std::vector<Vec2> h(2 * p.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    while (k >= 2 && cross(h[k - 1] - h[k - 2], p[i] - h[k - 2]) <= 0.0) --k;
    h[k++] = p[i];
  }
  for (std::size_t i = p.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(h[k - 1] - h[k - 2], p[i] - h[k - 2]) <= 0.0) --k;
    h[k++] = p[i];
  }
  h.resize(k - 1);
  return h;
}

/// Direction of the narrowest strip containing the hull (rotating calipers).
inline double min_width_direction(const std::vector<Vec2>& h) {
  const std::size_t n = h.size();
  if (n < 3) {
    if (n == 2) return std::atan2(h[1].y - h[0].y, h[1].x - h[0].x);
    return 0.0;
  }
  double best = std::numeric_limits<double>::infinity(), dir = 0.0;
  std::size_t j = 1;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 e = h[(i + 1) % n] - h[i];
    auto dist = [&](std::size_t k) { return cross(e, h[k % n] - h[i]); };
    while (dist(j + 1) > dist(j)) j = (j + 1) % n;
    const double w = dist(j) / norm(e);
    if (w < best) {
      best = w;
      dir = std::atan2(e.y, e.x);
    }
  }
  return dir;
}

}  // namespace detail

/// Fits a strip to points with their arclengths. Theta is the direction of
/// the narrowest enclosing strip; width is the perpendicular extent.
inline StripFit fit_strip(const std::vector<Vec2>& pts, const std::vector<double>& arclength) {
  if (pts.size() < 10) throw Error(ErrorKind::TooFewPoints, "strip fit needs at least 10 points");
  if (arclength.size() != pts.size()) throw Error(ErrorKind::ValidationError, "arclength count mismatch");
  Vec2 mean{0.0, 0.0};
  for (const auto& p : pts) mean = mean + p;
  mean = (1.0 / double(pts.size())) * mean;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& p : pts) {
    const Vec2 d = p - mean;
    sxx += d.x * d.x;
    sxy += d.x * d.y;
    syy += d.y * d.y;
  }
  StripFit f;
  f.principal_Theta = detail::angle_mod_pi(0.5 * std::atan2(2.0 * sxy, sxx - syy));
  f.Theta = detail::angle_mod_pi(detail::min_width_direction(detail::convex_hull(pts)));
  const Vec2 z{-std::sin(f.Theta), std::cos(f.Theta)};
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& p : pts) {
    const double d = dot(z, p);
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  f.width = hi - lo;
  f.center_offset = 0.5 * (hi + lo);
  f.residual_profile.reserve(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i)
    f.residual_profile.emplace_back(arclength[i], dot(z, pts[i]) - f.center_offset);
  return f;
}

/// Arclength taken along the polyline through the points.
inline StripFit fit_strip(const std::vector<Vec2>& pts) {
  std::vector<double> s(pts.size(), 0.0);
  for (std::size_t i = 1; i < pts.size(); ++i) s[i] = s[i - 1] + norm(pts[i] - pts[i - 1]);
  return fit_strip(pts, s);
}

inline StripFit fit_strip(const std::vector<Checkpoint>& cps) {
  std::vector<Vec2> p;
  std::vector<double> s;
  for (const auto& c : cps) {
    p.push_back(c.pos);
    s.push_back(c.arclength);
  }
  return fit_strip(p, s);
}

/// Extent of the points along and across a direction.
struct Extent {
  double along = 0.0, across = 0.0;
};

inline Extent extent_in_direction(const std::vector<Vec2>& pts, double Theta) {
  const Vec2 u{std::cos(Theta), std::sin(Theta)}, z{-std::sin(Theta), std::cos(Theta)};
  double a0 = std::numeric_limits<double>::infinity(), a1 = -a0, z0 = a0, z1 = -a0;
  for (const auto& p : pts) {
    a0 = std::min(a0, dot(u, p));
    a1 = std::max(a1, dot(u, p));
    z0 = std::min(z0, dot(z, p));
    z1 = std::max(z1, dot(z, p));
  }
  if (pts.empty()) return {};
  return {a1 - a0, z1 - z0};
}

// ---------------------------------------------------------------------------
// Diffusion exponent

struct SlopeFit {
  double slope = 0.0;
  double std_error = 0.0;
  int samples = 0;
};

/// Least-squares slope of log(running max displacement) against log(t) on
/// geometrically spaced times, first decade discarded.
inline SlopeFit diffusion_exponent(const std::vector<std::pair<double, Vec2>>& cps, int per_decade = 10) {
  std::vector<std::pair<double, double>> run;  // (t, running max |p_t − p_0|)
  if (cps.empty()) throw Error(ErrorKind::InsufficientSpan, "no checkpoints");
  const Vec2 p0 = cps.front().second;
  double m = 0.0;
  for (const auto& [t, p] : cps) {
    m = std::max(m, norm(p - p0));
    if (t > 0.0) run.emplace_back(t, m);
  }
  if (run.size() < 2 || run.back().first < 1e3 * run.front().first)
    throw Error(ErrorKind::InsufficientSpan, "arclengths must span at least three decades");
  const double t0 = run.front().first, t1 = run.back().first;
  std::vector<double> xs, ys;
  for (int j = per_decade;; ++j) {
    const double t = t0 * std::pow(10.0, double(j) / per_decade);
    if (t > t1 * (1 + 1e-12)) break;
    auto it = std::upper_bound(run.begin(), run.end(), t * (1 + 1e-12),
                               [](double v, const auto& e) { return v < e.first; });
    const auto& e = *std::prev(it);
    if (e.second <= 0.0) continue;
    xs.push_back(std::log(t));
    ys.push_back(std::log(e.second));
  }
  if (xs.size() < 3) throw Error(ErrorKind::InsufficientSpan, "too few samples after burn-in");
  const double n = double(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  SlopeFit f;
  f.samples = int(xs.size());
  f.slope = sxy / sxx;
  double rss = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - my - f.slope * (xs[i] - mx);
    rss += r * r;
  }
  f.std_error = xs.size() > 2 ? std::sqrt(rss / (n - 2) / sxx) : 0.0;
  return f;
}

/// Checkpoint positions projected on a direction, as input for diffusion_exponent.
inline std::vector<std::pair<double, Vec2>> projected_checkpoints(const std::vector<Checkpoint>& cps, double Theta) {
  const Vec2 u{std::cos(Theta), std::sin(Theta)};
  std::vector<std::pair<double, Vec2>> out;
  out.reserve(cps.size());
  for (const auto& c : cps) out.emplace_back(c.arclength, Vec2{dot(u, c.pos), 0.0});
  return out;
}

// ---------------------------------------------------------------------------
// Bounded intersection

/// Running sup of |w1 n2 − w2 n1| over the checkpoints; w in the basis of n.
inline std::vector<std::pair<double, double>> bounded_intersection_monitor(const std::vector<Checkpoint>& cps,
                                                                           std::array<double, 2> w) {
  if (!(std::hypot(w[0], w[1]) > 0.0)) throw Error(ErrorKind::ZeroDirection, "w is zero");
  std::vector<std::pair<double, double>> out;
  out.reserve(cps.size());
  double sup = 0.0;
  for (const auto& c : cps) {
    sup = std::max(sup, std::fabs(w[0] * double(c.n.n2) - w[1] * double(c.n.n1)));
    out.emplace_back(c.arclength, sup);
  }
  return out;
}

/// Largest profile value with arclength in [lo, hi].
inline double profile_max(const std::vector<std::pair<double, double>>& prof, double lo, double hi) {
  double m = 0.0;
  for (const auto& [t, v] : prof)
    if (t >= lo && t <= hi) m = std::max(m, v);
  return m;
}

// ---------------------------------------------------------------------------
// Level decomposition of γ_T

/// Hits of I along a vertical trajectory, with the final class n(T).
struct TransversalLog {
  std::vector<TransversalHit> hits;  // time order
  HomologyVec n_final;
  double T = 0.0;
  std::int64_t obstacle_visits = 0;
  bool stopped = false;  // singular hit before max_events
};

inline TransversalLog trace_transversal_hits(const SlitTorus& torus, const TransversalSegment& I, Vec2 start,
                                             bool up, std::int64_t max_events) {
  SurfaceTracer tr(torus, start, up);
  tr.set_transversal(&I.pieces, I.length);
  detail::NullSink sink;
  TransversalLog log;
  while (log.obstacle_visits < max_events) {
    const FlowEvent e = tr.next(sink);
    if (e == FlowEvent::Stopped) {
      log.stopped = true;
      break;
    }
    if (e == FlowEvent::Transversal) log.hits.push_back(tr.last_hit());
    if (e == FlowEvent::SlitCross) ++log.obstacle_visits;
  }
  log.n_final = tr.homology();
  log.T = tr.time();
  return log;
}

struct AuditLevel {
  int k = 0;
  double t_k = 0.0;
  std::int64_t m1 = 0, m2 = 0;
  double bound = 0.0;
};

struct DecompositionAudit {
  std::vector<AuditLevel> levels;  // k < n: γ1^(k) + γ2^(k); last entry: γ^(n)
  int n = 0;
  HomologyVec rho1, rho2;
  HomologyVec reconstructed;
  HomologyVec gamma_T;
  double K = 0.0;
  double c = 0.0;
  bool identity_holds = false;
  bool bound_holds = false;
  bool top_nonzero = false;  // not required: loops around the π-cones are null-homologous
  bool pass = false;
};

/// Coefficients of a class in the basis given by the rows of z.
inline std::array<std::int64_t, 2> in_basis(HomologyVec g, const Mat2i& z) {
  const Mat2i inv = inverse_unimodular(z);
  return {g.n1 * inv.a + g.n2 * inv.c, g.n1 * inv.b + g.n2 * inv.d};
}

/// Zippered constant of level k after rescaling I^(k) to the length of I.
inline double rescaled_level_bound(const IETWithFlips<ExactLength>& iet, double t_k) {
  const double s = std::exp(-t_k);
  double hmax = 0.0, hmin = std::numeric_limits<double>::infinity();
  for (const auto& b : iet.branches) {
    hmax = std::max(hmax, double(b.height) * s);
    hmin = std::min(hmin, double(b.height) * s);
  }
  double K = std::max(hmax, 1.0 / hmin);
  for (double l : iet.basis.lengths) K = std::max({K, l * s, 1.0 / (l * s)});
  return K;
}

/// Splits γ_T by the first and last hits of each I^(k) and expresses every
/// piece in the level basis; checks the integer identity and the size bound.
/// The top level n is the deepest one crossed at least twice.
inline DecompositionAudit decomposition_audit(const TransversalLog& log, const RenormRun& run,
                                              const SlitTorus& torus) {
  if (run.levels.empty()) throw Error(ErrorKind::LevelMismatch, "induction levels were not kept");
  if (log.hits.empty()) throw Error(ErrorKind::LevelMismatch, "trajectory never reaches I");
  const double J0 = double(run.levels.front().total_length);
  auto level_len = [&](std::size_t k) { return run.I.length * double(run.levels[k].total_length) / J0; };
  struct Span {
    std::size_t first, last;
  };
  std::vector<Span> spans;
  for (std::size_t k = 0; k < run.levels.size(); ++k) {
    const double len = level_len(k);
    std::size_t first = log.hits.size(), last = 0;
    for (std::size_t i = 0; i < log.hits.size(); ++i) {
      if (log.hits[i].s > len) continue;
      first = std::min(first, i);
      last = i;
    }
    if (first == log.hits.size() || (k > 0 && first == last)) break;
    spans.push_back({first, last});
  }
  if (spans.empty()) throw Error(ErrorKind::LevelMismatch, "trajectory never reaches I^(0)");
  DecompositionAudit a;
  a.n = int(spans.size()) - 1;
  a.c = lower_bound_constant(torus);
  const auto& times = run.acc.times;
  for (int k = 0; k <= a.n; ++k) a.K = std::max(a.K, rescaled_level_bound(run.levels[k], times[k]));
  auto lam = [&](std::size_t i) { return log.hits[i].lambda; };
  a.gamma_T = log.n_final;
  a.rho1 = lam(spans[0].first);
  a.rho2 = log.n_final - lam(spans[0].last);
  HomologyVec sum = a.rho1 + a.rho2;
  a.bound_holds = true;
  for (int k = 0; k <= a.n; ++k) {
    HomologyVec piece;
    double bound = 0.0;
    if (k < a.n) {
      piece = (lam(spans[k + 1].first) - lam(spans[k].first)) + (lam(spans[k].last) - lam(spans[k + 1].last));
      bound = 2.0 * a.K * a.K / a.c * std::exp(times[k] - times[k + 1]);
    } else {
      piece = lam(spans[k].last) - lam(spans[k].first);
    }
    const Mat2i z = run.levels[k].basis.z();
    const auto m = in_basis(piece, z);
    AuditLevel L{k, times[k], m[0], m[1], bound};
    a.levels.push_back(L);
    sum += HomologyVec{m[0] * z.a + m[1] * z.c, m[0] * z.b + m[1] * z.d};
    if (k < a.n && double(std::llabs(m[0]) + std::llabs(m[1])) > bound) a.bound_holds = false;
  }
  a.reconstructed = sum;
  a.identity_holds = sum == log.n_final;
  a.top_nonzero = a.levels.back().m1 != 0 || a.levels.back().m2 != 0;
  a.pass = a.identity_holds && a.bound_holds;
  return a;
}

}  // namespace windtree
