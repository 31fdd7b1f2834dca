#pragma once

// Slit model: each obstacle is replaced by its diagonal with side
// identifications, and the quotient by the lattice is a slit torus.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <utility>
#include <vector>

#include "windtree/windtree.hpp"

namespace windtree {

enum class SlitCase { Case1, Case2, Case3 };

inline const char* to_string(SlitCase c) {
  switch (c) {
    case SlitCase::Case1: return "Case1";
    case SlitCase::Case2: return "Case2";
    case SlitCase::Case3: return "Case3";
  }
  return "?";
}

enum class PartKind { Translation, Rotation };

/// A sub-segment of one side of the slit, in horizontal coordinates
/// relative to the slit centre.
struct SlitPart {
  PartKind kind = PartKind::Translation;
  double lo = 0.0;
  double hi = 0.0;
  double pivot = 0.0;  // rotation: fixed abscissa
  double shift = 0.0;  // translation: x ↦ x + shift on the other side
};

/// Which part sits where on each side. Bottom is the side met by upward rays.
struct SlitLayout {
  std::array<SlitPart, 2> bottom;
  std::array<SlitPart, 2> top;
};

struct SlitSpec {
  SlitCase kind = SlitCase::Case1;
  double eta = 0.0;     // angle with the vertical
  double length = 0.0;  // √(a²+b²)
  double x_len = 0.0;   // translation part
  double y_len = 0.0;   // each rotation part
  std::array<Vec2, 2> endpoints;  // left (c3) and right (c1), relative to the lattice point
  double q = 0.0;       // half the horizontal extent of a rotation part
  SlitLayout layout;

  double left() const { return endpoints[0].x; }
  double right() const { return endpoints[1].x; }
  double width() const { return right() - left(); }
  double rise() const { return endpoints[1].y - endpoints[0].y; }

  /// y of the slit line above abscissa x.
  double y_at(double x) const {
    return endpoints[0].y + rise() * ((x - left()) / width());
  }

  const std::array<SlitPart, 2>& side(bool bottom) const {
    return bottom ? layout.bottom : layout.top;
  }

  const SlitPart& part_at(bool bottom, double x) const {
    const auto& s = side(bottom);
    return x < s[0].hi ? s[0] : s[1];
  }

  /// Sub-segment endpoints and rotation pivots on one side, sorted.
  std::array<double, 4> breakpoints(bool bottom) const {
    const auto& s = side(bottom);
    const double pivot = s[0].kind == PartKind::Rotation ? s[0].pivot : s[1].pivot;
    std::array<double, 4> b{s[0].lo, s[0].hi, pivot, s[1].hi};
    std::sort(b.begin(), b.end());
    return b;
  }
};

/// Slit with identifications for the obstacle of `params`.
inline SlitSpec build_slit(const SystemParams& params) {
  validate(params);
  const double a = params.a, b = params.b, th = params.theta;
  const double ac = a * std::cos(th), bs = b * std::sin(th);
  SlitSpec s;
  s.length = std::hypot(a, b);
  s.eta = th + std::atan(a / b);
  const double sin_eta = std::sin(s.eta);
  const ObstacleShape sh(a, b, th);
  s.endpoints = {sh.corner[3], sh.corner[1]};
  if (std::fabs(ac - bs) < 1e-12 * s.length) {
    s.kind = SlitCase::Case3;
    throw Error(ErrorKind::DegenerateCase3, "a cos(theta) = b sin(theta): no translation part");
  }
  const double L = s.left(), R = s.right();
  if (bs < ac) {
    s.kind = SlitCase::Case1;
    s.q = bs;
    s.x_len = (ac - bs) / sin_eta;
    s.y_len = 2.0 * bs / sin_eta;
    s.layout.bottom = {SlitPart{PartKind::Rotation, L, L + 2 * s.q, L + s.q, 0.0},
                       SlitPart{PartKind::Translation, L + 2 * s.q, R, 0.0, -2 * s.q}};
    s.layout.top = {SlitPart{PartKind::Translation, L, R - 2 * s.q, 0.0, 2 * s.q},
                    SlitPart{PartKind::Rotation, R - 2 * s.q, R, R - s.q, 0.0}};
  } else {
    s.kind = SlitCase::Case2;
    s.q = ac;
    s.x_len = (bs - ac) / sin_eta;
    s.y_len = 2.0 * ac / sin_eta;
    s.layout.bottom = {SlitPart{PartKind::Translation, L, R - 2 * s.q, 0.0, 2 * s.q},
                       SlitPart{PartKind::Rotation, R - 2 * s.q, R, R - s.q, 0.0}};
    s.layout.top = {SlitPart{PartKind::Rotation, L, L + 2 * s.q, L + s.q, 0.0},
                    SlitPart{PartKind::Translation, L + 2 * s.q, R, 0.0, -2 * s.q}};
  }
  return s;
}

// ---------------------------------------------------------------------------
// Singularities

struct SlitPoint {
  bool bottom = true;  // side; slit endpoints are reported on the bottom side
  double x = 0.0;
};

struct Singularity {
  double angle = 0.0;  // total cone angle
  std::vector<SlitPoint> points;
  bool is_pole() const { return std::fabs(angle - kPi) < 1e-9; }
};

/// Cone points of the slit surface, found by gluing the sector angles
/// around every sub-segment endpoint.
inline std::vector<Singularity> singularity_census(const SlitSpec& s) {
  struct Node { SlitPoint p; double angle; };
  std::vector<Node> nodes;
  const double tol = 1e-12 * s.width();
  auto find = [&](bool bottom, double x) -> std::size_t {
    const bool endpoint = std::fabs(x - s.left()) < tol || std::fabs(x - s.right()) < tol;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const bool same_side = endpoint || nodes[i].p.bottom == bottom;
      if (same_side && std::fabs(nodes[i].p.x - x) < tol) return i;
    }
    nodes.push_back({SlitPoint{endpoint ? true : bottom, x}, endpoint ? kTwoPi : kPi});
    return nodes.size() - 1;
  };
  for (bool bottom : {true, false})
    for (double x : s.breakpoints(bottom)) find(bottom, x);

  std::vector<std::size_t> parent(nodes.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto root = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  auto unite = [&](std::size_t i, std::size_t j) { parent[root(i)] = root(j); };

  for (bool bottom : {true, false})
    for (const SlitPart& p : s.side(bottom)) {
      if (p.kind == PartKind::Rotation) {
        unite(find(bottom, p.lo), find(bottom, p.hi));
      } else {
        unite(find(bottom, p.lo), find(!bottom, p.lo + p.shift));
        unite(find(bottom, p.hi), find(!bottom, p.hi + p.shift));
      }
    }

  std::vector<Singularity> out;
  std::vector<int> slot(nodes.size(), -1);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const std::size_t r = root(i);
    if (slot[r] < 0) {
      slot[r] = static_cast<int>(out.size());
      out.push_back({});
    }
    out[slot[r]].angle += nodes[i].angle;
    out[slot[r]].points.push_back(nodes[i].p);
  }
  // Points with cone angle 2π are regular.
  std::erase_if(out, [](const Singularity& g) { return std::fabs(g.angle - kTwoPi) < 1e-9; });
  std::sort(out.begin(), out.end(), [](const Singularity& x, const Singularity& y) {
    return x.angle < y.angle;
  });
  return out;
}

// ---------------------------------------------------------------------------
// Crossing the slit

struct SlitImage {
  double x = 0.0;
  bool bottom = true;  // side the image point lies on
  DirAngle dir;
  PartKind kind = PartKind::Translation;
};

/// Image of a hit on the slit. `from_below` is the side the ray arrives from.
inline SlitImage slit_transition(const SlitSpec& s, double x, bool from_below, DirAngle dir,
                                 double eps_corner) {
  for (double bp : s.breakpoints(from_below))
    if (std::fabs(x - bp) < eps_corner)
      throw Error(ErrorKind::SingularHit, "hit within eps_corner of a slit singularity");
  if (x <= s.left() || x >= s.right())
    throw Error(ErrorKind::ValidationError, "hit outside the slit");
  const SlitPart& p = s.part_at(from_below, x);
  if (p.kind == PartKind::Translation)
    return {x + p.shift, !from_below, dir, PartKind::Translation};
  return {2.0 * p.pivot - x, from_below, DirAngle(dir.phi() + kPi), PartKind::Rotation};
}

// ---------------------------------------------------------------------------
// Quotient torus

struct OEpsilonCheck {
  bool cond1 = false, cond2 = false, cond3 = false, cond4 = false;
  double epsilon = 0.0;
  bool all() const { return cond1 && cond2 && cond3 && cond4; }
};

enum class SFamily { S1, S2 };

struct SlitTorus {
  double h1 = 0, v1 = 0, h2 = 0, v2 = 0;  // torus basis u1, u2
  double h3 = 0, h4 = 0, v3 = 0, v4 = 0;  // translation and rotation part extents
  SFamily family = SFamily::S1;
  Vec2 slit_anchor;  // slit centre in the fundamental domain, from its base corner

  SystemParams params;
  SlitSpec slit;
  Mat2i to_params;  // rows: u1, u2 in the (e1, e2) of params
  Tolerance tol;

  Vec2 u1() const { return {h1, v1}; }
  Vec2 u2() const { return {h2, v2}; }
  double covolume() const { return std::fabs(cross(u1(), u2())); }
  double domain_diameter() const { return std::max(norm(u1() + u2()), norm(u1() - u2())); }

  /// Coordinates of a plane vector in the torus basis.
  std::pair<double, double> coords(Vec2 p) const {
    const double det = cross(u1(), u2());
    return {cross(p, u2()) / det, cross(u1(), p) / det};
  }

  Vec2 lattice_point(HomologyVec n) const {
    return double(n.n1) * u1() + double(n.n2) * u2();
  }

  /// Converts torus-basis coordinates to coordinates in the basis of params.
  HomologyVec in_params_basis(HomologyVec n) const {
    return {n.n1 * to_params.a + n.n2 * to_params.c, n.n1 * to_params.b + n.n2 * to_params.d};
  }

  OEpsilonCheck o_epsilon(double eps) const {
    OEpsilonCheck c;
    c.epsilon = eps;
    const double arg1 = std::atan2(v1, h1), arg2 = std::atan2(v2, h2);
    c.cond1 = 0.0 < arg1 && arg1 < kPi / 2 && kPi / 2 < arg2 && arg2 < kPi;
    c.cond2 = h3 + h4 < h1 - h2;
    c.cond3 = v3 + v4 < v2 - v1;
    c.cond4 = std::max(v3, v4) + eps < std::min(v1, v2);
    return c;
  }
};

/// Slit vector (left to right) fits in the centred fundamental domain of (u1, u2).
inline bool slit_fits(Vec2 half, Vec2 u1, Vec2 u2, double margin) {
  const double det = cross(u1, u2);
  const double s1 = std::fabs(cross(half, u2) / det), s2 = std::fabs(cross(u1, half) / det);
  return s1 < 0.5 - margin && s2 < 0.5 - margin;
}

namespace detail {

inline SlitTorus torus_shell(const SystemParams& params) {
  SlitTorus t;
  t.params = params;
  t.slit = build_slit(params);
  t.tol = Tolerance::for_obstacle(params.a, params.b);
  const double slope = std::fabs(t.slit.rise()) / t.slit.width();
  t.h3 = t.slit.x_len * std::sin(t.slit.eta);
  t.h4 = 2.0 * t.slit.q;
  t.v3 = t.h3 * slope;
  t.v4 = t.h4 * slope;
  t.family = t.slit.kind == SlitCase::Case1 ? SFamily::S1 : SFamily::S2;
  return t;
}

inline void set_basis(SlitTorus& t, Vec2 u1, Vec2 u2, const Mat2i& to_params) {
  t.h1 = u1.x; t.v1 = u1.y; t.h2 = u2.x; t.v2 = u2.y;
  t.to_params = to_params;
  t.slit_anchor = 0.5 * (u1 + u2);
}

inline Vec2 half_slit(const SlitSpec& s) { return 0.5 * (s.endpoints[1] - s.endpoints[0]); }

}  // namespace detail

/// Quotient surface with a fundamental domain containing the slit, chosen
/// among small unimodular changes of the reduced basis.
inline SlitTorus build_torus(const SystemParams& params, double epsilon = 0.0) {
  SlitTorus t = detail::torus_shell(params);
  const ReducedBasis rb = lattice_reduce(params.e1, params.e2);
  const Vec2 half = detail::half_slit(t.slit);

  struct Candidate { Mat2i m; Vec2 u1, u2; int score; double quality; };
  std::optional<Candidate> best;
  const int R = 3;
  for (int a = -R; a <= R; ++a)
    for (int b = -R; b <= R; ++b)
      for (int c = -R; c <= R; ++c)
        for (int d = -R; d <= R; ++d) {
          if (a * d - b * c != 1 && a * d - b * c != -1) continue;
          const Mat2i m{a, b, c, d};
          const auto [u1, u2] = apply_basis(m, rb.e1, rb.e2);
          if (!slit_fits(half, u1, u2, 1e-9)) continue;
          SlitTorus probe = t;
          detail::set_basis(probe, u1, u2, m);
          const OEpsilonCheck oc = probe.o_epsilon(epsilon);
          const int score = int(oc.cond1) + int(oc.cond2) + int(oc.cond3) + int(oc.cond4);
          // Prefer a large clearance between the slit and the torus heights,
          // then short bases.
          const double clearance = (std::min(u1.y, u2.y) - std::max(t.v3, t.v4)) /
                                   std::max(std::fabs(u1.y), std::fabs(u2.y));
          const double quality =
              clearance - 1e-3 * (norm(u1) + norm(u2)) / std::sqrt(probe.covolume());
          if (!best || score > best->score ||
              (score == best->score && quality > best->quality + 1e-12))
            best = Candidate{m, u1, u2, score, quality};
        }
  if (!best) throw Error(ErrorKind::SlitDoesNotEmbed, "no small fundamental domain contains the slit");
  detail::set_basis(t, best->u1, best->u2, best->m * rb.m);
  return t;
}

/// Quotient surface using the lattice basis of `params` as it is.
inline SlitTorus build_torus_in_basis(const SystemParams& params) {
  SlitTorus t = detail::torus_shell(params);
  if (!slit_fits(detail::half_slit(t.slit), params.e1, params.e2, 1e-9))
    throw Error(ErrorKind::SlitDoesNotEmbed, "slit does not fit the given fundamental domain");
  detail::set_basis(t, params.e1, params.e2, Mat2i::identity());
  return t;
}

// ---------------------------------------------------------------------------
// Homology

inline std::int64_t intersection_form(HomologyVec u, HomologyVec v) {
  return u.n1 * v.n2 - u.n2 * v.n1;
}

inline Vec2 reconstruct_displacement(HomologyVec n, Vec2 e1, Vec2 e2) {
  return double(n.n1) * e1 + double(n.n2) * e2;
}

inline Vec2 reconstruct_displacement(HomologyVec n, const SystemParams& p) {
  return reconstruct_displacement(n, p.e1, p.e2);
}

// ---------------------------------------------------------------------------
// Vertical flow on the slit torus

/// Horizontal piece of a transversal in the local coordinates of the
/// fundamental domain. Arc length runs leftward: s(x) = s_at_hi + (x_hi − x).
/// `d` is the cell offset of the piece's lift relative to the base point.
struct TransversalPiece {
  double y = 0.0;
  double x_lo = 0.0, x_hi = 0.0;
  double s_at_hi = 0.0;
  HomologyVec d;
};

struct TransversalHit {
  double time = 0.0;
  double s = 0.0;
  HomologyVec lambda;  // cell at the hit minus the piece offset
  bool up = true;      // direction of arrival
  std::size_t piece = 0;
};

/// Start given directly in domain coordinates; used for germs that leave
/// a singularity or a point of a transversal.
struct LocalStart {
  Vec2 p;
  HomologyVec cell;
  bool up = true;
  bool on_slit = false;
  bool on_transversal = false;
};

enum class FlowEvent { SlitCross, Transversal, Stopped };

/// Sink extensions: optional on_homology(time, n) receives every change of
/// the crossing counts, optional on_transversal(hit) every transversal hit.
class SurfaceTracer {
 public:
  SurfaceTracer(const SlitTorus& torus, Vec2 start, bool up)
      : t_(torus), up_(up), max_wraps_(std::int64_t(1) << 22) {
    if (!finite(start)) throw Error(ErrorKind::ValidationError, "start point is not finite");
    init_rates();
    const auto [c1, c2] = t_.coords(start);
    cell0_ = {static_cast<std::int64_t>(std::llround(c1)), static_cast<std::int64_t>(std::llround(c2))};
    cell_ = cell0_;
    p_ = start - t_.lattice_point(cell_);
    const SlitSpec& s = t_.slit;
    if (p_.x > s.left() && p_.x < s.right() &&
        std::fabs(p_.y - s.y_at(p_.x)) <= t_.tol.eps_geom * s.length)
      throw Error(ErrorKind::ValidationError, "start point lies on the slit");
  }

  SurfaceTracer(const SlitTorus& torus, const LocalStart& st)
      : t_(torus), up_(st.up), max_wraps_(std::int64_t(1) << 22) {
    if (!finite(st.p)) throw Error(ErrorKind::ValidationError, "start point is not finite");
    init_rates();
    cell0_ = st.cell;
    cell_ = st.cell;
    p_ = st.p;
    on_slit_ = st.on_slit;
    on_trans_ = st.on_transversal;
  }

  /// Pieces must outlive the tracer; hits beyond s_max are ignored.
  void set_transversal(const std::vector<TransversalPiece>* pieces, double s_max) {
    trans_ = pieces;
    s_max_ = s_max;
    trans_tol_ = 1e-12 * t_.params.lattice_scale();
  }
  void set_max_wraps(std::int64_t w) { max_wraps_ = w; }

  bool up() const { return up_; }
  double time() const { return time_; }
  HomologyVec cell() const { return cell_; }
  HomologyVec homology() const { return cell_ - cell0_; }
  Vec2 lift() const { return t_.lattice_point(cell_) + p_; }
  Vec2 local() const { return p_; }
  bool stopped() const { return stopped_.has_value(); }
  StopReason stop_reason() const { return stopped_.value_or(StopReason::MaxEvents); }
  const TransversalHit& last_hit() const { return hit_; }

  /// Flows to the next slit crossing, or stops at a singularity.
  template <class Sink>
  bool step(Sink& sink, double checkpoint_stride = 0.0) {
    for (;;) {
      const FlowEvent e = next(sink, checkpoint_stride);
      if (e == FlowEvent::SlitCross) return true;
      if (e == FlowEvent::Stopped) return false;
      if constexpr (requires { sink.on_transversal(hit_); }) sink.on_transversal(hit_);
    }
  }

  /// Flows to the next slit crossing or transversal hit.
  template <class Sink>
  FlowEvent next(Sink& sink, double checkpoint_stride = 0.0) {
    if (stopped_) return FlowEvent::Stopped;
    const SlitSpec& s = t_.slit;
    for (std::int64_t wraps = 0; wraps <= max_wraps_; ++wraps) {
      const double sg = up_ ? 1.0 : -1.0;
      double best = std::numeric_limits<double>::infinity();
      int what = -1;  // 0, 1: domain sides; 2: slit; 3: transversal
      std::size_t piece = 0;
      if (!on_slit_ && p_.x > s.left() && p_.x < s.right()) {
        const double dist = sg * (s.y_at(p_.x) - p_.y);
        if (dist >= 0.0) { best = dist; what = 2; }
      }
      if (trans_) {
        for (std::size_t k = 0; k < trans_->size(); ++k) {
          const TransversalPiece& pc = (*trans_)[k];
          if (p_.x < pc.x_lo || p_.x > pc.x_hi) continue;
          if (pc.s_at_hi + (pc.x_hi - p_.x) > s_max_) continue;
          const double dist = sg * (pc.y - p_.y);
          if (dist < 0.0 || (on_trans_ && dist <= trans_tol_)) continue;
          if (dist < best) { best = dist; what = 3; piece = k; }
        }
      }
      const auto [s1, s2] = t_.coords(p_);
      const double sig[2] = {s1, s2};
      for (int i = 0; i < 2; ++i) {
        const double rate = sg * g_[i];
        if (rate > 0.0) {
          const double tt = (0.5 - sig[i]) / rate;
          if (tt < best) { best = std::max(tt, 0.0); what = i; }
        } else if (rate < 0.0) {
          const double tt = (-0.5 - sig[i]) / rate;
          if (tt < best) { best = std::max(tt, 0.0); what = i; }
        }
      }
      advance(best, sink, checkpoint_stride);
      if (best > trans_tol_) on_trans_ = false;
      if (what == 2) {
        p_.y = s.y_at(p_.x);
        return cross_slit(sink) ? FlowEvent::SlitCross : FlowEvent::Stopped;
      }
      if (what == 3) {
        const TransversalPiece& pc = (*trans_)[piece];
        p_.y = pc.y;
        on_trans_ = true;
        hit_ = {time_, pc.s_at_hi + (pc.x_hi - p_.x), cell_ - pc.d, up_, piece};
        return FlowEvent::Transversal;
      }
      const double rate = sg * g_[what];
      const std::int64_t step = rate > 0.0 ? 1 : -1;
      if (what == 0) { cell_.n1 += step; p_ -= double(step) * t_.u1(); }
      else { cell_.n2 += step; p_ -= double(step) * t_.u2(); }
      on_slit_ = false;
      if constexpr (requires { sink.on_homology(time_, HomologyVec{}); })
        sink.on_homology(time_, homology());
    }
    stopped_ = StopReason::Escaped;
    return FlowEvent::Stopped;
  }

 private:
  void init_rates() {
    const double det = cross(t_.u1(), t_.u2());
    g_ = {-t_.h2 / det, t_.h1 / det};
  }

  template <class Sink>
  void advance(double dy, Sink& sink, double stride) {
    const double sg = up_ ? 1.0 : -1.0;
    if (stride > 0.0) {
      if (next_ck_ < 0.0) next_ck_ = 0.0;
      while (next_ck_ <= time_ + dy) {
        const Vec2 at = t_.lattice_point(cell_) + Vec2{p_.x, p_.y + sg * (next_ck_ - time_)};
        sink.on_checkpoint(Checkpoint{next_ck_, at, homology()});
        next_ck_ += stride;
      }
    }
    p_.y += sg * dy;
    time_ += dy;
  }

  template <class Sink>
  bool cross_slit(Sink& sink) {
    const SlitSpec& s = t_.slit;
    const HomologyVec obst = t_.in_params_basis(cell_);
    TraceEvent ev;
    ev.kind = EventKind::SlitCross;
    ev.obstacle_i = obst.n1;
    ev.obstacle_j = obst.n2;
    ev.point = lift();
    ev.arclength = time_;
    const DirAngle d = up_ ? DirAngle::up() : DirAngle::down();
    try {
      const SlitImage img = slit_transition(s, p_.x, up_, d, t_.tol.eps_corner);
      p_ = {img.x, s.y_at(img.x)};
      up_ = img.dir == DirAngle::up();
      ev.dir_after = up_ ? DirAngle::up() : DirAngle::down();
      ev.jump_to = lift();
      ev.side = (img.kind == PartKind::Rotation ? 1 : 0);
      on_slit_ = true;
      sink.on_event(ev);
      return true;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::SingularHit) throw;
      ev.kind = EventKind::CornerStop;
      ev.dir_after = d;
      ev.jump_to = ev.point;
      sink.on_event(ev);
      stopped_ = StopReason::SingularHit;
      return false;
    }
  }

  const SlitTorus& t_;
  bool up_;
  std::int64_t max_wraps_;
  std::array<double, 2> g_{};  // torus coordinates per unit of upward motion
  HomologyVec cell0_, cell_;
  Vec2 p_;
  double time_ = 0.0;
  double next_ck_ = -1.0;
  bool on_slit_ = false;
  bool on_trans_ = false;
  const std::vector<TransversalPiece>* trans_ = nullptr;
  double s_max_ = 0.0;
  double trans_tol_ = 0.0;
  TransversalHit hit_;
  std::optional<StopReason> stopped_;
};

/// Record with the homology history of a surface trace.
struct SurfaceRecord : TrajectoryRecord {
  std::vector<std::pair<double, HomologyVec>> homology_log;  // (time, n) after each change
};

struct SurfaceSink {
  SurfaceRecord* rec;
  bool store = true;
  void on_event(const TraceEvent& e) {
    if (store) rec->events.push_back(e);
  }
  void on_checkpoint(const Checkpoint& c) { rec->checkpoints.push_back(c); }
  void on_homology(double t, HomologyVec n) {
    if (store) rec->homology_log.emplace_back(t, n);
  }
};

/// Flows vertically for at most max_events slit crossings.
inline SurfaceRecord trace_surface(const SlitTorus& torus, Vec2 start, bool up,
                                   std::int64_t max_events, double checkpoint_stride = 0.0,
                                   bool store_events = true) {
  SurfaceRecord rec;
  rec.params = torus.params;
  rec.start = start;
  rec.initial_dir = up ? DirAngle::up() : DirAngle::down();
  SurfaceTracer tr(torus, start, up);
  SurfaceSink sink{&rec, store_events};
  std::int64_t n = 0;
  while (n < max_events && tr.step(sink, checkpoint_stride)) ++n;
  if (tr.stopped() && tr.stop_reason() == StopReason::SingularHit) ++n;
  rec.obstacle_visits = n;
  rec.stop = tr.stopped() ? tr.stop_reason() : StopReason::MaxEvents;
  rec.arclength = tr.time();
  rec.crossings = tr.homology();
  rec.final_pos = tr.lift();
  rec.final_up = tr.up();
  return rec;
}

/// Homology class of the trajectory closed at time T.
inline HomologyVec gamma_T(const SurfaceRecord& rec, double T) {
  if (T < 0.0 || T > rec.arclength * (1 + 1e-15))
    throw Error(ErrorKind::TbeyondTrace, "T outside the traced range");
  const auto& log = rec.homology_log;
  auto it = std::upper_bound(log.begin(), log.end(), T,
                             [](double v, const auto& e) { return v < e.first; });
  if (it == log.begin()) return {};
  return std::prev(it)->second;
}

}  // namespace windtree
