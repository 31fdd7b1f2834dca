#pragma once

// Renormalization of the vertical flow on the slit torus: a horizontal
// transversal, its first-return interval exchange with flips, induction on
// shrinking initial segments, and the homology cocycle along the way.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <type_traits>
#include <ostream>
#include <vector>

#include "windtree/errors.hpp"
#include "windtree/geom.hpp"
#include "windtree/slit.hpp"
#include "windtree/windtree.hpp"

namespace windtree {

// ---------------------------------------------------------------------------
// Interval exchanges with flips

/// One branch of a first-return map. Copy 0 holds points leaving the
/// transversal upward, copy 1 those leaving downward.
template <class R>
struct IETBranch {
  int copy = 0;
  R lo = 0, hi = 0;
  int img_copy = 0;
  R img_lo = 0, img_hi = 0;
  bool flip = false;
  HomologyVec homology;  // class of the return loop closed along the transversal
  long double height = 0;  // vertical length of the return

  R length() const { return hi - lo; }
  R map(R x) const { return flip ? img_hi - (x - lo) : img_lo + (x - lo); }
};

/// Basis of H1 for one level, rows of `z`, with the vertical lengths of
/// loops representing the rows.
struct LevelBasis {
  std::array<HomologyVec, 2> rows{HomologyVec{1, 0}, HomologyVec{0, 1}};
  std::array<double, 2> lengths{};
  Mat2i z() const { return {rows[0].n1, rows[0].n2, rows[1].n1, rows[1].n2}; }
};

template <class R>
struct IETWithFlips {
  R total_length = 0;
  int copies = 1;
  std::vector<IETBranch<R>> branches;  // sorted by (copy, lo)
  LevelBasis basis;

  std::size_t find(int copy, R x) const {
    auto it = std::upper_bound(branches.begin(), branches.end(), std::pair<int, R>{copy, x},
                               [](const std::pair<int, R>& v, const IETBranch<R>& b) {
                                 return v.first < b.copy || (v.first == b.copy && v.second < b.lo);
                               });
    if (it == branches.begin()) return 0;
    return static_cast<std::size_t>(std::prev(it) - branches.begin());
  }

  std::pair<int, R> apply(int copy, R x) const {
    const auto& b = branches[find(copy, x)];
    return {b.img_copy, b.map(x)};
  }

  bool has_flips() const {
    return std::any_of(branches.begin(), branches.end(), [](const auto& b) { return b.flip; });
  }
};

inline std::int64_t det(HomologyVec a, HomologyVec b) { return a.n1 * b.n2 - a.n2 * b.n1; }

/// Basis built from return loops: the lightest primitive class, completed
/// by a Euclidean descent on intersection numbers with it. Lengths are
/// vertical lengths of the concatenated loops.
template <class R>
LevelBasis choose_level_basis(const IETWithFlips<R>& iet) {
  struct Cand {
    HomologyVec h;
    double w;
  };
  std::vector<Cand> c;
  for (const auto& b : iet.branches)
    if (b.homology.n1 != 0 || b.homology.n2 != 0) c.push_back({b.homology, double(b.height)});
  if (c.empty()) throw Error(ErrorKind::LevelMismatch, "no nontrivial return class");
  std::stable_sort(c.begin(), c.end(), [](const Cand& x, const Cand& y) { return x.w < y.w; });
  auto gcd_of = [](HomologyVec h) { return std::gcd(std::llabs(h.n1), std::llabs(h.n2)); };
  auto prim = std::find_if(c.begin(), c.end(), [&](const Cand& x) { return gcd_of(x.h) == 1; });
  Cand u = prim != c.end() ? *prim : c.front();
  const std::int64_t g = gcd_of(u.h);
  u.h = {u.h.n1 / g, u.h.n2 / g};
  struct Item {
    HomologyVec h;
    double w;
    std::int64_t d;
  };
  std::vector<Item> v;
  for (const auto& x : c) {
    const std::int64_t d = det(u.h, x.h);
    if (d != 0) v.push_back({x.h, x.w, d});
  }
  for (;;) {
    if (v.empty()) throw Error(ErrorKind::LevelMismatch, "return classes do not span homology");
    auto piv = std::min_element(v.begin(), v.end(), [](const Item& x, const Item& y) {
      return std::llabs(x.d) < std::llabs(y.d) || (std::llabs(x.d) == std::llabs(y.d) && x.w < y.w);
    });
    const Item p = *piv;
    if (std::llabs(p.d) == 1) break;
    std::vector<Item> next{p};
    for (const auto& x : v) {
      if (&x == &*piv) continue;
      const std::int64_t q = x.d / p.d;
      Item y{x.h - HomologyVec{q * p.h.n1, q * p.h.n2}, x.w + double(std::llabs(q)) * p.w, x.d - q * p.d};
      if (y.d != 0) next.push_back(y);
    }
    if (next.size() == 1) throw Error(ErrorKind::LevelMismatch, "return classes do not span homology");
    v = std::move(next);
  }
  const Item best = *std::min_element(v.begin(), v.end(), [](const Item& x, const Item& y) {
    const bool ux = std::llabs(x.d) == 1, uy = std::llabs(y.d) == 1;
    return ux != uy ? ux : x.w < y.w;
  });
  HomologyVec second = best.h;
  if (best.d < 0) second = HomologyVec{-second.n1, -second.n2};
  LevelBasis out;
  out.rows = {u.h, second};
  out.lengths = {u.w, best.w};
  return out;
}

/// Largest gap or overlap of the domain and image tilings, relative to the
/// total length.
template <class R>
double partition_defect(const IETWithFlips<R>& iet) {
  double worst = 0.0;
  for (int c = 0; c < iet.copies; ++c) {
    std::vector<std::pair<R, R>> dom, img;
    for (const auto& b : iet.branches) {
      if (b.copy == c) dom.emplace_back(b.lo, b.hi);
      if (b.img_copy == c) img.emplace_back(b.img_lo, b.img_hi);
    }
    for (auto* v : {&dom, &img}) {
      std::sort(v->begin(), v->end());
      R at = 0;
      for (const auto& [lo, hi] : *v) {
        worst = std::max(worst, std::fabs(double(lo) - double(at)));
        at = hi;
      }
      worst = std::max(worst, std::fabs(double(iet.total_length) - double(at)));
    }
  }
  return worst / double(iet.total_length);
}

// ---------------------------------------------------------------------------
// Induction

template <class R>
struct InductionStep {
  IETWithFlips<R> iet;
  std::vector<std::vector<int>> incidence;  // new branch × old branch visit counts
  Mat2i B;                                  // new level basis in terms of the old one
  double dt = 0.0;
};

inline Mat2i inverse_unimodular(const Mat2i& m) {
  const std::int64_t d = m.det();
  if (d != 1 && d != -1) throw Error(ErrorKind::LevelMismatch, "basis matrix is not unimodular");
  return {m.d * d, -m.b * d, -m.c * d, m.a * d};
}

/// First return of `iet` to the initial segment of relative length `ratio`
/// on every copy.
template <class R>
InductionStep<R> induce(const IETWithFlips<R>& iet, long double ratio, int word_cap = 1 << 16) {
  if (!(ratio > 0 && ratio <= 1)) throw Error(ErrorKind::ValidationError, "ratio must lie in (0, 1]");
  const R J = ratio == 1 ? iet.total_length
                         : static_cast<R>(static_cast<long double>(iet.total_length) * ratio);
  if (!(J > 0)) throw Error(ErrorKind::InductionBlowup, "interval below resolution");
  R sliver = 0;
  if constexpr (std::is_floating_point_v<R>) sliver = iet.total_length * R(64) * std::numeric_limits<R>::epsilon();
  const std::size_t nold = iet.branches.size();

  struct Piece {
    int copy;
    R lo, hi;
    int cur_copy;
    R cur_lo, cur_hi;
    bool rev;
    HomologyVec h;
    long double height;
    std::vector<int> counts;
    int steps;
  };
  std::vector<Piece> todo, done;
  for (int c = 0; c < iet.copies; ++c)
    todo.push_back({c, 0, J, c, 0, J, false, {}, 0, std::vector<int>(nold, 0), 0});

  while (!todo.empty()) {
    Piece p = std::move(todo.back());
    todo.pop_back();
    if (p.steps >= word_cap) throw Error(ErrorKind::InductionBlowup, "return word exceeds the cap");
    for (std::size_t k = iet.find(p.cur_copy, p.cur_lo); k < nold; ++k) {
      const auto& b = iet.branches[k];
      if (b.copy != p.cur_copy || b.lo >= p.cur_hi) break;
      const R a = std::max(p.cur_lo, b.lo), e = std::min(p.cur_hi, b.hi);
      if (e - a <= sliver) continue;
      Piece q{p.copy, 0, 0, b.img_copy, 0, 0, p.rev != b.flip, p.h + b.homology,
              p.height + b.height, p.counts, p.steps + 1};
      q.counts[k] += 1;
      if (!p.rev) { q.lo = p.lo + (a - p.cur_lo); q.hi = p.lo + (e - p.cur_lo); }
      else { q.lo = p.lo + (p.cur_hi - e); q.hi = p.lo + (p.cur_hi - a); }
      if (!b.flip) { q.cur_lo = b.img_lo + (a - b.lo); q.cur_hi = b.img_lo + (e - b.lo); }
      else { q.cur_lo = b.img_hi - (e - b.lo); q.cur_hi = b.img_hi - (a - b.lo); }
      if (q.cur_hi <= J + sliver) {
        q.cur_hi = std::min(q.cur_hi, J);
        done.push_back(std::move(q));
      } else if (q.cur_lo >= J - sliver) {
        todo.push_back(std::move(q));
      } else {
        Piece out = q;
        if (!q.rev) {
          const R split = q.lo + (J - q.cur_lo);
          q.hi = split;
          out.lo = split;
        } else {
          const R split = q.lo + (q.cur_hi - J);
          q.lo = split;
          out.hi = split;
        }
        q.cur_hi = J;
        out.cur_lo = J;
        done.push_back(std::move(q));
        todo.push_back(std::move(out));
      }
    }
  }

  std::sort(done.begin(), done.end(), [](const Piece& x, const Piece& y) {
    return x.copy < y.copy || (x.copy == y.copy && x.lo < y.lo);
  });
  // Orbits passing either side of an old endpoint land side by side with the
  // same class and height; such neighbours form a single branch.
  R join = 0;
  if constexpr (std::is_floating_point_v<R>) join = J * R(1e-12);
  auto dist = [](R x, R y) { return x < y ? y - x : x - y; };
  std::vector<Piece> merged;
  for (auto& p : done) {
    if (!merged.empty()) {
      Piece& m = merged.back();
      const bool adjacent = m.copy == p.copy && dist(m.hi, p.lo) <= join &&
                            m.cur_copy == p.cur_copy && m.rev == p.rev && m.h == p.h &&
                            std::fabs(m.height - p.height) <= 1e-9L * (m.height + p.height);
      const bool img_next = !p.rev ? dist(m.cur_hi, p.cur_lo) <= join
                                   : dist(p.cur_hi, m.cur_lo) <= join;
      if (adjacent && img_next) {
        m.hi = p.hi;
        if (!p.rev) m.cur_hi = p.cur_hi;
        else m.cur_lo = p.cur_lo;
        continue;
      }
    }
    merged.push_back(std::move(p));
  }

  InductionStep<R> out;
  out.iet.total_length = J;
  out.iet.copies = iet.copies;
  for (auto& p : merged) {
    IETBranch<R> b;
    b.copy = p.copy;
    b.lo = p.lo;
    b.hi = p.hi;
    b.img_copy = p.cur_copy;
    b.img_lo = p.cur_lo;
    b.img_hi = p.cur_hi;
    b.flip = p.rev;
    b.homology = p.h;
    b.height = p.height;
    out.iet.branches.push_back(b);
    out.incidence.push_back(std::move(p.counts));
  }
  out.iet.basis = choose_level_basis(out.iet);
  out.B = out.iet.basis.z() * inverse_unimodular(iet.basis.z());
  out.dt = double(std::log(static_cast<long double>(iet.total_length) / static_cast<long double>(J)));
  return out;
}

// ---------------------------------------------------------------------------
// Assembling a first-return map from a flow

template <class R>
struct FlowReturn {
  int copy = 0;  // copy of the arrival: 0 if arriving upward
  R s = 0;
  HomologyVec homology;
  long double height = 0;
};

namespace detail {

/// Builds the branches from the breakpoints of each copy and one flow per
/// continuity interval (evaluated at its midpoint).
template <class R, class Flow>
IETWithFlips<R> assemble_iet(R length, int copies, std::vector<std::vector<R>> cuts, Flow&& flow) {
  IETWithFlips<R> iet;
  iet.total_length = length;
  iet.copies = copies;
  const R merge = length * R(1e-13);
  for (int c = 0; c < copies; ++c) {
    auto& v = cuts[c];
    v.push_back(0);
    v.push_back(length);
    std::sort(v.begin(), v.end());
    std::vector<R> u;
    for (R x : v) {
      if (x < 0 || x > length) continue;
      if (u.empty() || x - u.back() > merge) u.push_back(x);
      else if (x == length) u.back() = length;
    }
    for (std::size_t i = 0; i + 1 < u.size(); ++i) {
      const R lo = u[i], hi = u[i + 1], mid = (lo + hi) / 2;
      const FlowReturn<R> r = flow(c, mid);
      IETBranch<R> b;
      b.copy = c;
      b.lo = lo;
      b.hi = hi;
      b.img_copy = r.copy;
      b.flip = r.copy != c;
      const R half = (hi - lo) / 2;
      b.img_lo = r.s - half;
      b.img_hi = r.s + half;
      b.homology = r.homology;
      b.height = r.height;
      iet.branches.push_back(b);
    }
  }
  // Snap image endpoints onto the common tiling to remove flow rounding.
  for (int c = 0; c < copies; ++c) {
    std::vector<IETBranch<R>*> img;
    for (auto& b : iet.branches)
      if (b.img_copy == c) img.push_back(&b);
    std::sort(img.begin(), img.end(), [](auto* x, auto* y) { return x->img_lo < y->img_lo; });
    R at = 0;
    for (auto* b : img) {
      const R len = b->hi - b->lo;
      if (std::fabs(b->img_lo - at) <= length * R(1e-9)) {
        b->img_lo = at;
        b->img_hi = at + len;
      }
      at = b->img_hi;
    }
  }
  iet.basis = choose_level_basis(iet);
  return iet;
}

}  // namespace detail

/// First return of the vertical flow on the unslit torus spanned by
/// (1, 0) and (alpha, 1) to the horizontal unit segment at height 0,
/// alpha ∈ (0, 1). Points leave upward; classes are in the (u1, u2) basis.
template <class R>
IETWithFlips<R> linear_flow_iet(R alpha) {
  if (!(alpha > 0 && alpha < 1)) throw Error(ErrorKind::ValidationError, "alpha must lie in (0, 1)");
  std::vector<std::vector<R>> cuts(1);
  cuts[0].push_back(alpha);
  return detail::assemble_iet<R>(R(1), 1, cuts, [&](int, R x) {
    // (x, 1) = u2 + (x − alpha, 0); wrap once along u1 when negative.
    FlowReturn<R> r;
    r.copy = 0;
    r.height = 1;
    R y = x - alpha;
    r.homology = {0, 1};
    if (y < 0) {
      y += 1;
      r.homology = {-1, 1};
    }
    r.s = y;
    return r;
  });
}

// ---------------------------------------------------------------------------
// Transversal

struct TransversalOptions {
  double run_factor = 3.0;        // initial run length, in lattice scales
  double height_factor = 1000.0;  // return cap, in lattice scales
};

/// Horizontal segment leaving the left slit endpoint to the left, cut into
/// pieces by the sides of the fundamental domain.
struct TransversalSegment {
  std::size_t base_singularity = 0;  // index into singularity_census
  double length = 0.0;
  std::vector<double> marked_points;  // first hits of the vertical separatrices
  std::vector<TransversalPiece> pieces;
  double height_cap = 0.0;

  /// Start of the vertical flow leaving the point at arc length s.
  LocalStart start_at(double s, bool up) const {
    for (const auto& pc : pieces) {
      const double span = pc.x_hi - pc.x_lo;
      if (s >= pc.s_at_hi && s <= pc.s_at_hi + span) {
        LocalStart st;
        st.p = {pc.x_hi - (s - pc.s_at_hi), pc.y};
        st.cell = pc.d;
        st.up = up;
        st.on_transversal = true;
        return st;
      }
    }
    throw Error(ErrorKind::ValidationError, "arc length outside the transversal");
  }
};

struct SeparatrixGerm {
  Vec2 p;  // local coordinates
  bool up;
  bool on_slit;
};

/// The vertical prongs at the cone points: both directions at the slit
/// endpoints, one direction (away from the slit side) at every interior
/// breakpoint.
inline std::vector<SeparatrixGerm> separatrix_germs(const SlitSpec& s) {
  std::vector<SeparatrixGerm> g;
  for (const Vec2& e : s.endpoints) {
    g.push_back({e, true, false});
    g.push_back({e, false, false});
  }
  const double tol = 1e-12 * s.width();
  for (bool bottom : {true, false})
    for (double x : s.breakpoints(bottom))
      if (x > s.left() + tol && x < s.right() - tol) g.push_back({{x, s.y_at(x)}, !bottom, true});
  return g;
}

namespace detail {

struct FirstHit {
  bool hit = false;
  bool singular = false;
  TransversalHit at;
};

struct NullSink {
  void on_event(const TraceEvent&) {}
  void on_checkpoint(const Checkpoint&) {}
};

inline FirstHit flow_to_transversal(const SlitTorus& torus, const LocalStart& st,
                                    const std::vector<TransversalPiece>& pieces, double s_max,
                                    double height_cap) {
  SurfaceTracer tr(torus, st);
  tr.set_transversal(&pieces, s_max);
  NullSink sink;
  FirstHit out;
  while (tr.time() <= height_cap) {
    const FlowEvent e = tr.next(sink);
    if (e == FlowEvent::Transversal) {
      out.hit = true;
      out.at = tr.last_hit();
      return out;
    }
    if (e == FlowEvent::Stopped) {
      out.singular = tr.stop_reason() == StopReason::SingularHit;
      if (!out.singular) break;
      return out;
    }
  }
  throw Error(ErrorKind::NonReturningOrbit, "vertical orbit does not return to the transversal");
}

inline std::vector<TransversalPiece> horizontal_run(const SlitTorus& torus, double max_len) {
  const SlitSpec& s = torus.slit;
  const double tol = 1e-12 * torus.params.lattice_scale();
  const auto [r1, r2] = torus.coords(Vec2{-1.0, 0.0});
  const double rate[2] = {r1, r2};
  std::vector<TransversalPiece> out;
  Vec2 p = s.endpoints[0];
  HomologyVec cell;
  double done = 0.0;
  while (done < max_len) {
    double len = max_len - done;
    int what = -1;
    const double lo_y = std::min(s.endpoints[0].y, s.endpoints[1].y);
    const double hi_y = std::max(s.endpoints[0].y, s.endpoints[1].y);
    if (p.y >= lo_y && p.y <= hi_y) {
      const double xh = s.left() + (p.y - s.endpoints[0].y) * s.width() / s.rise();
      const double dist = p.x - xh;
      if (dist > tol && dist < len) { len = dist; what = 2; }
    }
    const auto [c1, c2] = torus.coords(p);
    const double sig[2] = {c1, c2};
    for (int i = 0; i < 2; ++i) {
      double tt = std::numeric_limits<double>::infinity();
      if (rate[i] > 0.0) tt = (0.5 - sig[i]) / rate[i];
      else if (rate[i] < 0.0) tt = (-0.5 - sig[i]) / rate[i];
      if (tt < len) { len = std::max(tt, 0.0); what = i; }
    }
    if (len > 0.0) out.push_back({p.y, p.x - len, p.x, done, cell});
    done += len;
    p.x -= len;
    if (what == 2 || what < 0) break;
    const std::int64_t step = rate[what] > 0.0 ? 1 : -1;
    if (what == 0) { cell.n1 += step; p -= double(step) * torus.u1(); }
    else { cell.n2 += step; p -= double(step) * torus.u2(); }
  }
  return out;
}

inline std::vector<TransversalPiece> truncate_pieces(std::vector<TransversalPiece> v, double len) {
  std::vector<TransversalPiece> out;
  for (auto pc : v) {
    if (pc.s_at_hi >= len) break;
    const double span = pc.x_hi - pc.x_lo;
    if (pc.s_at_hi + span > len) pc.x_lo = pc.x_hi - (len - pc.s_at_hi);
    out.push_back(pc);
  }
  return out;
}

}  // namespace detail

/// Segment from the left slit endpoint, trimmed at the last first hit of
/// the vertical separatrices.
inline TransversalSegment build_transversal(const SlitTorus& torus, const TransversalOptions& opt = {}) {
  const SlitSpec& s = torus.slit;
  if (!(s.length > 0.0)) throw Error(ErrorKind::DegenerateSlit, "no singularities without a slit");
  const double scale = torus.params.lattice_scale();
  TransversalSegment I;
  I.height_cap = opt.height_factor * scale;
  const auto census = singularity_census(s);
  const double tol = 1e-9 * s.width();
  for (std::size_t i = 0; i < census.size(); ++i)
    for (const auto& pt : census[i].points)
      if (std::fabs(pt.x - s.left()) < tol) I.base_singularity = i;

  const auto run = detail::horizontal_run(torus, opt.run_factor * scale);
  if (run.empty()) throw Error(ErrorKind::DegenerateSlit, "horizontal separatrix is blocked");
  const double run_len = run.back().s_at_hi + (run.back().x_hi - run.back().x_lo);
  const double eps = torus.tol.eps_corner * scale;
  for (const auto& g : separatrix_germs(s)) {
    LocalStart st;
    st.p = g.p;
    st.up = g.up;
    st.on_slit = g.on_slit;
    st.on_transversal = g.p == s.endpoints[0];
    const auto h = detail::flow_to_transversal(torus, st, run, run_len, I.height_cap);
    if (h.singular || h.at.s < eps)
      throw Error(ErrorKind::SaddleConnectionSuspected, "separatrix returns to a singularity");
    I.marked_points.push_back(h.at.s);
  }
  std::sort(I.marked_points.begin(), I.marked_points.end());
  I.length = I.marked_points.back();
  I.pieces = detail::truncate_pieces(run, I.length);
  return I;
}

/// First return of the vertical flow to I, on the doubled interval.
template <class R = long double>
IETWithFlips<R> first_return_iet(const SlitTorus& torus, const TransversalSegment& I) {
  const SlitSpec& s = torus.slit;
  std::vector<std::vector<R>> cuts(2);
  auto add = [&](const detail::FirstHit& h) {
    if (!h.hit) return;
    cuts[h.at.up ? 1 : 0].push_back(R(h.at.s));
  };
  for (const auto& g : separatrix_germs(s)) {
    LocalStart st;
    st.p = g.p;
    st.up = g.up;
    st.on_slit = g.on_slit;
    st.on_transversal = g.p == s.endpoints[0];
    add(detail::flow_to_transversal(torus, st, I.pieces, I.length, I.height_cap));
  }
  for (bool up : {true, false})
    add(detail::flow_to_transversal(torus, I.start_at(I.length, up), I.pieces, I.length, I.height_cap));
  return detail::assemble_iet<R>(R(I.length), 2, cuts, [&](int copy, R x) {
    const auto h = detail::flow_to_transversal(torus, I.start_at(double(x), copy == 0), I.pieces,
                                               I.length, I.height_cap);
    if (!h.hit) throw Error(ErrorKind::SaddleConnectionSuspected, "interior orbit hits a singularity");
    FlowReturn<R> r;
    r.copy = h.at.up ? 0 : 1;
    r.s = R(h.at.s);
    r.homology = h.at.lambda;
    r.height = h.at.time;
    return r;
  });
}

// ---------------------------------------------------------------------------
// Exact linear involutions

/// Integer lengths: the induction runs in exact arithmetic so that the
/// involution symmetry T⁻¹ = ι T ι of the doubled interval survives.
using ExactLength = __int128;

/// Exact copy of a doubled first-return map. Each branch is paired with its
/// inverse (domain and image exchanged, copies swapped); paired branches get
/// one common integer length and positions are rebuilt from cumulative sums.
inline IETWithFlips<ExactLength> exact_involution(const IETWithFlips<long double>& iet, int bits = 100) {
  if (iet.copies != 2) throw Error(ErrorKind::ValidationError, "involution needs two copies");
  const auto& br = iet.branches;
  const std::size_t n = br.size();
  const long double tol = 1e-9L * iet.total_length;
  std::vector<std::size_t> partner(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const auto& a = br[i];
      const auto& b = br[j];
      if (b.copy != 1 - a.img_copy || b.img_copy != 1 - a.copy) continue;
      if (std::fabs(b.lo - a.img_lo) > tol || std::fabs(b.hi - a.img_hi) > tol) continue;
      partner[i] = j;
      break;
    }
    if (partner[i] == n || !(br[partner[i]].homology == HomologyVec{-br[i].homology.n1, -br[i].homology.n2}))
      throw Error(ErrorKind::LevelMismatch, "first-return map is not an involution");
  }
  const long double scale = std::ldexp(1.0L, bits) / iet.total_length;
  const long double lowscale = std::ldexp(1.0L, bits - 60);
  std::vector<ExactLength> len(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = partner[i];
    if (j < i) {
      len[i] = len[j];
      continue;
    }
    // 60 significant bits from the data, the rest from a fixed hash so the
    // lengths carry no common power of two.
    const long double x = (br[i].length() + br[j].length()) / 2 * scale / lowscale;
    const ExactLength high = static_cast<ExactLength>(std::llround(x));
    std::uint64_t h = 0x9E3779B97F4A7C15ull * (i + 1);
    h ^= h >> 31;
    h *= 0xBF58476D1CE4E5B9ull;
    h ^= h >> 29;
    const ExactLength low = static_cast<ExactLength>(h % static_cast<std::uint64_t>(lowscale));
    len[i] = high * static_cast<ExactLength>(lowscale) + low;
  }
  auto totals = [&](int c) {
    ExactLength t = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (br[i].copy == c) t += len[i];
    return t;
  };
  ExactLength delta = totals(0) - totals(1);
  if (delta != 0) {
    if (delta % 2 != 0) {
      for (auto& l : len) l *= 2;
      delta *= 2;
    }
    // Pairs inside one copy change that copy's total by twice their length.
    std::size_t fix = n;
    for (std::size_t i = 0; i < n && fix == n; ++i)
      if (br[i].copy == br[partner[i]].copy && br[i].copy == (delta > 0 ? 0 : 1) && partner[i] != i) fix = i;
    if (fix == n) throw Error(ErrorKind::LevelMismatch, "copies cannot be balanced");
    const ExactLength d = (delta > 0 ? delta : -delta) / 2;
    len[fix] -= d;
    len[partner[fix]] = len[fix];
  }
  IETWithFlips<ExactLength> out;
  out.copies = 2;
  out.total_length = totals(0);
  out.branches.resize(n);
  for (int c = 0; c < 2; ++c) {
    std::vector<std::size_t> dom, img;
    for (std::size_t i = 0; i < n; ++i) {
      if (br[i].copy == c) dom.push_back(i);
      if (br[i].img_copy == c) img.push_back(i);
    }
    std::sort(dom.begin(), dom.end(), [&](auto x, auto y) { return br[x].lo < br[y].lo; });
    std::sort(img.begin(), img.end(), [&](auto x, auto y) { return br[x].img_lo < br[y].img_lo; });
    ExactLength at = 0;
    for (auto i : dom) {
      out.branches[i].lo = at;
      at += len[i];
      out.branches[i].hi = at;
    }
    at = 0;
    for (auto i : img) {
      out.branches[i].img_lo = at;
      at += len[i];
      out.branches[i].img_hi = at;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    auto& b = out.branches[i];
    b.copy = br[i].copy;
    b.img_copy = br[i].img_copy;
    b.flip = br[i].flip;
    b.homology = br[i].homology;
    b.height = br[i].height;
  }
  std::sort(out.branches.begin(), out.branches.end(), [](const auto& x, const auto& y) {
    return x.copy < y.copy || (x.copy == y.copy && x.lo < y.lo);
  });
  out.basis = choose_level_basis(out);
  return out;
}

/// Constant bounding the return heights and the basis loops from both sides.
template <class R>
double zippered_bounds(const IETWithFlips<R>& iet, double zeta1 = 1.0, double zeta2 = 1.0) {
  if (iet.branches.empty()) throw Error(ErrorKind::ValidationError, "empty interval exchange");
  double hmax = 0.0, hmin = std::numeric_limits<double>::infinity();
  for (const auto& b : iet.branches) {
    hmax = std::max(hmax, double(b.height));
    hmin = std::min(hmin, double(b.height));
  }
  return std::max({hmax, 1.0 / hmin, zeta1, 1.0 / zeta1, zeta2, 1.0 / zeta2});
}

/// Bound for a slit torus: ζ representatives are straight loops along u1, u2.
template <class R>
double zippered_bounds(const IETWithFlips<R>& iet, const SlitTorus& torus) {
  return zippered_bounds(iet, std::fabs(torus.v1), std::fabs(torus.v2));
}

// ---------------------------------------------------------------------------
// Cocycle

/// Unit vector with its sign fixed so the first nonzero entry is positive.
inline std::array<double, 2> canonical_sign(std::array<double, 2> v) {
  if (v[0] < 0.0 || (v[0] == 0.0 && v[1] < 0.0)) return {-v[0], -v[1]};
  return v;
}

/// Singular data of a real 2×2 matrix.
struct Singular2 {
  double sigma_max = 0.0, sigma_min = 0.0;
  std::array<double, 2> top_right{1.0, 0.0};  // right-singular vector of sigma_max
};

inline Singular2 singular2(double a, double b, double c, double d) {
  const double m11 = a * a + c * c, m12 = a * b + c * d, m22 = b * b + d * d;
  const double tr = m11 + m22, gap = std::hypot(m11 - m22, 2.0 * m12);
  Singular2 s;
  s.sigma_max = std::sqrt((tr + gap) / 2);
  s.sigma_min = std::fabs(a * d - b * c) / std::max(s.sigma_max, std::numeric_limits<double>::min());
  const double ang = 0.5 * std::atan2(2.0 * m12, m11 - m22);
  s.top_right = canonical_sign({std::cos(ang), std::sin(ang)});
  return s;
}

/// Running product B_n···B_1 of the transition matrices with its times.
/// The product is kept as a rescaled real matrix and a log scale.
class CocycleAccumulator {
 public:
  std::vector<Mat2i> matrices;
  std::vector<double> times{0.0};
  std::vector<double> product_norm_log{0.0};

  CocycleAccumulator() = default;
  /// `initial_basis` rows are the level-0 basis classes in torus coordinates.
  explicit CocycleAccumulator(const Mat2i& initial_basis) : initial_(initial_basis) {}

  void push(const Mat2i& B, double dt) {
    if (!(dt > 0.0)) throw Error(ErrorKind::ValidationError, "time step must be positive");
    if (std::llabs(B.det()) != 1) throw Error(ErrorKind::ValidationError, "transition matrix is not unimodular");
    matrices.push_back(B);
    times.push_back(times.back() + dt);
    const std::array<double, 4> p = p_;
    p_ = {B.a * p[0] + B.b * p[2], B.a * p[1] + B.b * p[3], B.c * p[0] + B.d * p[2], B.c * p[1] + B.d * p[3]};
    const double m = std::max({std::fabs(p_[0]), std::fabs(p_[1]), std::fabs(p_[2]), std::fabs(p_[3])});
    for (auto& x : p_) x /= m;
    log_scale_ += std::log(m);
    product_norm_log.push_back(log_scale_ + std::log(singular2(p_[0], p_[1], p_[2], p_[3]).sigma_max));
    directions_.push_back(level_direction());
  }

  std::size_t steps() const { return matrices.size(); }
  double time() const { return times.back(); }
  const Mat2i& initial_basis() const { return initial_; }

  /// Rescaled product B_n···B_1 (entries ≤ 1) and its log scale.
  const std::array<double, 4>& product() const { return p_; }
  double log_scale() const { return log_scale_; }

  /// Singular data of B_n···B_1 · Z^(0), the level-n basis in torus coordinates.
  Singular2 level_singular() const {
    const auto& z = initial_;
    return singular2(p_[0] * z.a + p_[1] * z.c, p_[0] * z.b + p_[1] * z.d,
                     p_[2] * z.a + p_[3] * z.c, p_[2] * z.b + p_[3] * z.d);
  }

  /// Contracted direction after each step, in torus homology coordinates.
  const std::vector<std::array<double, 2>>& direction_history() const { return directions_; }

 private:
  std::array<double, 2> level_direction() const { return level_singular().top_right; }

  Mat2i initial_;
  std::array<double, 4> p_{1.0, 0.0, 0.0, 1.0};
  double log_scale_ = 0.0;
  std::vector<std::array<double, 2>> directions_;
};

struct LyapunovEstimate {
  double theta_top = 0.0;
  double theta_bottom = 0.0;
  std::array<double, 2> contracted_dir{0.0, 0.0};  // torus homology coordinates
  bool dir_undefined = false;
  double time = 0.0;
};

/// Top exponent log‖B_n···B_1‖/t_n; the bottom one is its negative (the
/// cocycle is symplectic). The contracted direction of the dual action
/// P^{-T} is the top right-singular vector of the level-n basis.
inline LyapunovEstimate lyapunov_estimate(const CocycleAccumulator& acc, double min_time = 1.0) {
  if (acc.steps() == 0 || acc.time() < min_time)
    throw Error(ErrorKind::InsufficientTime, "accumulated time below the configured minimum");
  LyapunovEstimate e;
  e.time = acc.time();
  e.theta_top = acc.product_norm_log.back() / e.time;
  e.theta_bottom = -e.theta_top;
  const Singular2 s = acc.level_singular();
  e.dir_undefined = s.sigma_max - s.sigma_min <= 1e-12 * s.sigma_max;
  if (!e.dir_undefined) e.contracted_dir = s.top_right;
  return e;
}

struct HalvesEstimate {
  double theta_first = 0.0, theta_second = 0.0;
  double stderr_diff = 0.0;  // standard error of theta_first − theta_second
  int blocks = 0;
};

/// log‖B_j···B_{i+1}‖ for the steps i < k ≤ j.
inline double block_norm_log(const CocycleAccumulator& acc, std::size_t i, std::size_t j) {
  std::array<double, 4> p{1.0, 0.0, 0.0, 1.0};
  double scale = 0.0;
  for (std::size_t k = i; k < j; ++k) {
    const Mat2i& B = acc.matrices[k];
    p = {B.a * p[0] + B.b * p[2], B.a * p[1] + B.b * p[3], B.c * p[0] + B.d * p[2], B.c * p[1] + B.d * p[3]};
    const double m = std::max({std::fabs(p[0]), std::fabs(p[1]), std::fabs(p[2]), std::fabs(p[3])});
    for (auto& x : p) x /= m;
    scale += std::log(m);
  }
  return scale + std::log(singular2(p[0], p[1], p[2], p[3]).sigma_max);
}

/// The top-exponent estimator applied separately to the two time halves;
/// the error comes from the spread of the same estimator on equal-time blocks.
inline HalvesEstimate two_half_estimate(const CocycleAccumulator& acc, int blocks = 8) {
  if (blocks < 4 || blocks % 2 != 0) throw Error(ErrorKind::ValidationError, "blocks must be even and at least 4");
  if (acc.steps() < static_cast<std::size_t>(blocks))
    throw Error(ErrorKind::InsufficientTime, "too few steps for the block estimate");
  const auto& t = acc.times;
  auto index_at = [&](double time) {
    return static_cast<std::size_t>(std::lower_bound(t.begin(), t.end(), time - 1e-9) - t.begin());
  };
  auto rate = [&](std::size_t i, std::size_t j) { return block_norm_log(acc, i, j) / (t[j] - t[i]); };
  std::vector<std::size_t> cut;
  for (int b = 0; b <= blocks; ++b) cut.push_back(index_at(acc.time() * b / blocks));
  std::vector<double> r;
  for (int b = 0; b < blocks; ++b) r.push_back(rate(cut[b], cut[b + 1]));
  const double mean = std::accumulate(r.begin(), r.end(), 0.0) / blocks;
  double var = 0.0;
  for (double x : r) var += (x - mean) * (x - mean);
  var /= blocks - 1;
  HalvesEstimate h;
  h.blocks = blocks;
  h.theta_first = rate(cut[0], cut[blocks / 2]);
  h.theta_second = rate(cut[blocks / 2], cut[blocks]);
  // A half spans blocks/2 blocks; its variance shrinks in proportion.
  h.stderr_diff = std::sqrt(2.0 * var / (blocks / 2));
  return h;
}

/// Converts a real vector from torus-basis coordinates to the (e1, e2) of the params.
inline std::array<double, 2> to_params_coords(const SlitTorus& torus, std::array<double, 2> c) {
  const auto& m = torus.to_params;
  return {c[0] * m.a + c[1] * m.c, c[0] * m.b + c[1] * m.d};
}

struct StripPrediction {
  double Theta = 0.0;  // [0, π)
  Vec2 z;              // unit normal to the strip
  Vec2 v;              // strip vector in the plane
};

/// Strip direction of c1 e1 + c2 e2 for a direction given in the params basis.
inline StripPrediction predict_strip(std::array<double, 2> contracted_dir, const SystemParams& params) {
  if (!(std::hypot(contracted_dir[0], contracted_dir[1]) > 0.0))
    throw Error(ErrorKind::ZeroDirection, "contracted direction is zero");
  StripPrediction p;
  p.v = contracted_dir[0] * params.e1 + contracted_dir[1] * params.e2;
  const double n = norm(p.v);
  if (!(n > 0.0)) throw Error(ErrorKind::ZeroDirection, "strip vector vanishes");
  p.Theta = std::atan2(p.v.y, p.v.x);
  if (p.Theta < 0.0) p.Theta += kPi;
  if (p.Theta >= kPi) p.Theta -= kPi;
  p.z = {-std::sin(p.Theta), std::cos(p.Theta)};
  return p;
}

// ---------------------------------------------------------------------------
// Driver

struct RenormOptions {
  double ratio = std::exp(-0.25);
  int steps = 120;
  double min_time = 1.0;
  int word_cap = 1 << 16;
  bool keep_levels = true;
  TransversalOptions transversal;
};

/// One record of the renormalization log.
struct RenormStep {
  int k = 0;
  double t = 0.0;
  Mat2i B;
  double theta_top = 0.0;
  std::array<double, 2> contracted_dir{0.0, 0.0};
};

struct RenormRun {
  TransversalSegment I;
  IETWithFlips<long double> iet0;
  std::vector<IETWithFlips<ExactLength>> levels;  // I^(0), I^(1), ... when kept
  CocycleAccumulator acc;
  std::vector<RenormStep> log;
  double K = 0.0;
};

/// Builds I and its return map, then induces on I^(k) of length e^{-t_k} l(I).
template <class Sink>
RenormRun run_renorm(const SlitTorus& torus, const RenormOptions& opt, Sink&& on_step) {
  if (!(opt.ratio > 0.0 && opt.ratio < 1.0)) throw Error(ErrorKind::ValidationError, "ratio must lie in (0,1)");
  if (opt.steps < 1) throw Error(ErrorKind::ValidationError, "steps must be positive");
  RenormRun run;
  run.I = build_transversal(torus, opt.transversal);
  run.iet0 = first_return_iet(torus, run.I);
  run.K = zippered_bounds(run.iet0, torus);
  IETWithFlips<ExactLength> cur = exact_involution(run.iet0);
  run.acc = CocycleAccumulator(cur.basis.z());
  if (opt.keep_levels) run.levels.push_back(cur);
  for (int k = 1; k <= opt.steps; ++k) {
    auto st = induce(cur, static_cast<long double>(opt.ratio), opt.word_cap);
    run.acc.push(st.B, st.dt);
    cur = std::move(st.iet);
    if (opt.keep_levels) run.levels.push_back(cur);
    RenormStep rec;
    rec.k = k;
    rec.t = run.acc.time();
    rec.B = st.B;
    rec.theta_top = run.acc.product_norm_log.back() / rec.t;
    rec.contracted_dir = run.acc.direction_history().back();
    on_step(rec);
    run.log.push_back(rec);
  }
  return run;
}

inline RenormRun run_renorm(const SlitTorus& torus, const RenormOptions& opt = {}) {
  return run_renorm(torus, opt, [](const RenormStep&) {});
}

/// Largest angle (degrees, mod 180) between the final contracted direction
/// and those recorded over the last `fraction` of the run time.
inline double direction_drift_deg(const CocycleAccumulator& acc, double fraction = 1.0 / 3.0) {
  const auto& h = acc.direction_history();
  if (h.empty()) return 0.0;
  const double from = acc.time() * (1.0 - fraction);
  const auto& last = h.back();
  double worst = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (acc.times[i + 1] < from) continue;
    const double c = std::fabs(h[i][0] * last[0] + h[i][1] * last[1]);
    worst = std::max(worst, std::acos(std::min(1.0, c)) * 180.0 / kPi);
  }
  return worst;
}

}  // namespace windtree
