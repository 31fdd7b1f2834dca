#pragma once

// Plane model: a lattice of tilted a×b rectangles and the refraction-index −1
// ray tracer that follows a vertical trajectory through it.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "windtree/geom.hpp"

namespace windtree {

struct SystemParams {
  Vec2 e1{10.0, 0.0};
  Vec2 e2{0.0, 10.0};
  double a = 1.0;
  double b = 1.0;
  double theta = 0.5;

  double covolume() const { return std::fabs(cross(e1, e2)); }
  double lattice_scale() const { return std::sqrt(covolume()); }
  double diameter() const { return std::hypot(a, b); }
};

/// Throws on malformed fields; does not test disjointness.
inline void validate(const SystemParams& p) {
  if (!std::isfinite(p.a) || !std::isfinite(p.b) || !(p.a > 0.0) || !(p.b > 0.0))
    throw Error(ErrorKind::ValidationError, "rectangle sides must be positive and finite");
  if (!std::isfinite(p.theta) || !(p.theta > 0.0) || !(p.theta < kPi / 2))
    throw Error(ErrorKind::DegenerateAngle,
                "theta must lie in (0, pi/2); theta = 0 gives purely vertical lines");
  check_lattice(p.e1, p.e2);
}

struct HomologyVec {
  std::int64_t n1 = 0;
  std::int64_t n2 = 0;

  friend constexpr HomologyVec operator+(HomologyVec x, HomologyVec y) {
    return {x.n1 + y.n1, x.n2 + y.n2};
  }
  friend constexpr HomologyVec operator-(HomologyVec x, HomologyVec y) {
    return {x.n1 - y.n1, x.n2 - y.n2};
  }
  friend constexpr HomologyVec operator-(HomologyVec x) { return {-x.n1, -x.n2}; }
  constexpr HomologyVec& operator+=(HomologyVec o) { n1 += o.n1; n2 += o.n2; return *this; }
  friend constexpr bool operator==(HomologyVec, HomologyVec) = default;
};

/// Rectangle shape data in a frame centred at the obstacle.
///
/// Side ids: 0 = c0c1 and 2 = c2c3 have length a; 1 = c1c2 and 3 = c3c0 have
/// length b. Corner c0 is the lowest.
struct ObstacleShape {
  double a = 0, b = 0, theta = 0;
  Vec2 u, w;                    // side-a and side-b unit directions
  std::array<Vec2, 4> corner;   // relative to the centre
  double half_width = 0;        // horizontal half extent
  double half_height = 0;       // vertical half extent

  ObstacleShape() = default;
  ObstacleShape(double a_, double b_, double theta_)
      : a(a_), b(b_), theta(theta_),
        u{std::cos(theta_), std::sin(theta_)}, w{-std::sin(theta_), std::cos(theta_)},
        corner(rectangle_corners(a_, b_, theta_, Vec2{})) {
    half_width = 0.5 * (a * u.x + b * std::sin(theta));
    half_height = 0.5 * (a * u.y + b * w.y);
  }

  Vec2 to_frame(Vec2 p) const { return {dot(p, u), dot(p, w)}; }
  Vec2 from_frame(Vec2 f) const { return f.x * u + f.y * w; }

  /// y of the lower (up = true) or upper boundary above local abscissa x.
  double boundary_y(double x, bool lower) const {
    const Vec2 l = corner[3], r = corner[1];
    const Vec2 m = lower ? corner[0] : corner[2];
    if (x <= m.x) return l.y + (m.y - l.y) * (x - l.x) / (m.x - l.x);
    return m.y + (r.y - m.y) * (x - m.x) / (r.x - m.x);
  }

  bool contains(Vec2 p, double tol) const {
    const Vec2 f = to_frame(p);
    return std::fabs(f.x) <= 0.5 * a + tol && std::fabs(f.y) <= 0.5 * b + tol;
  }
};

enum class CrossingType { Translation, Reversal };

/// Opposite sides give a translation, adjacent sides a reversal.
inline CrossingType classify_crossing(int entry_side, int exit_side) {
  if (entry_side < 0 || entry_side > 3 || exit_side < 0 || exit_side > 3)
    throw Error(ErrorKind::ValidationError, "side id out of range");
  if (entry_side == exit_side)
    throw Error(ErrorKind::SameSide, "entry and exit through the same side (grazing)");
  return (entry_side + 2) % 4 == exit_side ? CrossingType::Translation : CrossingType::Reversal;
}

/// Separating-axis test of the origin rectangle against its lattice translates.
inline bool admissible(const SystemParams& p) {
  validate(p);
  const ObstacleShape sh(p.a, p.b, p.theta);
  const double diam = p.diameter();
  const double tol = 1e-12 * std::max(diam, p.lattice_scale());
  const ReducedBasis rb = lattice_reduce(p.e1, p.e2);
  // Lagrange-reduced: |n1 e1 + n2 e2| >= max(|n1|,|n2|)·|e1|·sin(angle) bounds the search box.
  const double sin_ang = std::fabs(cross(rb.e1, rb.e2)) / (norm(rb.e1) * norm(rb.e2));
  const double shortest = norm(rb.e1) * sin_ang;
  const auto range = static_cast<std::int64_t>(std::ceil(2.0 * diam / shortest)) + 1;
  for (std::int64_t i = -range; i <= range; ++i) {
    for (std::int64_t j = -range; j <= range; ++j) {
      if (i == 0 && j == 0) continue;
      const Vec2 c = double(i) * rb.e1 + double(j) * rb.e2;
      if (norm(c) > 2.0 * diam) continue;
      // Both rectangles share the axes u and w; separation along u or w suffices.
      const double gap_u = std::fabs(dot(c, sh.u)) - p.a;
      const double gap_w = std::fabs(dot(c, sh.w)) - p.b;
      if (std::max(gap_u, gap_w) <= tol) return false;
    }
  }
  return true;
}

enum class EventKind { Enter, Exit, CornerStop, SlitCross };

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::Enter: return "Enter";
    case EventKind::Exit: return "Exit";
    case EventKind::CornerStop: return "CornerStop";
    case EventKind::SlitCross: return "SlitCross";
  }
  return "?";
}

struct TraceEvent {
  EventKind kind = EventKind::Enter;
  std::int64_t obstacle_i = 0;  // lattice coordinates in the (e1, e2) of the params
  std::int64_t obstacle_j = 0;
  Vec2 point;
  DirAngle dir_after;
  double arclength = 0.0;
  int side = -1;   // side crossed (plane) or slit part (surface)
  Vec2 jump_to;    // SlitCross only: image point in the plane lift
};

struct Checkpoint {
  double arclength = 0.0;
  Vec2 pos;
  HomologyVec n;  // surface traces only
};

enum class StopReason { MaxEvents, CornerStop, SingularHit, Escaped };

inline const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::MaxEvents: return "MaxEvents";
    case StopReason::CornerStop: return "CornerStop";
    case StopReason::SingularHit: return "SingularHit";
    case StopReason::Escaped: return "Escaped";
  }
  return "?";
}

struct TrajectoryRecord {
  SystemParams params;
  Vec2 start;
  DirAngle initial_dir;
  std::vector<TraceEvent> events;
  std::vector<Checkpoint> checkpoints;
  HomologyVec crossings;
  std::int64_t obstacle_visits = 0;
  double arclength = 0.0;
  Vec2 final_pos;
  bool final_up = true;
  StopReason stop = StopReason::MaxEvents;
};

struct TraceOptions {
  std::int64_t max_events = 1000;  // obstacle visits
  double checkpoint_stride = 0.0;  // <= 0 disables checkpoints
  bool store_events = true;
  std::optional<Tolerance> tol;
};

namespace detail {

/// Emits a checkpoint every `stride` of arclength along straight pieces.
class CheckpointClock {
 public:
  explicit CheckpointClock(double stride) : stride_(stride), next_(stride > 0 ? 0.0 : -1.0) {}

  template <class F>
  void segment(Vec2 p, Vec2 q, double s0, double len, F&& emit) {
    if (stride_ <= 0.0) return;
    while (next_ <= s0 + len) {
      const double f = len > 0.0 ? (next_ - s0) / len : 0.0;
      emit(next_, p + f * (q - p));
      next_ += stride_;
    }
  }

 private:
  double stride_;
  double next_;
};

}  // namespace detail

/// Enumerates lattice points in an axis-aligned box using a reduced basis,
/// looping over the coordinate with the shorter range.
class LatticeWindow {
 public:
  explicit LatticeWindow(const SystemParams& p) {
    const ReducedBasis rb = lattice_reduce(p.e1, p.e2);
    r1_ = rb.e1;
    r2_ = rb.e2;
    m_ = rb.m;
    const double det = cross(r1_, r2_);
    inv_ = {r2_.y / det, -r2_.x / det, -r1_.y / det, r1_.x / det};
  }

  Vec2 point(std::int64_t n1, std::int64_t n2) const {
    return double(n1) * r1_ + double(n2) * r2_;
  }

  /// Converts reduced-basis coordinates to coordinates in the original basis.
  std::pair<std::int64_t, std::int64_t> original(std::int64_t n1, std::int64_t n2) const {
    return {n1 * m_.a + n2 * m_.c, n1 * m_.b + n2 * m_.d};
  }

  template <class F>
  void for_each(double xlo, double xhi, double ylo, double yhi, F&& f) const {
    double lo[2] = {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    double hi[2] = {-lo[0], -lo[1]};
    for (double x : {xlo, xhi})
      for (double y : {ylo, yhi}) {
        const double c0 = inv_[0] * x + inv_[1] * y;
        const double c1 = inv_[2] * x + inv_[3] * y;
        lo[0] = std::min(lo[0], c0); hi[0] = std::max(hi[0], c0);
        lo[1] = std::min(lo[1], c1); hi[1] = std::max(hi[1], c1);
      }
    const int outer = (hi[0] - lo[0] <= hi[1] - lo[1]) ? 0 : 1;
    const Vec2 ro = outer == 0 ? r1_ : r2_;
    const Vec2 ri = outer == 0 ? r2_ : r1_;
    const auto o_lo = static_cast<std::int64_t>(std::floor(lo[outer]));
    const auto o_hi = static_cast<std::int64_t>(std::ceil(hi[outer]));
    for (std::int64_t k = o_lo; k <= o_hi; ++k) {
      const Vec2 base = double(k) * ro;
      double tlo = -std::numeric_limits<double>::infinity();
      double thi = std::numeric_limits<double>::infinity();
      auto clip = [&](double comp, double vlo, double vhi) {
        if (std::fabs(comp) < 1e-300) {
          if (vlo > 0.0 || vhi < 0.0) { tlo = 1.0; thi = 0.0; }
          return;
        }
        double t0 = vlo / comp, t1 = vhi / comp;
        if (t0 > t1) std::swap(t0, t1);
        tlo = std::max(tlo, t0);
        thi = std::min(thi, t1);
      };
      clip(ri.x, xlo - base.x, xhi - base.x);
      clip(ri.y, ylo - base.y, yhi - base.y);
      if (!(tlo <= thi)) continue;
      const auto i_lo = static_cast<std::int64_t>(std::floor(tlo));
      const auto i_hi = static_cast<std::int64_t>(std::ceil(thi));
      for (std::int64_t l = i_lo; l <= i_hi; ++l) {
        const Vec2 c = base + double(l) * ri;
        if (c.x < xlo || c.x > xhi || c.y < ylo || c.y > yhi) continue;
        if (outer == 0) f(k, l, c); else f(l, k, c);
      }
    }
  }

 private:
  Vec2 r1_, r2_;
  Mat2i m_;
  std::array<double, 4> inv_{};
};

/// Incremental vertical-ray tracer for the plane model.
///
/// Each call to step() advances through one obstacle visit. The sink receives
/// events through on_event(const TraceEvent&) and checkpoints through
/// on_checkpoint(const Checkpoint&).
class PlaneTracer {
 public:
  PlaneTracer(const SystemParams& params, Vec2 start, bool up, const TraceOptions& opt)
      : params_(params), shape_(params.a, params.b, params.theta), window_(params),
        tol_(opt.tol.value_or(Tolerance::for_obstacle(params.a, params.b))),
        clock_(opt.checkpoint_stride), pos_(start), up_(up) {
    if (!admissible(params)) throw Error(ErrorKind::NotAdmissible, "rectangles overlap or touch");
    if (!finite(start)) throw Error(ErrorKind::ValidationError, "start point is not finite");
    const double r = params.diameter();
    const double tol = tol_.eps_geom * std::max(r, std::fabs(start.x) + std::fabs(start.y));
    window_.for_each(start.x - r, start.x + r, start.y - r, start.y + r,
                     [&](std::int64_t, std::int64_t, Vec2 c) {
                       if (shape_.contains(start - c, tol))
                         throw Error(ErrorKind::StartInsideObstacle,
                                     "start point lies inside or on an obstacle");
                     });
    scan0_ = std::max(params.covolume() / (2.0 * shape_.half_width), params.lattice_scale());
    escape_ = 1e5 * std::max(params.lattice_scale(), scan0_);
  }

  bool up() const { return up_; }
  Vec2 position() const { return pos_; }
  double arclength() const { return s_; }
  bool stopped() const { return stopped_.has_value(); }
  StopReason stop_reason() const { return stopped_.value_or(StopReason::MaxEvents); }
  const ObstacleShape& shape() const { return shape_; }

  template <class Sink>
  bool step(Sink& sink) {
    if (stopped_) return false;
    const auto hit = next_obstacle();
    if (!hit) {
      stopped_ = StopReason::Escaped;
      return false;
    }
    const Vec2 c = hit->center;
    const double xl = pos_.x - c.x;
    const Vec2 entry{pos_.x, c.y + hit->entry_local_y};
    move_to(entry, sink);

    const auto [oi, oj] = window_.original(hit->k1, hit->k2);
    TraceEvent ev;
    ev.obstacle_i = oi;
    ev.obstacle_j = oj;

    if (near_corner(xl, up_)) {
      ev.kind = EventKind::CornerStop;
      ev.point = entry;
      ev.dir_after = up_ ? DirAngle::up() : DirAngle::down();
      ev.arclength = s_;
      sink.on_event(ev);
      stopped_ = StopReason::CornerStop;
      return false;
    }

    // Entry side and frame coordinates; the constrained coordinate is pinned.
    int side;
    if (up_) side = xl < shape_.corner[0].x ? 3 : 0;
    else side = xl < shape_.corner[2].x ? 2 : 1;
    Vec2 f = shape_.to_frame(entry - c);
    pin(f, side);
    Vec2 d = up_ ? Vec2{shape_.u.y, shape_.w.y} : Vec2{-shape_.u.y, -shape_.w.y};
    refract(d, side);

    ev.kind = EventKind::Enter;
    ev.point = entry;
    ev.side = side;
    ev.dir_after = DirAngle(std::atan2(shape_.from_frame(d).y, shape_.from_frame(d).x));
    ev.arclength = s_;
    sink.on_event(ev);

    // Exit through the first boundary met by the interior chord.
    double t = std::numeric_limits<double>::infinity();
    int exit_side = -1;
    if (d.x > 0) { const double tt = (0.5 * shape_.a - f.x) / d.x; if (tt < t && side != 1) { t = tt; exit_side = 1; } }
    if (d.x < 0) { const double tt = (-0.5 * shape_.a - f.x) / d.x; if (tt < t && side != 3) { t = tt; exit_side = 3; } }
    if (d.y > 0) { const double tt = (0.5 * shape_.b - f.y) / d.y; if (tt < t && side != 2) { t = tt; exit_side = 2; } }
    if (d.y < 0) { const double tt = (-0.5 * shape_.b - f.y) / d.y; if (tt < t && side != 0) { t = tt; exit_side = 0; } }
    Vec2 g = f + t * d;
    pin(g, exit_side);
    refract(d, exit_side);
    const bool up_after = shape_.from_frame(d).y > 0.0;
    const Vec2 exit_local = shape_.from_frame(g);
    const Vec2 exit = c + exit_local;
    move_to(exit, sink);
    pos_ = exit;
    up_ = up_after;

    ev.side = exit_side;
    ev.point = exit;
    ev.dir_after = up_ ? DirAngle::up() : DirAngle::down();
    ev.arclength = s_;
    if (near_corner(exit_local.x, !up_)) {
      ev.kind = EventKind::CornerStop;
      sink.on_event(ev);
      stopped_ = StopReason::CornerStop;
      return false;
    }
    ev.kind = EventKind::Exit;
    sink.on_event(ev);
    last_ = {hit->k1, hit->k2};
    return true;
  }

 private:
  struct Hit {
    std::int64_t k1, k2;
    Vec2 center;
    double entry_local_y;
    double distance;
  };

  // Corners on the boundary met from below (lower) or from above.
  bool near_corner(double xl, bool lower) const {
    const double e = tol_.eps_corner;
    const double mid = lower ? shape_.corner[0].x : shape_.corner[2].x;
    return std::fabs(xl - shape_.corner[3].x) < e || std::fabs(xl - shape_.corner[1].x) < e ||
           std::fabs(xl - mid) < e;
  }

  void pin(Vec2& f, int side) const {
    switch (side) {
      case 0: f.y = -0.5 * shape_.b; break;
      case 1: f.x = 0.5 * shape_.a; break;
      case 2: f.y = 0.5 * shape_.b; break;
      case 3: f.x = -0.5 * shape_.a; break;
    }
  }

  // Index −1 refraction: the component along the side flips.
  static void refract(Vec2& d, int side) {
    if (side == 0 || side == 2) d.x = -d.x;
    else d.y = -d.y;
  }

  std::optional<Hit> next_obstacle() const {
    const double hw = shape_.half_width + tol_.eps_corner;
    const double hh = shape_.half_height;
    const double x = pos_.x;
    std::optional<Hit> best;
    double covered = -hh;  // scanned centre offsets along the travel direction
    double span = scan0_;
    while (true) {
      const double lo = covered, hi = covered + span;
      const double ylo = up_ ? pos_.y + lo : pos_.y - hi;
      const double yhi = up_ ? pos_.y + hi : pos_.y - lo;
      window_.for_each(x - hw, x + hw, ylo, yhi, [&](std::int64_t k1, std::int64_t k2, Vec2 c) {
        if (last_ && last_->first == k1 && last_->second == k2) return;
        const double xl = std::clamp(x - c.x, shape_.corner[3].x, shape_.corner[1].x);
        const double yl = shape_.boundary_y(xl, up_);
        const double dist = up_ ? (c.y + yl) - pos_.y : pos_.y - (c.y + yl);
        if (dist < 0.0) return;
        if (!best || dist < best->distance) best = Hit{k1, k2, c, yl, dist};
      });
      covered = hi;
      if (best && best->distance <= covered - hh) return best;
      if (covered > escape_) return best;
      span *= 2.0;
    }
  }

  template <class Sink>
  void move_to(Vec2 q, Sink& sink) {
    const double len = norm(q - pos_);
    clock_.segment(pos_, q, s_, len, [&](double s, Vec2 p) { sink.on_checkpoint(Checkpoint{s, p, {}}); });
    s_ += len;
    pos_ = q;
  }

  SystemParams params_;
  ObstacleShape shape_;
  LatticeWindow window_;
  Tolerance tol_;
  detail::CheckpointClock clock_;
  Vec2 pos_;
  bool up_;
  double s_ = 0.0;
  double scan0_ = 1.0;
  double escape_ = 1.0;
  std::optional<std::pair<std::int64_t, std::int64_t>> last_;
  std::optional<StopReason> stopped_;
};

/// Sink that stores everything into a TrajectoryRecord.
struct RecordSink {
  TrajectoryRecord* rec;
  bool store_events = true;
  void on_event(const TraceEvent& e) {
    if (store_events) rec->events.push_back(e);
  }
  void on_checkpoint(const Checkpoint& c) { rec->checkpoints.push_back(c); }
};

/// Streams a plane trace into `sink`; returns the record without events or checkpoints.
template <class Sink>
TrajectoryRecord trace_plane_visit(const SystemParams& params, Vec2 start, bool up,
                                   const TraceOptions& opt, Sink& sink) {
  PlaneTracer tr(params, start, up, opt);
  TrajectoryRecord rec;
  rec.params = params;
  rec.start = start;
  rec.initial_dir = up ? DirAngle::up() : DirAngle::down();
  std::int64_t visits = 0;
  while (visits < opt.max_events && tr.step(sink)) ++visits;
  if (tr.stopped() && tr.stop_reason() == StopReason::CornerStop) ++visits;
  rec.obstacle_visits = visits;
  rec.stop = tr.stopped() ? tr.stop_reason() : StopReason::MaxEvents;
  rec.arclength = tr.arclength();
  rec.final_pos = tr.position();
  rec.final_up = tr.up();
  return rec;
}

/// Traces the vertical trajectory from `start` for at most max_events obstacle visits.
inline TrajectoryRecord trace_plane(const SystemParams& params, Vec2 start, bool up,
                                    std::int64_t max_events, double checkpoint_stride,
                                    bool store_events = true) {
  TraceOptions opt;
  opt.max_events = max_events;
  opt.checkpoint_stride = checkpoint_stride;
  opt.store_events = store_events;
  TrajectoryRecord tmp;
  RecordSink sink{&tmp, store_events};
  TrajectoryRecord rec = trace_plane_visit(params, start, up, opt, sink);
  rec.events = std::move(tmp.events);
  rec.checkpoints = std::move(tmp.checkpoints);
  return rec;
}

}  // namespace windtree
