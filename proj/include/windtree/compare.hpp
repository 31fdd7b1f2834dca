#pragma once

// Joint plane/surface tracing: both models are stepped one obstacle at a
// time and compared where the trajectories are outside the obstacles.

#include <cmath>
#include <cstdint>
#include <optional>

#include "windtree/slit.hpp"
#include "windtree/windtree.hpp"

namespace windtree {

struct EquivalenceReport {
  std::int64_t matched = 0;           // obstacle visits compared
  double max_discrepancy = 0.0;       // horizontal offset of the vertical lines after each visit
  double max_reconstruction = 0.0;    // |plane exit − (start + n1 u1 + n2 u2)|
  double domain_diameter = 0.0;
  bool index_mismatch = false;        // different obstacle or direction
  bool corner_mismatch = false;       // one model stopped at a corner, the other did not
  bool corner_stop = false;           // both stopped at the same corner event
  double lattice_scale = 0.0;
};

namespace detail {
struct LastEvent {
  std::optional<TraceEvent> last;
  void on_event(const TraceEvent& e) { last = e; }
  void on_checkpoint(const Checkpoint&) {}
};
}  // namespace detail

/// Steps both models from `start` for up to max_events obstacle visits.
inline EquivalenceReport compare_models(const SlitTorus& torus, Vec2 start, bool up,
                                        std::int64_t max_events) {
  EquivalenceReport rep;
  rep.domain_diameter = torus.domain_diameter();
  rep.lattice_scale = torus.params.lattice_scale();
  TraceOptions opt;
  opt.max_events = max_events;
  PlaneTracer plane(torus.params, start, up, opt);
  SurfaceTracer surf(torus, start, up);
  detail::LastEvent pe, se;
  for (std::int64_t k = 0; k < max_events; ++k) {
    const bool p_ok = plane.step(pe);
    const bool s_ok = surf.step(se);
    const bool p_corner = plane.stopped() && plane.stop_reason() == StopReason::CornerStop;
    const bool s_corner = surf.stopped() && surf.stop_reason() == StopReason::SingularHit;
    if (p_corner || s_corner) {
      rep.corner_mismatch = p_corner != s_corner;
      rep.corner_stop = p_corner && s_corner;
      if (rep.corner_stop && pe.last && se.last &&
          (pe.last->obstacle_i != se.last->obstacle_i || pe.last->obstacle_j != se.last->obstacle_j))
        rep.index_mismatch = true;
      break;
    }
    if (!p_ok || !s_ok) break;
    const TraceEvent& a = *pe.last;
    const TraceEvent& b = *se.last;
    ++rep.matched;
    if (a.obstacle_i != b.obstacle_i || a.obstacle_j != b.obstacle_j || !(a.dir_after == b.dir_after))
      rep.index_mismatch = true;
    rep.max_discrepancy = std::max(rep.max_discrepancy, std::fabs(a.point.x - b.jump_to.x));
    const Vec2 rec = start + torus.lattice_point(surf.homology());
    rep.max_reconstruction = std::max(rep.max_reconstruction, norm(a.point - rec));
    if (rep.index_mismatch) break;
  }
  return rep;
}

}  // namespace windtree
