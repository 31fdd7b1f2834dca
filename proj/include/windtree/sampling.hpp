#pragma once

// Random parameter tuples for sweeps and statistical checks.

#include <cmath>
#include <cstdint>
#include <random>

#include "windtree/errors.hpp"
#include "windtree/geom.hpp"
#include "windtree/slit.hpp"
#include "windtree/windtree.hpp"

namespace windtree {

/// Ranges for lattice vectors (polar form), obstacle sides and angle.
struct SampleRanges {
  double r_min = 4.0, r_max = 6.0;
  double arg1_min = 0.15, arg1_max = 0.75;                      // e1 angle
  double arg2_min = kPi / 2 + 0.15, arg2_max = kPi / 2 + 0.75;  // e2 angle
  double side_min = 0.3, side_max = 1.5;
  double theta_min = 0.05, theta_max = 1.5;
};

/// Draws one tuple; may be non-admissible.
template <class Rng>
SystemParams draw_params(Rng& rng, const SampleRanges& r = {}) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  auto in = [&](double lo, double hi) { return lo + (hi - lo) * U(rng); };
  const double r1 = in(r.r_min, r.r_max), r2 = in(r.r_min, r.r_max);
  const double f1 = in(r.arg1_min, r.arg1_max), f2 = in(r.arg2_min, r.arg2_max);
  SystemParams p;
  p.e1 = {r1 * std::cos(f1), r1 * std::sin(f1)};
  p.e2 = {r2 * std::cos(f2), r2 * std::sin(f2)};
  p.a = in(r.side_min, r.side_max);
  p.b = in(r.side_min, r.side_max);
  p.theta = in(r.theta_min, r.theta_max);
  return p;
}

/// Draws until the tuple is admissible.
template <class Rng>
SystemParams sample_admissible(Rng& rng, const SampleRanges& r = {}, int max_tries = 1000) {
  for (int i = 0; i < max_tries; ++i) {
    SystemParams p = draw_params(rng, r);
    if (admissible(p)) return p;
  }
  throw Error(ErrorKind::ValidationError, "no admissible tuple in the sampling ranges");
}

struct SampledSurface {
  SystemParams params;
  SlitTorus torus;
};

/// Draws until the built torus satisfies all O_ε conditions.
template <class Rng>
SampledSurface sample_o_epsilon(Rng& rng, double epsilon, const SampleRanges& r = {},
                                int max_tries = 1000) {
  for (int i = 0; i < max_tries; ++i) {
    SystemParams p = draw_params(rng, r);
    if (!admissible(p)) continue;
    try {
      SlitTorus t = build_torus(p, epsilon);
      if (t.o_epsilon(epsilon).all()) return {p, t};
    } catch (const Error&) {
    }
  }
  throw Error(ErrorKind::NotInOEpsilon, "no O_eps surface in the sampling ranges");
}

}  // namespace windtree
