#include <gtest/gtest.h>

#include <random>

#include "windtree/compare.hpp"
#include "windtree/slit.hpp"

using namespace windtree;

namespace {

SystemParams square(double spacing, double a, double b, double theta) {
  return SystemParams{{spacing, 0}, {0, spacing}, a, b, theta};
}

// Closed forms written with the cotangent of η, evaluated in long double.
struct SlitOracle {
  long double x, y, eta;
};

SlitOracle oracle(long double a, long double b, long double th) {
  const long double eta = th + std::atan(a / b);
  const long double k = std::sqrt(1.0L + 1.0L / (std::tan(eta) * std::tan(eta)));
  const long double ac = a * std::cos(th), bs = b * std::sin(th);
  if (bs < ac) return {(ac - bs) * k, 2 * bs * k, eta};
  return {(bs - ac) * k, 2 * ac * k, eta};
}

SystemParams random_params(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  while (true) {
    SystemParams p{{4.0 + 2 * U(rng), -1.0 + 2 * U(rng)}, {-1.0 + 2 * U(rng), 4.0 + 2 * U(rng)},
                   0.3 + 1.5 * U(rng), 0.3 + 1.5 * U(rng), 0.05 + 1.45 * U(rng)};
    if (std::fabs(p.a * std::cos(p.theta) - p.b * std::sin(p.theta)) < 1e-3) continue;
    if (admissible(p)) return p;
  }
}

}  // namespace

TEST(BuildSlit, SquareObstacleAtThirtyDegrees) {
  const auto s = build_slit(square(10, 1, 1, kPi / 6));
  EXPECT_EQ(s.kind, SlitCase::Case1);
  EXPECT_NEAR(s.eta, 5 * kPi / 12, 1e-15);
  const auto o = oracle(1, 1, kPi / 6);
  EXPECT_NEAR(s.x_len, double(o.x), 1e-14);
  EXPECT_NEAR(s.y_len, double(o.y), 1e-14);
  EXPECT_NEAR(s.x_len, 0.3789, 1e-4);
  EXPECT_NEAR(s.y_len, 1.0353, 1e-4);
  EXPECT_NEAR(s.x_len + s.y_len, std::sqrt(2.0), 1e-14);
}

TEST(BuildSlit, SymmetricSquareIsCase3) {
  try {
    build_slit(square(10, 1, 1, kPi / 4));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegenerateCase3);
  }
}

TEST(BuildSlit, LongObstacleTiltsPastHorizontal) {
  const auto s = build_slit(square(10, 2, 1, kPi / 6));
  EXPECT_EQ(s.kind, SlitCase::Case1);
  EXPECT_GT(s.eta, kPi / 2);
  EXPECT_LE(std::fabs(s.x_len + s.y_len - std::sqrt(5.0)) / std::sqrt(5.0), 1e-12);
}

TEST(BuildSlit, RandomAgainstOracle) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  int case2 = 0;
  for (int i = 0; i < 2000; ++i) {
    const double a = 0.1 + 3 * U(rng), b = 0.1 + 3 * U(rng), th = 0.01 + 1.55 * U(rng);
    if (std::fabs(a * std::cos(th) - b * std::sin(th)) < 1e-6) continue;
    const auto s = build_slit(square(100, a, b, th));
    const auto o = oracle(a, b, th);
    ASSERT_NEAR(s.x_len, double(o.x), 1e-12 * s.length);
    ASSERT_NEAR(s.y_len, double(o.y), 1e-12 * s.length);
    ASSERT_LE(std::fabs(s.x_len + s.y_len - s.length), 1e-12 * s.length);
    case2 += s.kind == SlitCase::Case2;
    // Slit is the diagonal avoiding the lowest corner.
    const auto c = rectangle_corners(a, b, th, {});
    ASSERT_EQ(s.endpoints[0], c[3]);
    ASSERT_EQ(s.endpoints[1], c[1]);
  }
  EXPECT_GT(case2, 100);
}

TEST(Census, TwoPolesTwoZeros) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double a = 0.1 + 3 * U(rng), b = 0.1 + 3 * U(rng), th = 0.01 + 1.55 * U(rng);
    if (std::fabs(a * std::cos(th) - b * std::sin(th)) < 1e-6) continue;
    const auto g = singularity_census(build_slit(square(100, a, b, th)));
    ASSERT_EQ(g.size(), 4u);
    EXPECT_NEAR(g[0].angle, kPi, 1e-12);
    EXPECT_NEAR(g[1].angle, kPi, 1e-12);
    EXPECT_NEAR(g[2].angle, 3 * kPi, 1e-12);
    EXPECT_NEAR(g[3].angle, 3 * kPi, 1e-12);
  }
}

TEST(SlitTransition, RotationPivotIsFixed) {
  const auto s = build_slit(square(10, 1, 1, kPi / 6));
  const SlitPart& rot = s.layout.bottom[0];
  ASSERT_EQ(rot.kind, PartKind::Rotation);
  const auto img = slit_transition(s, rot.pivot + 1e-3, true, DirAngle::up(), 1e-9);
  EXPECT_NEAR(img.x, rot.pivot - 1e-3, 1e-15);
  EXPECT_TRUE(img.bottom);
  EXPECT_EQ(img.dir, DirAngle::down());
}

TEST(SlitTransition, TranslationKeepsOffset) {
  const auto s = build_slit(square(10, 1, 1, kPi / 6));
  const SlitPart& tr = s.layout.bottom[1];
  ASSERT_EQ(tr.kind, PartKind::Translation);
  const double off = 0.17;
  const auto img = slit_transition(s, tr.lo + off, true, DirAngle::up(), 1e-9);
  EXPECT_FALSE(img.bottom);
  EXPECT_NEAR(img.x - s.layout.top[0].lo, off, 1e-15);
  EXPECT_EQ(img.dir, DirAngle::up());
}

TEST(SlitTransition, Involution) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    const auto p = random_params(rng);
    const auto s = build_slit(p);
    const double x = s.left() + s.width() * (0.001 + 0.998 * U(rng));
    const bool below = U(rng) < 0.5;
    const DirAngle d = below ? DirAngle::up() : DirAngle::down();
    SlitImage img;
    try {
      img = slit_transition(s, x, below, d, 1e-9);
    } catch (const Error&) {
      continue;
    }
    // Reverse the ray: it now arrives from the side opposite its motion.
    const DirAngle rev(img.dir.phi() + kPi);
    const bool rev_below = rev == DirAngle::up();
    const auto back = slit_transition(s, img.x, rev_below, rev, 1e-9);
    ASSERT_NEAR(back.x, x, 1e-12);
    ASSERT_EQ(DirAngle(back.dir.phi() + kPi), d);
  }
}

TEST(SlitTransition, SingularHitNearBreakpoint) {
  const auto s = build_slit(square(10, 1, 1, kPi / 6));
  for (bool bottom : {true, false})
    for (double bp : s.breakpoints(bottom)) {
      if (bp <= s.left() || bp >= s.right()) continue;
      try {
        slit_transition(s, bp + 1e-11, bottom, bottom ? DirAngle::up() : DirAngle::down(), 1e-9);
        FAIL();
      } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::SingularHit);
      }
    }
}

TEST(BuildTorus, SquareLatticeCoordinates) {
  const auto p = square(10, 1, 1, kPi / 6);
  const auto t = build_torus(p);
  const auto s = build_slit(p);
  EXPECT_EQ(t.family, SFamily::S1);
  EXPECT_NEAR(t.v3 + t.v4, std::fabs(s.rise()), 1e-14);
  EXPECT_NEAR(t.h3 + t.h4, s.width(), 1e-14);
  EXPECT_NEAR(t.covolume(), 100.0, 1e-9);
  EXPECT_EQ(std::llabs(t.to_params.det()), 1);
}

TEST(BuildTorus, GL2ZInvariance) {
  const SystemParams p{{6.1, 0.4}, {-0.7, 5.3}, 1.1, 0.6, 0.8};
  const SystemParams q{p.e1 + 3.0 * p.e2, p.e2 + 2.0 * (p.e1 + 3.0 * p.e2), p.a, p.b, p.theta};
  const auto t1 = build_torus(p), t2 = build_torus(q);
  for (auto [x, y] : {std::pair{t1.h1, t2.h1}, {t1.v1, t2.v1}, {t1.h2, t2.h2}, {t1.v2, t2.v2},
                      {t1.h3, t2.h3}, {t1.h4, t2.h4}, {t1.v3, t2.v3}, {t1.v4, t2.v4}})
    EXPECT_NEAR(x, y, 1e-9);
}

TEST(BuildTorus, OEpsilonForSkewedLattice) {
  const SystemParams p{{6.0, 0.5}, {0.4, 6.0}, 1.0, 0.7, 0.4};
  const auto t = build_torus(p, 0.1);
  const auto oc = t.o_epsilon(0.1);
  EXPECT_TRUE(oc.cond1);
  EXPECT_TRUE(oc.cond2);
  EXPECT_TRUE(oc.cond3);
  EXPECT_TRUE(oc.cond4);
}

TEST(BuildTorus, LongSlitDoesNotEmbed) {
  // The lattice is admissible, but the diagonal is far longer than the torus is tall.
  const double th = 0.05;
  const SystemParams p{{10.0 * std::cos(th), 10.0 * std::sin(th)}, {0.3, 1.5}, 9.5, 0.2, th};
  if (!admissible(p)) GTEST_SKIP();
  try {
    build_torus(p);
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::SlitDoesNotEmbed);
  }
}

TEST(IntersectionForm, Identities) {
  EXPECT_EQ(intersection_form({1, 0}, {3, 2}), 2);
  EXPECT_EQ(intersection_form({1, 0}, {0, 1}), 1);
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> K(-1000, 1000);
  for (int i = 0; i < 1000; ++i) {
    const HomologyVec v{K(rng), K(rng)};
    EXPECT_EQ(intersection_form(v, v), 0);
    EXPECT_EQ(intersection_form({0, 1}, v), -v.n1);
    EXPECT_EQ(intersection_form({1, 0}, v), v.n2);
  }
}

TEST(ReconstructDisplacement, LinearCombination) {
  EXPECT_EQ(reconstruct_displacement({0, 0}, Vec2{1, 0}, Vec2{0.2, 1.1}), (Vec2{0, 0}));
  const Vec2 d = reconstruct_displacement({2, -1}, Vec2{1, 0}, Vec2{0.2, 1.1});
  EXPECT_NEAR(d.x, 1.8, 1e-15);
  EXPECT_NEAR(d.y, -1.1, 1e-15);
}

TEST(TraceSurface, TinySlitIsLinearFlow) {
  // Unit square torus with a vanishing slit away from the vertical line.
  const SystemParams p{{1, 0}, {0, 1}, 1e-6, 2e-6, 0.3};
  const auto t = build_torus_in_basis(p);
  const Vec2 start{0.25, 0.1};
  const auto rec = trace_surface(t, start, true, 1, 0.0);
  EXPECT_EQ(rec.stop, StopReason::Escaped);
  // Closed-form: after time T the lift is start + (0, T).
  for (double T : {0.05, 0.5, 3.7, 100.2, 1000.0}) {
    if (T > rec.arclength) break;
    const HomologyVec n = gamma_T(rec, T);
    const auto [c1, c2] = t.coords(start + Vec2{0, T});
    const auto [d1, d2] = t.coords(start);
    const HomologyVec expect{std::llround(c1) - std::llround(d1), std::llround(c2) - std::llround(d2)};
    EXPECT_EQ(n, expect) << T;
    EXPECT_LE(std::llabs(n.n1) + std::llabs(n.n2 - std::int64_t(std::floor(T))), 1);
  }
}

TEST(TraceSurface, GammaBeforeFirstCrossingIsZero) {
  const auto t = build_torus(square(10, 1, 1, kPi / 6));
  const auto rec = trace_surface(t, {0.3, 0.2}, true, 50);
  ASSERT_FALSE(rec.homology_log.empty());
  EXPECT_EQ(gamma_T(rec, 0.5 * rec.homology_log.front().first), (HomologyVec{0, 0}));
  EXPECT_EQ(gamma_T(rec, rec.arclength), rec.crossings);
  try {
    gamma_T(rec, rec.arclength * 2 + 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::TbeyondTrace);
  }
}

TEST(TraceSurface, ParityFlipsExactlyAtRotationParts) {
  std::mt19937_64 rng(13);
  for (int c = 0; c < 5; ++c) {
    const auto p = random_params(rng);
    const auto t = build_torus(p);
    const auto rec = trace_surface(t, {0.37 * p.e1.x + 0.5 * p.e2.x, 0.41 * p.e2.y + 0.5 * p.e1.y},
                                   true, 5000);
    bool up = true;
    for (const auto& e : rec.events) {
      if (e.kind != EventKind::SlitCross) break;
      const bool now_up = e.dir_after == DirAngle::up();
      ASSERT_EQ(e.side == 1, now_up != up);
      up = now_up;
    }
  }
}

TEST(TraceSurface, GammaAdditive) {
  const SystemParams p{{6.1, 0.4}, {-0.7, 5.3}, 1.1, 0.6, 0.8};
  const auto t = build_torus(p);
  const auto rec = trace_surface(t, {2.9, 2.1}, false, 3000);
  const double T1 = 0.37 * rec.arclength, T2 = 0.81 * rec.arclength;
  const HomologyVec g1 = gamma_T(rec, T1), g2 = gamma_T(rec, T2);
  // γ over [T1, T2] from the log, as a difference of consecutive counts.
  HomologyVec mid{};
  HomologyVec prev = g1;
  for (const auto& [tt, n] : rec.homology_log)
    if (tt > T1 && tt <= T2) { mid += n - prev; prev = n; }
  EXPECT_EQ(g1 + mid, g2);
}

TEST(Equivalence, PlaneAndSurfaceAgree) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int c = 0; c < 10; ++c) {
    const auto p = random_params(rng);
    const auto t = build_torus(p);
    Vec2 start;
    do {
      start = {U(rng) * 5, U(rng) * 5};
    } while (!admissible(p) || [&] {
      try { PlaneTracer(p, start, true, {}); return false; } catch (const Error&) { return true; }
    }());
    const auto rep = compare_models(t, start, true, 10000);
    EXPECT_FALSE(rep.index_mismatch);
    EXPECT_FALSE(rep.corner_mismatch);
    EXPECT_LE(rep.max_discrepancy, 1e-8 * rep.lattice_scale);
    EXPECT_LE(rep.max_reconstruction, rep.domain_diameter);
    EXPECT_GT(rep.matched, 100);
  }
}

TEST(Equivalence, CornerStopsCorrespond) {
  const auto p = square(10, 1, 1, 0.4);
  const auto t = build_torus(p);
  const ObstacleShape sh(1, 1, 0.4);
  const auto rep = compare_models(t, {sh.corner[0].x, -5}, true, 10);
  EXPECT_TRUE(rep.corner_stop);
  EXPECT_FALSE(rep.corner_mismatch);
  EXPECT_EQ(rep.matched, 0);
}
