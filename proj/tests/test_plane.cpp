#include <gtest/gtest.h>

#include <random>

#include "windtree/windtree.hpp"

using namespace windtree;

namespace {

SystemParams square(double spacing, double a, double b, double theta) {
  return SystemParams{{spacing, 0}, {0, spacing}, a, b, theta};
}

}  // namespace

TEST(Admissible, SparseLatticeIsAdmissible) {
  EXPECT_TRUE(admissible(square(10, 1, 1, kPi / 6)));
}

TEST(Admissible, DenseLatticeOverlaps) {
  EXPECT_FALSE(admissible(square(1, 2, 2, kPi / 6)));
}

TEST(Admissible, TouchingIsRejected) {
  const double th = 0.3, a = 1.0, b = 0.5;
  const Vec2 u{std::cos(th), std::sin(th)};
  const Vec2 far{-20 * std::sin(th), 20 * std::cos(th)};
  // Shrink the spacing along u until the margin crosses zero.
  EXPECT_TRUE(admissible(SystemParams{(a * (1 + 1e-6)) * u, far, a, b, th}));
  EXPECT_FALSE(admissible(SystemParams{a * u, far, a, b, th}));
  EXPECT_FALSE(admissible(SystemParams{(a * (1 - 1e-6)) * u, far, a, b, th}));
}

TEST(ClassifyCrossing, Table) {
  EXPECT_EQ(classify_crossing(0, 2), CrossingType::Translation);
  EXPECT_EQ(classify_crossing(1, 3), CrossingType::Translation);
  EXPECT_EQ(classify_crossing(0, 1), CrossingType::Reversal);
  EXPECT_EQ(classify_crossing(3, 0), CrossingType::Reversal);
  try {
    classify_crossing(2, 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::SameSide);
  }
}

TEST(TracePlane, SingleObstacleTranslationAndReversal) {
  const double th = kPi / 6;
  const auto p = square(50, 1, 1, th);
  const ObstacleShape sh(1, 1, th);
  // q = b sinθ = 0.5; rotation part of the lower boundary is [L, L + 1).
  const double L = sh.corner[3].x;
  {
    const auto rec = trace_plane(p, {L + 0.3, -5}, true, 1, 0);
    ASSERT_EQ(rec.events.size(), 2u);
    const auto& in = rec.events[0];
    const auto& out = rec.events[1];
    EXPECT_EQ(in.side, 3);
    EXPECT_EQ(classify_crossing(in.side, out.side), CrossingType::Reversal);
    EXPECT_EQ(out.dir_after, DirAngle::down());
    EXPECT_NEAR(out.point.x, 2 * sh.corner[0].x - (L + 0.3), 1e-14);
  }
  {
    const double x = L + 1.2;
    const auto rec = trace_plane(p, {x, -5}, true, 1, 0);
    ASSERT_EQ(rec.events.size(), 2u);
    const auto& in = rec.events[0];
    const auto& out = rec.events[1];
    EXPECT_EQ(in.side, 0);
    EXPECT_EQ(out.side, 2);
    EXPECT_EQ(classify_crossing(in.side, out.side), CrossingType::Translation);
    EXPECT_EQ(out.dir_after, DirAngle::up());
    EXPECT_NEAR(out.point.x, x - 1.0, 1e-14);
  }
}

TEST(TracePlane, InteriorDirectionAfterEnteringSideA) {
  const double th = kPi / 6;
  const auto p = square(50, 1, 1, th);
  const ObstacleShape sh(1, 1, th);
  const auto rec = trace_plane(p, {0.2, -5}, true, 1, 0);
  ASSERT_GE(rec.events.size(), 1u);
  const auto& in = rec.events[0];
  ASSERT_EQ(in.side, 0);
  const double phi = in.dir_after.phi();
  // Same line as 2θ − π/2; the refracted ray points into the obstacle.
  const double line = normalize_angle(2 * th - kPi / 2);
  EXPECT_LE(std::min(angle_distance(phi, line), angle_distance(phi, line + kPi)), 1e-14);
  EXPECT_GT(dot(in.dir_after.unit(), Vec2{0, 0} - in.point), 0.0);
}

TEST(TracePlane, StartInsideObstacleRejected) {
  try {
    trace_plane(square(10, 1, 1, 0.4), {0.1, 0.1}, true, 10, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::StartInsideObstacle);
  }
}

TEST(TracePlane, NotAdmissibleRejected) {
  try {
    trace_plane(square(1, 2, 2, 0.4), {0.5, 0.5}, true, 10, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NotAdmissible);
  }
}

TEST(TracePlane, CornerStopAtLowestCorner) {
  const auto p = square(50, 1, 1, 0.4);
  const ObstacleShape sh(1, 1, 0.4);
  const auto rec = trace_plane(p, {sh.corner[0].x, -5}, true, 5, 0);
  ASSERT_EQ(rec.events.size(), 1u);
  EXPECT_EQ(rec.events[0].kind, EventKind::CornerStop);
  EXPECT_EQ(rec.stop, StopReason::CornerStop);
}

TEST(TracePlane, LongRunInvariants) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(0, 1);
  for (int cfg = 0; cfg < 5; ++cfg) {
    SystemParams p{{3.0 + U(rng), 0.4 * U(rng)}, {0.3 * U(rng), 3.0 + U(rng)},
                   0.5 + U(rng), 0.5 + U(rng), 0.1 + 1.3 * U(rng)};
    ASSERT_TRUE(admissible(p));
    const auto rec = trace_plane(p, {0.5 * p.e1.x + 0.1, 0.5 * p.e2.y + 0.1}, true, 20000, 5.0);
    bool up = true;
    double s = 0.0;
    for (std::size_t i = 0; i < rec.events.size(); ++i) {
      const auto& e = rec.events[i];
      ASSERT_GE(e.arclength, s);
      s = e.arclength;
      if (e.kind == EventKind::CornerStop) break;
      if (i % 2 == 0) {
        ASSERT_EQ(e.kind, EventKind::Enter);
      } else {
        ASSERT_EQ(e.kind, EventKind::Exit);
        const auto& in = rec.events[i - 1];
        ASSERT_EQ(in.obstacle_i, e.obstacle_i);
        ASSERT_EQ(in.obstacle_j, e.obstacle_j);
        const bool now_up = e.dir_after == DirAngle::up();
        ASSERT_TRUE(now_up || e.dir_after == DirAngle::down());
        const auto type = classify_crossing(in.side, e.side);
        ASSERT_EQ(type == CrossingType::Reversal, now_up != up);
        up = now_up;
      }
    }
    // Checkpoints sit on the path.
    for (std::size_t i = 1; i < rec.checkpoints.size(); ++i)
      ASSERT_NEAR(rec.checkpoints[i].arclength - rec.checkpoints[i - 1].arclength, 5.0, 1e-6);
  }
}

TEST(TracePlane, Deterministic) {
  const SystemParams p{{4.1, 0.3}, {0.7, 3.9}, 1.2, 0.8, 0.7};
  const auto a = trace_plane(p, {2.0, 2.0}, false, 5000, 1.0);
  const auto b = trace_plane(p, {2.0, 2.0}, false, 5000, 1.0);
  ASSERT_EQ(a.events.size(), b.events.size());
  for (std::size_t i = 0; i < a.events.size(); ++i) {
    ASSERT_EQ(a.events[i].point, b.events[i].point);
    ASSERT_EQ(a.events[i].arclength, b.events[i].arclength);
  }
}
