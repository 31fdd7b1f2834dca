#include <gtest/gtest.h>

#include <random>

#include "windtree/geom.hpp"

using namespace windtree;

TEST(ReflectDirection, FormulaAgainstMirroredVectors) {
  const DirAngle d(kPi / 2);
  const double line = kPi / 6;
  const DirAngle r = reflect_direction(d, line);
  EXPECT_NEAR(r.phi(), normalize_angle(-kPi / 6), 1e-15);
  // Mirror the unit vector directly: v' = 2(v·l)l − v.
  const Vec2 l{std::cos(line), std::sin(line)};
  const Vec2 v = d.unit();
  const Vec2 m = 2.0 * dot(v, l) * l - v;
  EXPECT_NEAR(r.unit().x, m.x, 1e-15);
  EXPECT_NEAR(r.unit().y, m.y, 1e-15);
}

TEST(ReflectDirection, LineDirectionIsFixed) {
  EXPECT_NEAR(reflect_direction(DirAngle(kPi / 4), kPi / 4).phi(), kPi / 4, 1e-15);
}

TEST(ReflectDirection, Involution) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(0.0, kTwoPi);
  for (int i = 0; i < 10000; ++i) {
    const DirAngle d(U(rng));
    const double line = U(rng);
    const DirAngle back = reflect_direction(reflect_direction(d, line), line);
    EXPECT_LE(angle_distance(back.phi(), d.phi()), 4e-15);
  }
}

TEST(ReflectDirection, ParallelPreservesPerpendicularNegates) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(0.0, kTwoPi);
  for (int i = 0; i < 1000; ++i) {
    const DirAngle d(U(rng));
    const double line = U(rng);
    const DirAngle par = reflect_direction(reflect_direction(d, line), line + kPi);
    const DirAngle perp = reflect_direction(reflect_direction(d, line), line + kPi / 2);
    EXPECT_LE(angle_distance(par.phi(), d.phi()), 1e-14);
    EXPECT_LE(angle_distance(perp.phi(), d.phi() + kPi), 1e-14);
  }
}

TEST(LatticeReduce, IdentityBasisUnchanged) {
  const auto r = lattice_reduce({1, 0}, {0, 1});
  EXPECT_EQ(r.m, Mat2i::identity());
  EXPECT_EQ(r.e1, (Vec2{1, 0}));
  EXPECT_EQ(r.e2, (Vec2{0, 1}));
}

namespace {
// Shortest two independent vectors by brute force over small coefficients.
std::pair<double, double> brute_minima(Vec2 e1, Vec2 e2) {
  double best1 = 1e300;
  Vec2 v1;
  for (int i = -10; i <= 10; ++i)
    for (int j = -10; j <= 10; ++j) {
      if (i == 0 && j == 0) continue;
      const Vec2 v = double(i) * e1 + double(j) * e2;
      if (norm(v) < best1) { best1 = norm(v); v1 = v; }
    }
  double best2 = 1e300;
  for (int i = -10; i <= 10; ++i)
    for (int j = -10; j <= 10; ++j) {
      const Vec2 v = double(i) * e1 + double(j) * e2;
      if (std::fabs(cross(v, v1)) < 1e-9) continue;
      best2 = std::min(best2, norm(v));
    }
  return {best1, best2};
}
}  // namespace

TEST(LatticeReduce, SkewedIntegerBasis) {
  const auto r = lattice_reduce({5, 1}, {4, 1});
  EXPECT_EQ(std::llabs(r.m.det()), 1);
  const auto [m1, m2] = brute_minima({5, 1}, {4, 1});
  EXPECT_NEAR(norm(r.e1), m1, 1e-12);
  EXPECT_NEAR(norm(r.e2), m2, 1e-12);
  EXPECT_NEAR(norm(r.e1), 1.0, 1e-12);
  EXPECT_NEAR(std::fabs(cross(r.e1, r.e2)), 1.0, 1e-12);
}

TEST(LatticeReduce, RandomBasesSpanSameLattice) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(-5.0, 5.0);
  std::uniform_int_distribution<int> K(-6, 6);
  int checked = 0;
  while (checked < 10000) {
    const Vec2 b1{U(rng), U(rng)}, b2{U(rng), U(rng)};
    if (std::fabs(cross(b1, b2)) < 0.5) continue;
    // Skew by a random unimodular matrix.
    const int k = K(rng);
    const Vec2 e1 = b1, e2 = b2 + double(k) * b1;
    const auto r = lattice_reduce(e1, e2);
    ++checked;
    ASSERT_EQ(std::llabs(r.m.det()), 1);
    const auto [p, q] = apply_basis(r.m, e1, e2);
    ASSERT_NEAR(p.x, r.e1.x, 1e-9);
    ASSERT_NEAR(q.y, r.e2.y, 1e-9);
    // Express e1, e2 in the reduced basis: coordinates must be integers.
    const double det = cross(r.e1, r.e2);
    for (Vec2 v : {e1, e2}) {
      const double c1 = cross(v, r.e2) / det, c2 = cross(r.e1, v) / det;
      ASSERT_NEAR(c1, std::round(c1), 1e-8);
      ASSERT_NEAR(c2, std::round(c2), 1e-8);
    }
    ASSERT_LE(norm(r.e1), norm(r.e2) * (1 + 1e-12));
    ASSERT_LE(norm(r.e2), norm(r.e2 + r.e1) * (1 + 1e-12));
    ASSERT_LE(norm(r.e2), norm(r.e2 - r.e1) * (1 + 1e-12));
  }
}

TEST(LatticeReduce, DegenerateRejected) {
  try {
    lattice_reduce({1, 2}, {2, 4});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegenerateLattice);
  }
}

TEST(RectangleCorners, RotatedSquare) {
  const auto c = rectangle_corners(std::sqrt(2.0), std::sqrt(2.0), kPi / 4, {0, 0});
  const Vec2 expect[4] = {{0, -1}, {1, 0}, {0, 1}, {-1, 0}};
  for (int i = 0; i < 4; ++i) {
    EXPECT_NEAR(c[i].x, expect[i].x, 1e-15);
    EXPECT_NEAR(c[i].y, expect[i].y, 1e-15);
  }
}

TEST(RectangleCorners, CentroidAndLowestCorner) {
  const Vec2 ctr{3.5, -1.25};
  const auto c = rectangle_corners(2.0, 1.0, kPi / 6, ctr);
  const Vec2 mean = 0.25 * (c[0] + c[1] + c[2] + c[3]);
  EXPECT_NEAR(mean.x, ctr.x, 1e-15);
  EXPECT_NEAR(mean.y, ctr.y, 1e-15);
  const double lowest = -(2.0 * 0.5 + 1.0 * std::sqrt(3.0) / 2) / 2;
  EXPECT_NEAR(c[0].y - ctr.y, lowest, 1e-15);
  for (int i = 1; i < 4; ++i) EXPECT_GT(c[i].y, c[0].y);
  // Counterclockwise orientation.
  EXPECT_GT(cross(c[1] - c[0], c[2] - c[1]), 0.0);
}

TEST(RectangleCorners, RejectsFlatAngles) {
  for (double th : {0.0, kPi / 2, -0.1}) {
    try {
      rectangle_corners(1, 1, th, {});
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::DegenerateAngle);
    }
  }
}
