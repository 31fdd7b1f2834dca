#pragma once

// Planar primitives shared by the plane tracer, the slit surface and the
// renormalization code.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>

#include "windtree/errors.hpp"

namespace windtree {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
  constexpr Vec2& operator-=(Vec2 o) { x -= o.x; y -= o.y; return *this; }
  friend constexpr Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend constexpr Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend constexpr Vec2 operator-(Vec2 a) { return {-a.x, -a.y}; }
  friend constexpr Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend constexpr Vec2 operator*(Vec2 a, double s) { return {s * a.x, s * a.y}; }
  friend constexpr bool operator==(Vec2 a, Vec2 b) = default;
};

constexpr double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
constexpr double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline bool finite(Vec2 a) { return std::isfinite(a.x) && std::isfinite(a.y); }

inline Vec2 rotate(Vec2 v, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

/// Maps an angle into [0, 2π).
inline double normalize_angle(double phi) {
  double r = std::fmod(phi, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  if (r >= kTwoPi) r = 0.0;
  return r;
}

/// Direction of travel, counterclockwise from +x, kept in [0, 2π).
class DirAngle {
 public:
  constexpr DirAngle() = default;
  explicit DirAngle(double phi) : phi_(normalize_angle(phi)) {}

  static DirAngle up() { return DirAngle(kPi / 2); }
  static DirAngle down() { return DirAngle(3 * kPi / 2); }

  double phi() const { return phi_; }
  Vec2 unit() const { return {std::cos(phi_), std::sin(phi_)}; }

  friend bool operator==(DirAngle a, DirAngle b) { return a.phi_ == b.phi_; }

 private:
  double phi_ = 0.0;
};

/// Smallest absolute difference between two angles, modulo 2π.
inline double angle_distance(double a, double b) {
  double d = std::fabs(normalize_angle(a) - normalize_angle(b));
  return std::min(d, kTwoPi - d);
}

struct Tolerance {
  double eps_geom = 1e-12;
  double eps_corner = 1e-9;

  /// Defaults scaled to the obstacle: eps_corner = 1e-9 · max(a, b).
  static Tolerance for_obstacle(double a, double b) {
    return Tolerance{1e-12, 1e-9 * std::max(a, b)};
  }
};

/// Mirror image of a direction across a line through the origin at
/// `line_angle`. Involutive.
inline DirAngle reflect_direction(DirAngle d, double line_angle) {
  return DirAngle(2.0 * line_angle - d.phi());
}

/// 2×2 integer matrix, row-major.
struct Mat2i {
  std::int64_t a = 1, b = 0, c = 0, d = 1;

  static constexpr Mat2i identity() { return {}; }
  constexpr std::int64_t det() const { return a * d - b * c; }
  friend constexpr Mat2i operator*(const Mat2i& x, const Mat2i& y) {
    return {x.a * y.a + x.b * y.c, x.a * y.b + x.b * y.d,
            x.c * y.a + x.d * y.c, x.c * y.b + x.d * y.d};
  }
  friend constexpr bool operator==(const Mat2i&, const Mat2i&) = default;
};

struct ReducedBasis {
  Vec2 e1;
  Vec2 e2;
  Mat2i m;  ///< e1' = m.a e1 + m.b e2, e2' = m.c e1 + m.d e2
};

/// Applies an integer change of basis: rows of `m` are coefficients on (e1, e2).
inline std::pair<Vec2, Vec2> apply_basis(const Mat2i& m, Vec2 e1, Vec2 e2) {
  return {double(m.a) * e1 + double(m.b) * e2, double(m.c) * e1 + double(m.d) * e2};
}

inline void check_lattice(Vec2 e1, Vec2 e2, double eps_geom = 1e-12) {
  if (!finite(e1) || !finite(e2) ||
      std::fabs(cross(e1, e2)) < eps_geom * norm(e1) * norm(e2) ||
      norm(e1) == 0.0 || norm(e2) == 0.0)
    throw Error(ErrorKind::DegenerateLattice, "lattice basis is (nearly) dependent");
}

/// Lagrange–Gauss reduction. The output satisfies
/// |e1'| <= |e2'| <= |e2' ± e1'|.
inline ReducedBasis lattice_reduce(Vec2 e1, Vec2 e2, double eps_geom = 1e-12) {
  check_lattice(e1, e2, eps_geom);
  Vec2 u = e1, v = e2;
  Mat2i m = Mat2i::identity();
  if (dot(u, u) > dot(v, v)) {
    std::swap(u, v);
    m = Mat2i{0, 1, 1, 0};
  }
  for (int iter = 0; iter < 10000; ++iter) {
    const double mu = std::round(dot(u, v) / dot(u, u));
    if (mu != 0.0) {
      v = v - mu * u;
      const auto k = static_cast<std::int64_t>(mu);
      m.c -= k * m.a;
      m.d -= k * m.b;
      // recompute from the integer matrix so rounding does not accumulate
      v = double(m.c) * e1 + double(m.d) * e2;
    }
    if (dot(v, v) < dot(u, u)) {
      std::swap(u, v);
      std::swap(m.a, m.c);
      std::swap(m.b, m.d);
    } else {
      break;
    }
  }
  u = double(m.a) * e1 + double(m.b) * e2;
  return {u, v, m};
}

/// Corners of an a×b rectangle whose side of length a makes angle θ with the
/// horizontal, counterclockwise starting at the lowest corner.
inline std::array<Vec2, 4> rectangle_corners(double a, double b, double theta, Vec2 center) {
  if (!(theta > 0.0 && theta < kPi / 2))
    throw Error(ErrorKind::DegenerateAngle, "theta must lie in (0, pi/2)");
  if (!(a > 0.0 && b > 0.0))
    throw Error(ErrorKind::DegenerateAngle, "rectangle sides must be positive");
  const Vec2 u{std::cos(theta), std::sin(theta)};
  const Vec2 w{-std::sin(theta), std::cos(theta)};
  const Vec2 hu = 0.5 * a * u, hw = 0.5 * b * w;
  return {center - hu - hw, center + hu - hw, center + hu + hw, center - hu + hw};
}

}  // namespace windtree
