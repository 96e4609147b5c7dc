#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

namespace coulomb {

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
  constexpr Vec2& operator-=(Vec2 o) { x -= o.x; y -= o.y; return *this; }
  constexpr Vec2& operator*=(double s) { x *= s; y *= s; return *this; }
  friend constexpr Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend constexpr Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend constexpr Vec2 operator-(Vec2 a) { return {-a.x, -a.y}; }
  friend constexpr Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend constexpr Vec2 operator*(Vec2 a, double s) { return {s * a.x, s * a.y}; }
  friend constexpr Vec2 operator/(Vec2 a, double s) { return {a.x / s, a.y / s}; }
  friend constexpr bool operator==(Vec2, Vec2) = default;
};

constexpr double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
constexpr double norm2(Vec2 a) { return dot(a, a); }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline bool is_finite(Vec2 a) { return std::isfinite(a.x) && std::isfinite(a.y); }

// Row-major 2x2 matrix: [[xx, xy], [yx, yy]].
struct Mat2 {
  double xx = 0.0, xy = 0.0, yx = 0.0, yy = 0.0;

  static constexpr Mat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }
  constexpr double trace() const { return xx + yy; }
  constexpr double det() const { return xx * yy - xy * yx; }
  constexpr Mat2 transposed() const { return {xx, yx, xy, yy}; }
  constexpr Mat2 sym() const {
    const double off = 0.5 * (xy + yx);
    return {xx, off, off, yy};
  }
  friend constexpr Mat2 operator+(Mat2 a, Mat2 b) {
    return {a.xx + b.xx, a.xy + b.xy, a.yx + b.yx, a.yy + b.yy};
  }
  friend constexpr Mat2 operator-(Mat2 a, Mat2 b) {
    return {a.xx - b.xx, a.xy - b.xy, a.yx - b.yx, a.yy - b.yy};
  }
  friend constexpr Mat2 operator*(double s, Mat2 a) {
    return {s * a.xx, s * a.xy, s * a.yx, s * a.yy};
  }
  friend constexpr Vec2 operator*(Mat2 m, Vec2 v) {
    return {m.xx * v.x + m.xy * v.y, m.yx * v.x + m.yy * v.y};
  }
  // Frobenius norm.
  double norm() const { return std::sqrt(xx * xx + xy * xy + yx * yx + yy * yy); }
};

// a ⊗ b, i.e. the matrix a bᵀ.
constexpr Mat2 outer(Vec2 a, Vec2 b) { return {a.x * b.x, a.x * b.y, a.y * b.x, a.y * b.y}; }

// ⟨u, M v⟩
constexpr double quad_form(Vec2 u, Mat2 m, Vec2 v) { return dot(u, m * v); }

struct Disk {
  Vec2 center;
  double radius = 0.0;

  bool contains(Vec2 p) const { return norm2(p - center) <= radius * radius; }
  // Signed distance from the boundary, negative inside.
  double signed_distance(Vec2 p) const { return norm(p - center) - radius; }
  double distance(Vec2 p) const { return std::max(0.0, signed_distance(p)); }
  double area() const { return pi * radius * radius; }
};

// Parameter interval [lo, hi] (possibly empty) of the ray origin + s·dir, s ≥ 0,
// lying inside the disk. dir must be a unit vector.
struct RayInterval {
  double lo = 0.0;
  double hi = -1.0;
  bool empty() const { return !(hi > lo); }
};

inline RayInterval ray_disk_intersection(Vec2 origin, Vec2 dir, const Disk& d) {
  const Vec2 oc = origin - d.center;
  const double b = dot(oc, dir);
  const double c = norm2(oc) - d.radius * d.radius;
  const double disc = b * b - c;
  if (disc <= 0.0) return {};
  const double s = std::sqrt(disc);
  const double lo = std::max(0.0, -b - s);
  const double hi = -b + s;
  if (hi <= lo) return {};
  return {lo, hi};
}

}  // namespace coulomb
