#pragma once

// Reference computations used only by tests. They share no numerical code
// with the library: integrals go through Boost's adaptive Gauss–Kronrod
// rules and geometry is written out by hand.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace oracle {

inline constexpr double pi = std::numbers::pi;

struct P {
  double x, y;
};

template <class F>
double gk(F f, double a, double b, double tol = 1e-11) {
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 12, tol);
}

// ∫_{|y|≤1} −log|z − y| m(|y|) dy in polar coordinates about z, so the
// logarithmic singularity is integrable against the Jacobian s ds.
inline double log_potential(const std::function<double(double)>& m, P z) {
  const double c = z.x * z.x + z.y * z.y - 1.0;
  auto ray = [&](double th) {
    const double wx = std::cos(th), wy = std::sin(th);
    const double b = z.x * wx + z.y * wy;
    const double disc = b * b - c;
    if (disc <= 0.0) return 0.0;
    const double lo = std::max(0.0, -b - std::sqrt(disc));
    const double hi = -b + std::sqrt(disc);
    if (hi <= lo) return 0.0;
    auto inner = [&](double s) {
      if (s <= 0.0) return 0.0;
      const double px = z.x + s * wx, py = z.y + s * wy;
      return -std::log(s) * m(std::hypot(px, py)) * s;
    };
    return gk(inner, lo, hi, 1e-12);
  };
  const double rz = std::hypot(z.x, z.y);
  if (rz <= 1.0) return gk(ray, 0.0, 2.0 * pi, 1e-11);
  // Outside the disk only a cone of directions hits it; the chord length has
  // square-root endpoints, removed by θ = θc + α sin t.
  const double tc = std::atan2(-z.y, -z.x), alpha = std::asin(1.0 / rz);
  return gk([&](double t) { return ray(tc + alpha * std::sin(t)) * alpha * std::cos(t); }, -pi / 2, pi / 2, 1e-12);
}

// ∬ −log|x − y| dμ dμ for a radial density, reusing the potential oracle.
inline double self_energy(const std::function<double(double)>& m) {
  auto f = [&](double r) { return log_potential(m, {r, 0.0}) * m(r) * 2.0 * pi * r; };
  return gk(f, 0.0, 1.0, 1e-10);
}

// F(X_N, μ) assembled from independently integrated pieces.
inline double log_energy(const std::vector<P>& pts, const std::function<double(double)>& m, double self) {
  const double n = static_cast<double>(pts.size());
  double pairs = 0.0, pot = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j)
      pairs -= std::log(std::hypot(pts[i].x - pts[j].x, pts[i].y - pts[j].y));
    pot += log_potential(m, pts[i]);
  }
  return pairs - n * pot + 0.5 * n * n * self;
}

// Closed form of the potential for m(r) = (2/(3π))(2 − r²) on the unit disk.
inline double variable_disk_potential(double r) {
  if (r >= 1.0) return -std::log(r);
  if (r == 0.0) return (4.0 / 3.0) * (0.5 - 1.0 / 16.0);
  const double lr = std::log(r), r2 = r * r, r4 = r2 * r2;
  const double mass = (4.0 * r2 - r4) / 3.0;
  return -lr * mass - (4.0 / 3.0) * ((-0.5 + 1.0 / 16.0) - (r2 * lr - r2 / 2.0 - r4 / 4.0 * lr + r4 / 16.0));
}

// Pairwise nearest-neighbour radius ¼ min(N^{-1/2}, min_j |xᵢ − xⱼ|).
inline std::vector<double> nearest_neighbor_radii(const std::vector<P>& pts) {
  const double cap = 1.0 / std::sqrt(static_cast<double>(pts.size()));
  std::vector<double> r(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < pts.size(); ++j)
      if (j != i) d = std::min(d, std::hypot(pts[i].x - pts[j].x, pts[i].y - pts[j].y));
    r[i] = 0.25 * std::min(cap, d);
  }
  return r;
}

// Adaptive Cartesian quadtree for
//   (1/4π) ∫ ⟨E_η, (2 sym Dψ − div ψ Id) E_η⟩
// with equal truncation η. Cells are accepted when a 3×3 Gauss rule agrees
// with its four children; cells cut by a truncation circle are refined to a
// fixed fraction of η.
struct AniProblem {
  std::vector<P> pts;
  std::function<P(P)> background;                  // N ∇p(z)
  std::function<std::array<double, 4>(P)> jac;     // Dψ row-major
  P center;
  double radius;
};

inline double ani_at(const AniProblem& pb, double eta, double tol) {
  const double g3[3] = {-std::sqrt(0.6), 0.0, std::sqrt(0.6)};
  const double w3[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
  auto f = [&](double x, double y) {
    const double dx0 = x - pb.center.x, dy0 = y - pb.center.y;
    if (dx0 * dx0 + dy0 * dy0 >= pb.radius * pb.radius) return 0.0;
    double ex = 0.0, ey = 0.0;
    for (const P& p : pb.pts) {
      const double dx = x - p.x, dy = y - p.y, d2 = dx * dx + dy * dy;
      if (d2 > eta * eta) {
        ex -= dx / d2;
        ey -= dy / d2;
      }
    }
    const P b = pb.background({x, y});
    ex -= b.x;
    ey -= b.y;
    const auto d = pb.jac({x, y});
    const double div = d[0] + d[3], off = d[1] + d[2];
    const double mxx = 2 * d[0] - div, myy = 2 * d[3] - div;
    return (mxx * ex * ex + 2 * off * ex * ey + myy * ey * ey) / (4.0 * pi);
  };
  auto rule = [&](double x0, double y0, double h) {
    double s = 0.0;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b)
        s += w3[a] * w3[b] * f(x0 + 0.5 * h * (1 + g3[a]), y0 + 0.5 * h * (1 + g3[b]));
    return s * 0.25 * h * h;
  };
  auto cut = [&](double x0, double y0, double h) {
    for (const P& p : pb.pts) {
      const double cx = std::clamp(p.x, x0, x0 + h), cy = std::clamp(p.y, y0, y0 + h);
      const double near = std::hypot(cx - p.x, cy - p.y);
      const double fx = std::max(std::abs(p.x - x0), std::abs(p.x - x0 - h));
      const double fy = std::max(std::abs(p.y - y0), std::abs(p.y - y0 - h));
      if (near <= eta && std::hypot(fx, fy) >= eta) return true;
    }
    return false;
  };
  const double side = 2.0 * pb.radius;
  std::function<double(double, double, double, double, int)> rec = [&](double x0, double y0, double h, double whole,
                                                                        int depth) {
    const double hh = 0.5 * h;
    const double parts[4] = {rule(x0, y0, hh), rule(x0 + hh, y0, hh), rule(x0, y0 + hh, hh), rule(x0 + hh, y0 + hh, hh)};
    const double sum = parts[0] + parts[1] + parts[2] + parts[3];
    const bool straddles = cut(x0, y0, h);
    const double local_tol = tol * (h * h) / (side * side);
    if (depth > 3 && !straddles && std::abs(sum - whole) < local_tol) return sum;
    if (depth >= 30 || (straddles && h < eta / 256.0)) return sum;
    return rec(x0, y0, hh, parts[0], depth + 1) + rec(x0 + hh, y0, hh, parts[1], depth + 1) +
           rec(x0, y0 + hh, hh, parts[2], depth + 1) + rec(x0 + hh, y0 + hh, hh, parts[3], depth + 1);
  };
  const double x0 = pb.center.x - pb.radius, y0 = pb.center.y - pb.radius;
  return rec(x0, y0, side, rule(x0, y0, side), 0);
}

// η → 0 limit from two truncations, using the η² behaviour.
inline double ani_limit(const AniProblem& pb, double eta, double tol) {
  const double a = ani_at(pb, eta, tol), b = ani_at(pb, eta / 2.0, tol);
  return (4.0 * b - a) / 3.0;
}

}  // namespace oracle
