#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include <boost/geometry.hpp>
#include <boost/geometry/index/rtree.hpp>

#include "coulomb/energy.hpp"
#include "coulomb/fields.hpp"
#include "coulomb/geometry.hpp"
#include "coulomb/measure.hpp"
#include "coulomb/quadrature.hpp"

namespace coulomb {

// Raised when two particles coincide, so a nearest-neighbour radius is 0.
struct CoincidentPointsError : std::domain_error {
  CoincidentPointsError() : std::domain_error("coincident points give a zero truncation radius") {}
};

// One positive truncation radius per particle.
using TruncationVector = std::vector<double>;

namespace detail {

namespace bg = boost::geometry;
namespace bgi = boost::geometry::index;
using RPoint = bg::model::point<double, 2, bg::cs::cartesian>;
using RValue = std::pair<RPoint, std::size_t>;
using RTree = bgi::rtree<RValue, bgi::quadratic<16>>;

inline RTree build_index(std::span<const Vec2> pts) {
  std::vector<RValue> values;
  values.reserve(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) values.emplace_back(RPoint(pts[i].x, pts[i].y), i);
  return RTree(values.begin(), values.end());
}

}  // namespace detail

// rᵢ = ¼ min(N^{−1/2}, min_{j≠i} |xᵢ − xⱼ|), via an R-tree in O(N log N).
inline TruncationVector nearest_neighbor_radii(std::span<const Vec2> pts) {
  if (pts.size() < 2) throw std::invalid_argument("nearest_neighbor_radii needs at least two points");
  const auto tree = detail::build_index(pts);
  const double cap = 1.0 / std::sqrt(double(pts.size()));
  TruncationVector r(pts.size());
  std::vector<detail::RValue> hits;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    hits.clear();
    tree.query(detail::bgi::nearest(detail::RPoint(pts[i].x, pts[i].y), 2), std::back_inserter(hits));
    double d = infinity;
    for (const auto& h : hits) {
      if (h.second == i) continue;
      d = std::min(d, norm(pts[h.second] - pts[i]));
    }
    if (!(d > 0.0)) throw CoincidentPointsError();
    r[i] = 0.25 * std::min(cap, d);
  }
  return r;
}

inline TruncationVector nearest_neighbor_radii(const PointConfiguration& config) {
  return nearest_neighbor_radii(config.points());
}

// Σ −(z − xᵢ)/|z − xᵢ|² over charges with |z − xᵢ| > ηᵢ: the particle part of
// the truncated field, linear in the set of charges.
inline Vec2 charge_field(std::span<const Vec2> pts, std::span<const double> eta, Vec2 z) {
  Vec2 e{};
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Vec2 d = z - pts[i];
    const double d2 = norm2(d);
    if (d2 > eta[i] * eta[i]) e -= d / d2;
  }
  return e;
}

// ∇h_η(z): truncated charges minus the background term N ∇p(z).
inline Vec2 truncated_field_at(std::span<const Vec2> pts, const EquilibriumMeasure& mu, std::span<const double> eta,
                               Vec2 z) {
  if (eta.size() != pts.size()) throw std::invalid_argument("truncation vector size mismatch");
  return charge_field(pts, eta, z) - double(pts.size()) * mu.log_potential_gradient(z);
}

inline Vec2 truncated_field_at(const PointConfiguration& config, const EquilibriumMeasure& mu,
                               const TruncationVector& eta, Vec2 z) {
  return truncated_field_at(config.points(), mu, eta, z);
}

struct QuadratureEstimate {
  double value = 0.0;
  double error = 0.0;
};

namespace detail {

// C^∞ cutoff: 1 on [0, ½], 0 on [1, ∞).
inline double smooth_cutoff(double s) {
  if (s <= 0.5) return 1.0;
  if (s >= 1.0) return 0.0;
  const double t = 2.0 * (s - 0.5);
  const double a = std::exp(-1.0 / (1.0 - t));
  const double b = std::exp(-1.0 / t);
  return a / (a + b);
}

// Integrates ⟨E, W(z) E⟩ for the truncated field E over the plane, W vanishing
// off a disk (the window).
//
// The plane is split by a partition of unity. Each particle owns a disk of
// radius Rᵢ = 2rᵢ (pairwise disjoint) where a polar patch carries χᵢ·integrand:
// trapezoid in angle, Gauss in radius with a log map across the 1/ρ² zone.
// The remainder (1 − Σχᵢ)·integrand is smooth and goes on an adaptive polar
// cell tree over the window, refined towards the charges. Within a patch only
// the owner's truncation matters, and outside all patches no truncation acts.
class PartitionQuadrature {
 public:
  PartitionQuadrature(std::span<const Vec2> pts, const EquilibriumMeasure& mu, TruncationVector radii, Disk window,
                      bool clip_to_window)
      : pts_(pts), mu_(&mu), r_(std::move(radii)), window_(window), clip_(clip_to_window),
        tree_(build_index(pts)) {}

  template <class W>
  double patches(const W& weight, std::span<const double> eta, double lambda) const {
    CompensatedSum total;
    for (std::size_t i = 0; i < pts_.size(); ++i) {
      const double R = 2.0 * r_[i];
      if (norm(pts_[i] - window_.center) >= window_.radius + R) continue;
      total.add(patch(i, weight, eta[i], lambda));
    }
    return total.value();
  }

  template <class W>
  double outer(const W& weight, double lambda) const {
    if (window_.radius <= 0.0) return 0.0;
    CompensatedSum total;
    const double s0 = window_.radius / 4.0;
    const int nr = 4;
    for (int ir = 0; ir < nr; ++ir) {
      const double r0 = ir * s0, r1 = (ir + 1) * s0;
      const int nt = std::max(4, int(std::ceil(two_pi * r1 / s0)));
      for (int it = 0; it < nt; ++it) cell(weight, lambda, r0, r1, two_pi * it / nt, two_pi * (it + 1) / nt, 0, total);
    }
    return total.value();
  }

 private:
  // Field with particle `skip` removed (untruncated elsewhere), plus background.
  Vec2 field_without(Vec2 z, std::size_t skip) const {
    Vec2 e{};
    for (std::size_t j = 0; j < pts_.size(); ++j) {
      if (j == skip) continue;
      const Vec2 d = z - pts_[j];
      e -= d / norm2(d);
    }
    return e - double(pts_.size()) * mu_->log_potential_gradient(z);
  }

  // Angles, seen from x, where the circle |z − x| = rho meets ∂window, plus
  // the tangent directions when x lies outside the window.
  std::vector<double> angular_breaks(Vec2 x, std::initializer_list<double> radii) const {
    std::vector<double> out;
    const Vec2 to_c = window_.center - x;
    const double d = norm(to_c);
    if (d == 0.0) return out;
    const double base = std::atan2(to_c.y, to_c.x);
    const double rw = window_.radius;
    for (double rho : radii) {
      if (!(rho > 0.0) || d >= rho + rw || d <= std::abs(rho - rw)) continue;
      const double a = std::acos(std::clamp((rho * rho + d * d - rw * rw) / (2.0 * rho * d), -1.0, 1.0));
      out.push_back(base - a);
      out.push_back(base + a);
    }
    if (d > rw) {
      const double a = std::asin(rw / d);
      out.push_back(base - a);
      out.push_back(base + a);
    }
    for (double& t : out) t = t - two_pi * std::floor(t / two_pi);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end(), [](double a, double b) { return b - a < 1e-14; }), out.end());
    return out;
  }

  template <class W>
  double patch(std::size_t i, const W& weight, double eta, double lambda) const {
    const double R = 2.0 * r_[i];
    const int n_theta = std::max(8, int(std::ceil(8.0 / lambda)));
    const int q_r = std::clamp(int(std::ceil(2.0 / lambda)), 2, max_gauss_order);
    const int q_log = std::clamp(int(std::ceil(3.0 / lambda)), 2, max_gauss_order);
    const Vec2 x = pts_[i];
    auto ray = [&](double th) {
      const Vec2 dir{std::cos(th), std::sin(th)};
      double lo = 0.0, hi = R;
      if (clip_) {
        const RayInterval iv = ray_disk_intersection(x, dir, window_);
        if (iv.empty()) return 0.0;
        lo = std::max(lo, iv.lo);
        hi = std::min(hi, iv.hi);
        if (hi <= lo) return 0.0;
      }
      auto integrand = [&](double rho) {
        const Vec2 z = x + rho * dir;
        const auto w = weight(z);
        if (!w) return 0.0;
        Vec2 e = field_without(z, i);
        if (rho > eta) e -= (rho * dir) / (rho * rho);
        return smooth_cutoff(rho / R) * quad_form(e, *w, e) * rho;
      };
      double sum = 0.0;
      auto seg = [&](double a, double b, auto&& rule) {
        a = std::max(a, lo);
        b = std::min(b, hi);
        if (b > a) sum += rule(a, b);
      };
      seg(0.0, std::min(eta, 0.5 * R), [&](double a, double b) { return integrate_gl(integrand, a, b, q_r); });
      seg(eta, 0.5 * R, [&](double a, double b) { return integrate_log_mapped(integrand, a, b, q_log); });
      seg(std::max(eta, 0.5 * R), R, [&](double a, double b) { return integrate_composite(integrand, a, b, 2, q_r); });
      return sum;
    };

    const bool crosses = clip_ && std::abs(norm(x - window_.center) - window_.radius) < R;
    if (!crosses) {
      // Periodic and smooth in angle: the trapezoid rule converges spectrally.
      CompensatedSum sum;
      for (int k = 0; k < n_theta; ++k) sum.add(ray(two_pi * (k + 0.5) / n_theta));
      return sum.value() * two_pi / n_theta;
    }
    // The window boundary cuts the patch: integrate arc by arc between the
    // angles where the ray limits change form. θ = m + h sin(πu/2) absorbs
    // square-root behaviour at tangent directions.
    std::vector<double> br = angular_breaks(x, {eta, 0.5 * R, R});
    if (br.empty()) br.push_back(0.0);
    const int q_t = std::clamp(int(std::ceil(4.0 / lambda)), 4, max_gauss_order);
    CompensatedSum sum;
    for (std::size_t k = 0; k < br.size(); ++k) {
      const double a = br[k];
      const double b = k + 1 < br.size() ? br[k + 1] : br[0] + two_pi;
      const double m = 0.5 * (a + b), h = 0.5 * (b - a);
      sum.add(integrate_gl([&](double u) {
        const double c = 0.5 * pi;
        return ray(m + h * std::sin(c * u)) * h * c * std::cos(c * u);
      }, -1.0, 1.0, q_t));
    }
    return sum.value();
  }

  template <class W>
  void cell(const W& weight, double lambda, double r0, double r1, double t0, double t1, int depth,
            CompensatedSum& total) const {
    const double tm = 0.5 * (t0 + t1), rm = 0.5 * (r0 + r1);
    const Vec2 zc = window_.center + rm * Vec2{std::cos(tm), std::sin(tm)};
    const double size = std::max(r1 - r0, r1 * (t1 - t0));
    std::vector<RValue> hit;
    tree_.query(bgi::nearest(RPoint(zc.x, zc.y), 1), std::back_inserter(hit));
    const std::size_t j = hit.front().second;
    const double d = norm(zc - pts_[j]);
    if (d + size <= r_[j]) return;  // inside χⱼ ≡ 1: no outer contribution
    const bool refine = size > lambda * std::max(r_[j], d - size);
    if (refine && depth < 40) {
      cell(weight, lambda, r0, rm, t0, tm, depth + 1, total);
      cell(weight, lambda, rm, r1, t0, tm, depth + 1, total);
      cell(weight, lambda, r0, rm, tm, t1, depth + 1, total);
      cell(weight, lambda, rm, r1, tm, t1, depth + 1, total);
      return;
    }
    const GaussRule& g = gauss_legendre(4);
    double s = 0.0;
    for (std::size_t a = 0; a < g.nodes.size(); ++a) {
      const double r = rm + 0.5 * (r1 - r0) * g.nodes[a];
      for (std::size_t b = 0; b < g.nodes.size(); ++b) {
        const double t = tm + 0.5 * (t1 - t0) * g.nodes[b];
        const Vec2 z = window_.center + r * Vec2{std::cos(t), std::sin(t)};
        const auto w = weight(z);
        if (!w) continue;
        Vec2 e{};
        double chi = 0.0;
        for (std::size_t k = 0; k < pts_.size(); ++k) {
          const Vec2 dz = z - pts_[k];
          const double d2 = norm2(dz);
          const double R = 2.0 * r_[k];
          if (d2 < R * R) chi += smooth_cutoff(std::sqrt(d2) / R);
          e -= dz / d2;
        }
        if (chi >= 1.0) continue;
        e -= double(pts_.size()) * mu_->log_potential_gradient(z);
        s += g.weights[a] * g.weights[b] * r * (1.0 - chi) * quad_form(e, *w, e);
      }
    }
    total.add(s * 0.25 * (r1 - r0) * (t1 - t0));
  }

  std::span<const Vec2> pts_;
  const EquilibriumMeasure* mu_;
  TruncationVector r_;
  Disk window_;
  bool clip_;
  RTree tree_;
};

inline double resolution_factor(const TruncationVector& r, std::optional<double> h) {
  const double rmin = *std::min_element(r.begin(), r.end());
  const double hh = h.value_or(rmin / 4.0);
  if (!(hh > 0.0)) throw std::invalid_argument("resolution must be positive");
  if (hh > rmin / 4.0 * (1.0 + 1e-12)) throw std::invalid_argument("resolution too coarse");
  return hh / rmin;
}

}  // namespace detail

// Ele(Ω) = ∫_Ω |∇h_r̄|², with the nearest-neighbour truncation r̄. The error
// estimate is the change when the resolution is coarsened by two.
// h is the node spacing near the closest pair; it must not exceed min rᵢ/4.
inline QuadratureEstimate electric_energy(const PointConfiguration& config, const EquilibriumMeasure& mu,
                                          const Disk& window, std::optional<double> h = std::nullopt) {
  if (window.radius <= 0.0) return {};
  if (norm(window.center - mu.support().center) + window.radius > mu.support().radius)
    throw std::invalid_argument("electric energy window must lie inside the support");
  const TruncationVector r = nearest_neighbor_radii(config);
  const double lambda = detail::resolution_factor(r, h);
  const detail::PartitionQuadrature q(config.points(), mu, r, window, true);
  auto weight = [&](Vec2 z) -> std::optional<Mat2> {
    if (!window.contains(z)) return std::nullopt;
    return Mat2::identity();
  };
  auto eval = [&](double lam) { return q.outer(weight, lam) + q.patches(weight, r, lam); };
  const double fine = eval(lambda);
  const double coarse = eval(2.0 * lambda);
  return {fine, std::max(std::abs(fine - coarse), 1e-12 * std::abs(fine))};
}

// Number of particles within the closed N^{−1/2}-neighbourhood of the window.
inline std::size_t points_count(std::span<const Vec2> pts, const Disk& window) {
  const double reach = window.radius + 1.0 / std::sqrt(double(pts.size()));
  std::size_t k = 0;
  for (const Vec2& p : pts) k += norm(p - window.center) <= reach ? 1 : 0;
  return k;
}

inline std::size_t points_count(const PointConfiguration& config, const Disk& window) {
  return points_count(config.points(), window);
}

struct AnisotropyResult {
  double ani = 0.0;
  double A = 0.0;
  double error_estimate = 0.0;
  bool converged = true;
  std::vector<double> eta_ladder;
  std::vector<double> ladder_values;
};

struct AnisotropyOptions {
  std::optional<double> h;         // node spacing; default min rᵢ/4
  std::optional<double> eta0;      // top of the η ladder; default min rᵢ
};

// Ani(X_N, μ, ψ) = (1/4π) lim_{η→0} ∫ ⟨∇h_η, (2Dψ − div ψ Id) ∇h_η⟩ with equal
// truncation η on the ladder η0, η0/2, η0/4 and Richardson extrapolation in
// η² (the truncation error is even in η). Also returns A = Ani + ¼ Σ div ψ(xᵢ).
template <VectorField Psi>
AnisotropyResult anisotropy(const PointConfiguration& config, const EquilibriumMeasure& mu, const Psi& psi,
                            const AnisotropyOptions& opt = {}) {
  AnisotropyResult out;
  const Disk supp = psi.support();
  const auto pts = config.points();
  CompensatedSum div_sum;
  for (const Vec2& p : pts) div_sum.add(psi.jacobian(p).trace());
  if (supp.radius <= 0.0) {
    out.A = 0.25 * div_sum.value();
    return out;
  }
  const TruncationVector r = nearest_neighbor_radii(config);
  const double lambda = detail::resolution_factor(r, opt.h);
  const double rmin = *std::min_element(r.begin(), r.end());
  const double eta0 = opt.eta0.value_or(rmin);
  if (!(eta0 > 0.0) || eta0 > rmin * (1.0 + 1e-12))
    throw std::invalid_argument("eta0 must lie in (0, min r_i]");

  auto weight = [&](Vec2 z) -> std::optional<Mat2> {
    if (!supp.contains(z)) return std::nullopt;
    const Mat2 d = psi.jacobian(z);
    const Mat2 m = (1.0 / (4.0 * pi)) * (2.0 * d.sym() - d.trace() * Mat2::identity());
    if (m.xx == 0.0 && m.xy == 0.0 && m.yy == 0.0) return std::nullopt;
    return m;
  };
  const detail::PartitionQuadrature q(pts, mu, r, supp, false);
  const double outer_fine = q.outer(weight, lambda);
  const double outer_coarse = q.outer(weight, 2.0 * lambda);
  double quad_err = std::abs(outer_fine - outer_coarse);
  for (int k = 0; k < 3; ++k) {
    const double eta = eta0 / double(1 << k);
    const TruncationVector e(pts.size(), eta);
    const double fine = q.patches(weight, e, lambda);
    const double coarse = q.patches(weight, e, 2.0 * lambda);
    quad_err = std::max(quad_err, std::abs(outer_fine - outer_coarse) + std::abs(fine - coarse));
    out.eta_ladder.push_back(eta);
    out.ladder_values.push_back(outer_fine + fine);
  }
  const auto& v = out.ladder_values;
  const double r1a = (4.0 * v[1] - v[0]) / 3.0;
  const double r1b = (4.0 * v[2] - v[1]) / 3.0;
  out.ani = (16.0 * r1b - r1a) / 15.0;
  const double scale = std::max({std::abs(v[0]), std::abs(v[1]), std::abs(v[2]), 1e-300});
  const double d1 = std::abs(v[1] - v[0]), d2 = std::abs(v[2] - v[1]);
  // Cauchy ladder: successive differences must shrink, unless already at noise level.
  const double noise = std::max(4.0 * quad_err, 1e-13 * scale);
  out.converged = d2 <= 0.75 * d1 || std::max(d1, d2) <= noise;
  out.error_estimate = std::abs(out.ani - r1b) + quad_err + 1e-13 * scale;
  out.A = out.ani + 0.25 * div_sum.value();
  return out;
}

template <VectorField Psi>
double anisotropy_ani(const PointConfiguration& config, const EquilibriumMeasure& mu, const Psi& psi) {
  return anisotropy(config, mu, psi).ani;
}

template <VectorField Psi>
double anisotropy_A(const PointConfiguration& config, const EquilibriumMeasure& mu, const Psi& psi) {
  return anisotropy(config, mu, psi).A;
}

// Midpoint-grid L¹ norm of ∇f_η on a square grid of spacing h. The exact
// value is 2πη.
inline double truncation_gradient_l1(double eta, double h) {
  const int n = int(std::ceil(eta / h)) + 1;
  double s = 0.0;
  for (int i = -n; i < n; ++i)
    for (int j = -n; j < n; ++j) {
      const Vec2 z{(i + 0.5) * h, (j + 0.5) * h};
      const double rho = norm(z);
      if (rho < eta) s += h * h / rho;
    }
  return s;
}

}  // namespace coulomb
