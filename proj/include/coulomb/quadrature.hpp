#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include <boost/math/special_functions/legendre.hpp>

#include "coulomb/geometry.hpp"

namespace coulomb {

// Neumaier-compensated running sum. Merging two partials is exact up to the
// final rounding, so per-chain partials combine independently of order.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v))
      comp_ += (sum_ - t) + v;
    else
      comp_ += (v - t) + sum_;
    sum_ = t;
  }
  void merge(const CompensatedSum& o) {
    add(o.sum_);
    add(o.comp_);
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

struct GaussRule {
  std::vector<double> nodes;    // on [-1, 1], ascending
  std::vector<double> weights;
};

inline constexpr int max_gauss_order = 64;

namespace detail {

inline GaussRule build_gauss_rule(int n) {
  GaussRule r;
  if (n == 1) {
    r.nodes = {0.0};
    r.weights = {2.0};
    return r;
  }
  // Boost returns the non-negative zeros, ascending from 0 (or the smallest positive).
  const std::vector<double> zeros = boost::math::legendre_p_zeros<double>(n);
  std::vector<double> full;
  for (auto it = zeros.rbegin(); it != zeros.rend(); ++it)
    if (*it > 0.0) full.push_back(-*it);
  for (double z : zeros) full.push_back(z);
  r.nodes = full;
  for (double x : full) {
    const double dp = boost::math::legendre_p_prime(n, x);
    r.weights.push_back(2.0 / ((1.0 - x * x) * dp * dp));
  }
  return r;
}

}  // namespace detail

inline const GaussRule& gauss_legendre(int n) {
  static const std::vector<GaussRule> table = [] {
    std::vector<GaussRule> t(max_gauss_order + 1);
    for (int k = 1; k <= max_gauss_order; ++k) t[k] = detail::build_gauss_rule(k);
    return t;
  }();
  if (n < 1 || n > max_gauss_order) throw std::out_of_range("gauss_legendre: order out of range");
  return table[n];
}

// ∫_a^b f with an n-point Gauss–Legendre rule.
template <class F>
double integrate_gl(F&& f, double a, double b, int n) {
  const GaussRule& g = gauss_legendre(n);
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  double s = 0.0;
  for (std::size_t k = 0; k < g.nodes.size(); ++k) s += g.weights[k] * f(mid + half * g.nodes[k]);
  return half * s;
}

// Composite rule: `panels` equal panels, n points each.
template <class F>
double integrate_composite(F&& f, double a, double b, int panels, int n) {
  const double w = (b - a) / panels;
  CompensatedSum s;
  for (int p = 0; p < panels; ++p) s.add(integrate_gl(f, a + p * w, a + (p + 1) * w, n));
  return s.value();
}

// ∫_a^b f on 0 < a < b using ρ = a (b/a)^u; suits integrands ~ 1/ρ.
template <class F>
double integrate_log_mapped(F&& f, double a, double b, int n) {
  const double lr = std::log(b / a);
  return integrate_gl([&](double u) {
    const double rho = a * std::exp(lr * u);
    return f(rho) * rho * lr;
  }, 0.0, 1.0, n);
}

struct PolarGridOptions {
  double panel = 0.05;  // target panel width (absolute length)
  int order = 4;        // Gauss points per panel and direction
};

// ∫_disk f(z) dz on a polar composite Gauss grid centred on the disk.
// The callback receives (z, weight); the caller accumulates.
template <class Visit>
void visit_polar_grid(const Disk& disk, const PolarGridOptions& opt, Visit&& visit) {
  if (disk.radius <= 0.0) return;
  const GaussRule& g = gauss_legendre(opt.order);
  const int nr = std::max(1, static_cast<int>(std::ceil(disk.radius / opt.panel)));
  const double dr = disk.radius / nr;
  for (int ir = 0; ir < nr; ++ir) {
    for (std::size_t kr = 0; kr < g.nodes.size(); ++kr) {
      const double r = dr * (ir + 0.5 * (1.0 + g.nodes[kr]));
      const double wr = 0.5 * dr * g.weights[kr] * r;
      // Angular resolution follows the local circumference.
      const int nt = std::max(2, static_cast<int>(std::ceil(two_pi * (dr * (ir + 1)) / opt.panel)));
      const double dt = two_pi / nt;
      for (int it = 0; it < nt; ++it) {
        for (std::size_t kt = 0; kt < g.nodes.size(); ++kt) {
          const double t = dt * (it + 0.5 * (1.0 + g.nodes[kt]));
          const double wt = 0.5 * dt * g.weights[kt];
          visit(Vec2{disk.center.x + r * std::cos(t), disk.center.y + r * std::sin(t)}, wr * wt);
        }
      }
    }
  }
}

template <class F>
double integrate_disk(const Disk& disk, const PolarGridOptions& opt, F&& f) {
  CompensatedSum s;
  visit_polar_grid(disk, opt, [&](Vec2 z, double w) { s.add(w * f(z)); });
  return s.value();
}

// Radially symmetric integrand on a disk centred at the origin: 2π ∫_0^R g(r) r dr.
template <class G>
double integrate_radial(G&& g, double radius, int panels = 8, int n = 24) {
  return two_pi * integrate_composite([&](double r) { return g(r) * r; }, 0.0, radius, panels, n);
}

}  // namespace coulomb
