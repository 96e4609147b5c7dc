#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "coulomb/fields.hpp"
#include "coulomb/geometry.hpp"
#include "coulomb/measure.hpp"
#include "coulomb/quadrature.hpp"
#include "coulomb/test_function.hpp"

namespace coulomb {

inline constexpr double infinity = std::numeric_limits<double>::infinity();

// The state X_N = (x_1, …, x_N). Coincident points are allowed; they carry
// infinite energy.
class PointConfiguration {
 public:
  PointConfiguration() = default;
  explicit PointConfiguration(std::vector<Vec2> points) : points_(std::move(points)) {
    if (points_.size() < 2) throw std::invalid_argument("a configuration needs at least two points");
    for (const Vec2& p : points_)
      if (!is_finite(p)) throw std::invalid_argument("configuration contains a non-finite coordinate");
  }

  std::size_t size() const { return points_.size(); }
  std::span<const Vec2> points() const { return points_; }
  const Vec2& operator[](std::size_t i) const { return points_[i]; }
  auto begin() const { return points_.begin(); }
  auto end() const { return points_.end(); }

  bool has_coincident_points() const {
    std::vector<Vec2> sorted = points_;
    std::sort(sorted.begin(), sorted.end(), [](Vec2 a, Vec2 b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
    return std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end();
  }

 private:
  std::vector<Vec2> points_;
};

// −log|a − b|
inline double pair_interaction(Vec2 a, Vec2 b) {
  const double d2 = norm2(a - b);
  return d2 > 0.0 ? -0.5 * std::log(d2) : infinity;
}

// F(X_N, μ0) = Σ_{i<j} −log|xᵢ − xⱼ| − N Σᵢ p(xᵢ) + (N²/2) ∬ −log|x − y| dμ0 dμ0.
// Terms are sorted before the compensated sum, so relabelling the points
// gives a bit-identical result.
inline double log_energy(std::span<const Vec2> points, const EquilibriumMeasure& mu) {
  const std::size_t n = points.size();
  std::vector<double> pairs, potential;
  pairs.reserve(n * (n - 1) / 2);
  potential.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = pair_interaction(points[i], points[j]);
      if (v == infinity) return infinity;
      pairs.push_back(v);
    }
    potential.push_back(mu.log_potential(points[i]));
  }
  auto sorted_sum = [](std::vector<double>& v) {
    std::sort(v.begin(), v.end());
    CompensatedSum s;
    for (double x : v) s.add(x);
    return s.value();
  };
  const double nn = static_cast<double>(n);
  return sorted_sum(pairs) - nn * sorted_sum(potential) + 0.5 * nn * nn * mu.self_energy();
}

inline double log_energy(const PointConfiguration& config, const EquilibriumMeasure& mu) {
  return log_energy(config.points(), mu);
}

// ζ̄(X_N) = 2N Σ ζ(xᵢ).
inline double confinement_energy(std::span<const Vec2> points, const ConfiningPotential& zeta) {
  std::vector<double> v;
  v.reserve(points.size());
  for (const Vec2& p : points) v.push_back(zeta(p));
  std::sort(v.begin(), v.end());
  CompensatedSum s;
  for (double x : v) s.add(x);
  return 2.0 * static_cast<double>(points.size()) * s.value();
}

// log of the unnormalised Gibbs density, −β (F + ζ̄). −∞ for coincident points.
inline double gibbs_log_density(const PointConfiguration& config, const EquilibriumMeasure& mu,
                                const ConfiningPotential& zeta, double beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("beta must be positive");
  const double f = log_energy(config, mu);
  if (f == infinity) return -infinity;
  return -beta * (f + confinement_energy(config.points(), zeta));
}

inline PolarGridOptions background_grid(const Disk& support) {
  return {support.radius / 6.0, 16};
}

// ∫ f m0 over the support of f.
template <ScalarField F>
double integrate_against_density(const F& f, const EquilibriumMeasure& mu) {
  const Disk s = f.support();
  return integrate_disk(s, background_grid(s), [&](Vec2 x) { return f.value(x) * mu.density(x); });
}

// ⟨f, M_N⟩ = Σ f(xᵢ) − N ∫ f dμ0, with the background integral computed once.
template <ScalarField F>
class LinearStatistic {
 public:
  LinearStatistic(F field, const EquilibriumMeasure& mu)
      : field_(std::move(field)), background_(integrate_against_density(field_, mu)) {}

  double background() const { return background_; }
  const F& field() const { return field_; }

  double operator()(std::span<const Vec2> points) const {
    CompensatedSum s;
    for (const Vec2& p : points) s.add(field_.value(p));
    s.add(-static_cast<double>(points.size()) * background_);
    return s.value();
  }

 private:
  F field_;
  double background_;
};

template <ScalarField F>
double fluctuation(const F& field, std::span<const Vec2> points, const EquilibriumMeasure& mu) {
  return LinearStatistic<F>(field, mu)(points);
}

inline double fluctuation(const TestFunction& phi, const PointConfiguration& config, const EquilibriumMeasure& mu) {
  return fluctuation(PhiField{&phi}, config.points(), mu);
}

// Background integrals attached to a (φ, μ0) pair.
struct PhiIntegrals {
  double mass = 0.0;                   // ∫ φ m0
  double dirichlet = 0.0;              // ∫ |∇φ|²
  double laplacian_log_density = 0.0;  // ∫ Δφ log m0
};

inline PhiIntegrals phi_integrals(const TestFunction& phi, const EquilibriumMeasure& mu) {
  const Disk s = phi.support();
  const PolarGridOptions grid = background_grid(s);
  PhiIntegrals out;
  out.mass = integrate_disk(s, grid, [&](Vec2 x) { return phi.value(x) * mu.density(x); });
  out.dirichlet = integrate_disk(s, grid, [&](Vec2 x) { return norm2(phi.gradient(x)); });
  if (mu.constant_density()) {
    out.laplacian_log_density = 0.0;  // ∫ Δφ = 0 for compactly supported φ
  } else {
    out.laplacian_log_density =
        integrate_disk(s, grid, [&](Vec2 x) { return phi.laplacian(x) * std::log(mu.density(x)); });
  }
  return out;
}

}  // namespace coulomb
