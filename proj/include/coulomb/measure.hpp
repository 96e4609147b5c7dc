#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "coulomb/geometry.hpp"
#include "coulomb/quadrature.hpp"

namespace coulomb {

// Radially symmetric equilibrium measure on the unit disk with density
//   m0(x) = c (a − b |x|²)   for |x| ≤ 1,   0 outside.
//
// The uniform preset (a = 1, b = 0) uses closed forms throughout. Any other
// profile gets its logarithmic potential from radial quadrature: for a radial
// density, p(r) = −log(r) M(r) − ∫_r^1 log(s) dM(s), with M the enclosed
// mass. The potential is tabulated once and evaluated by cubic Hermite
// interpolation using the exact slope p'(r) = −M(r)/r.
class EquilibriumMeasure {
 public:
  static EquilibriumMeasure uniform_disk() { return EquilibriumMeasure("uniform_disk", 1.0, 0.0, true); }
  static EquilibriumMeasure variable_disk() { return EquilibriumMeasure("variable_disk", 2.0, 1.0, false); }

  static EquilibriumMeasure from_name(std::string_view name) {
    if (name == "uniform_disk" || name == "A") return uniform_disk();
    if (name == "variable_disk" || name == "B") return variable_disk();
    throw std::invalid_argument("unknown measure preset: " + std::string(name));
  }

  const std::string& name() const { return name_; }
  const Disk& support() const { return support_; }
  bool closed_form() const { return closed_form_; }
  bool constant_density() const { return b_ == 0.0; }

  // Minimum of the density on the support.
  double c_min() const { return c_ * (a_ - b_); }

  double density(Vec2 x) const {
    const double r2 = norm2(x);
    return r2 <= 1.0 ? c_ * (a_ - b_ * r2) : 0.0;
  }
  // Derivatives of the polynomial extension (valid on the closed support).
  Vec2 density_gradient(Vec2 x) const { return (-2.0 * c_ * b_) * x; }
  Mat2 density_hessian(Vec2) const { return (-2.0 * c_ * b_) * Mat2::identity(); }
  // k-th radial derivative of the profile m(r), k ≤ 3.
  double density_radial_derivative(double r, int k) const {
    switch (k) {
      case 0: return c_ * (a_ - b_ * r * r);
      case 1: return -2.0 * c_ * b_ * r;
      case 2: return -2.0 * c_ * b_;
      case 3: return 0.0;
      default: throw std::out_of_range("density_radial_derivative: k > 3");
    }
  }

  // Mass of μ0 inside the centred disk of radius r.
  double enclosed_mass(double r) const {
    if (r >= 1.0) return 1.0;
    const double r2 = r * r;
    return two_pi * c_ * (a_ * r2 / 2.0 - b_ * r2 * r2 / 4.0);
  }

  // p(z) = ∫ −log|z − y| dμ0(y).
  double log_potential(Vec2 z) const {
    const double r = norm(z);
    if (r >= 1.0) return -std::log(r);
    if (closed_form_) return 0.5 * (1.0 - r * r);
    return interpolate_potential(r);
  }

  // ∇p(z) = −M(|z|) z / |z|² (Gauss's law for radial measures).
  Vec2 log_potential_gradient(Vec2 z) const {
    const double r2 = norm2(z);
    if (r2 >= 1.0) return (-1.0 / r2) * z;
    if (closed_form_) return -z;
    if (r2 == 0.0) return {};
    // M(r)/r² is a polynomial in r² for this family.
    return (-two_pi * c_ * (a_ / 2.0 - b_ * r2 / 4.0)) * z;
  }

  // ∬ −log|x − y| dμ0 dμ0.
  double self_energy() const { return self_energy_; }

  // Radial density of the profile (used by quadrature oracles).
  double radial_density(double r) const { return r <= 1.0 ? c_ * (a_ - b_ * r * r) : 0.0; }

 private:
  EquilibriumMeasure(std::string name, double a, double b, bool closed_form)
      : name_(std::move(name)), a_(a), b_(b), closed_form_(closed_form) {
    // Normalise: 2π c (a/2 − b/4) = 1.
    c_ = 1.0 / (two_pi * (a_ / 2.0 - b_ / 4.0));
    if (closed_form_) {
      self_energy_ = 0.25;
    } else {
      build_potential_table();
      self_energy_ = integrate_radial(
          [this](double r) { return log_potential(Vec2{r, 0.0}) * radial_density(r); }, 1.0, 64, 16);
    }
  }

  void build_potential_table() {
    const int n = table_size;
    table_r_.resize(n + 1);
    table_p_.resize(n + 1);
    table_dp_.resize(n + 1);
    const double h = 1.0 / n;
    // J(r) = ∫_r^1 log(s) m(s) 2π s ds, accumulated inward from r = 1.
    auto integrand = [this](double s) { return s > 0.0 ? std::log(s) * radial_density(s) * two_pi * s : 0.0; };
    double outer = 0.0;
    for (int k = n; k >= 0; --k) {
      const double r = k * h;
      if (k < n) outer += integrate_gl(integrand, r, r + h, 12);
      const double mass = enclosed_mass(r);
      table_r_[k] = r;
      table_p_[k] = (r > 0.0 ? -std::log(r) * mass : 0.0) - outer;
      table_dp_[k] = r > 0.0 ? -mass / r : 0.0;
    }
  }

  double interpolate_potential(double r) const {
    const double h = 1.0 / table_size;
    int k = static_cast<int>(r / h);
    if (k >= table_size) k = table_size - 1;
    const double t = (r - k * h) / h;
    const double t2 = t * t, t3 = t2 * t;
    const double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + t;
    const double h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
    return h00 * table_p_[k] + h10 * h * table_dp_[k] + h01 * table_p_[k + 1] + h11 * h * table_dp_[k + 1];
  }

  static constexpr int table_size = 4096;

  std::string name_;
  double a_ = 1.0, b_ = 0.0, c_ = 1.0 / pi;
  bool closed_form_ = true;
  Disk support_{{0.0, 0.0}, 1.0};
  double self_energy_ = 0.25;
  std::vector<double> table_r_, table_p_, table_dp_;
};

// ζ(x) = 3 log(1 + d) + d², d = dist(x, Σ). Vanishes on Σ and satisfies
// ζ(x) ≥ 3 log|x| for every |x| > 1, so the growth constant is 3 > 2.
class ConfiningPotential {
 public:
  explicit ConfiningPotential(Disk support = {{0.0, 0.0}, 1.0}) : support_(support) {}

  double operator()(Vec2 x) const {
    const double d = support_.distance(x);
    return d > 0.0 ? 3.0 * std::log1p(d) + d * d : 0.0;
  }

  Vec2 gradient(Vec2 x) const {
    const double d = support_.distance(x);
    if (d <= 0.0) return {};
    const Vec2 radial = (x - support_.center) / norm(x - support_.center);
    return (3.0 / (1.0 + d) + 2.0 * d) * radial;
  }

  double growth_constant() const { return 3.0; }
  // ζ(x)/log|x| ≥ growth_constant() for |x| beyond this radius (centred support).
  double certificate_radius() const { return support_.radius; }

 private:
  Disk support_;
};

}  // namespace coulomb
