#pragma once

#include <concepts>
#include <functional>

#include "coulomb/geometry.hpp"
#include "coulomb/measure.hpp"
#include "coulomb/test_function.hpp"

namespace coulomb {

// A scalar field with compact support inside a known disk.
template <class F>
concept ScalarField = requires(const F& f, Vec2 x) {
  { f.value(x) } -> std::convertible_to<double>;
  { f.support() } -> std::convertible_to<Disk>;
};

// A C¹ vector field with compact support inside a known disk.
template <class F>
concept VectorField = requires(const F& f, Vec2 x) {
  { f.value(x) } -> std::convertible_to<Vec2>;
  { f.jacobian(x) } -> std::convertible_to<Mat2>;
  { f.support() } -> std::convertible_to<Disk>;
};

struct FunctionField {
  std::function<double(Vec2)> fn;
  Disk supp;
  double value(Vec2 x) const { return fn(x); }
  Disk support() const { return supp; }
};

struct FunctionVectorField {
  std::function<Vec2(Vec2)> fn;
  std::function<Mat2(Vec2)> jac;
  Disk supp;
  Vec2 value(Vec2 x) const { return fn(x); }
  Mat2 jacobian(Vec2 x) const { return jac(x); }
  Disk support() const { return supp; }
};

// ψ = ∇φ / m0, the displacement field of the gradient transport.
class GradientOverDensity {
 public:
  GradientOverDensity(const TestFunction& phi, const EquilibriumMeasure& mu) : phi_(&phi), mu_(&mu) {}

  Vec2 value(Vec2 x) const {
    const Vec2 g = phi_->gradient(x);
    if (g == Vec2{}) return {};
    return g / mu_->density(x);
  }

  // Dψ = Hφ/m0 − ∇φ ⊗ ∇m0 / m0².
  Mat2 jacobian(Vec2 x) const {
    const Vec2 g = phi_->gradient(x);
    if (g == Vec2{}) return {};
    const double m = mu_->density(x);
    return (1.0 / m) * phi_->hessian(x) - (1.0 / (m * m)) * outer(g, mu_->density_gradient(x));
  }

  double divergence(Vec2 x) const { return jacobian(x).trace(); }
  Disk support() const { return phi_->support(); }

 private:
  const TestFunction* phi_;
  const EquilibriumMeasure* mu_;
};

// Rotated gradient (−∂ᵧφ, ∂ₓφ): divergence-free and compactly supported.
class RotatedGradient {
 public:
  explicit RotatedGradient(const TestFunction& phi) : phi_(&phi) {}
  Vec2 value(Vec2 x) const {
    const Vec2 g = phi_->gradient(x);
    return {-g.y, g.x};
  }
  Mat2 jacobian(Vec2 x) const {
    const Mat2 h = phi_->hessian(x);
    return {-h.yx, -h.yy, h.xx, h.xy};
  }
  Disk support() const { return phi_->support(); }

 private:
  const TestFunction* phi_;
};

// Scalar-field views of the test function and its derived quantities.
struct PhiField {
  const TestFunction* phi;
  double value(Vec2 x) const { return phi->value(x); }
  Disk support() const { return phi->support(); }
};

// |∇φ|² / m0
struct GradientEnergyDensityField {
  const TestFunction* phi;
  const EquilibriumMeasure* mu;
  double value(Vec2 x) const {
    const Vec2 g = phi->gradient(x);
    return g == Vec2{} ? 0.0 : norm2(g) / mu->density(x);
  }
  Disk support() const { return phi->support(); }
};

// div(∇φ / m0)
struct TransportDivergenceField {
  GradientOverDensity psi;
  double value(Vec2 x) const { return psi.divergence(x); }
  Disk support() const { return psi.support(); }
};

}  // namespace coulomb
