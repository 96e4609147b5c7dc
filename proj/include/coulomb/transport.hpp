#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "coulomb/electric.hpp"
#include "coulomb/energy.hpp"
#include "coulomb/fields.hpp"
#include "coulomb/measure.hpp"
#include "coulomb/quadrature.hpp"
#include "coulomb/test_function.hpp"

namespace coulomb {

struct DiffeomorphismError : std::domain_error {
  DiffeomorphismError() : std::domain_error("not a diffeomorphism") {}
};

// Spectral norm of a 2×2 matrix.
inline double operator_norm(const Mat2& a) {
  const double p = a.xx * a.xx + a.xy * a.xy + a.yx * a.yx + a.yy * a.yy;
  const double det = a.xx * a.yy - a.xy * a.yx;
  const double disc = std::sqrt(std::max(0.0, p * p - 4.0 * det * det));
  return std::sqrt(0.5 * (p + disc));
}

// sup ‖Dψ‖ sampled on a polar Gauss grid over supp ψ.
template <VectorField Psi>
double transport_c1_norm(const Psi& psi) {
  const Disk s = psi.support();
  double best = 0.0;
  visit_polar_grid(s, {s.radius / 24.0, 6}, [&](Vec2 z, double) { best = std::max(best, operator_norm(psi.jacobian(z))); });
  return best;
}

// T(x) = x + t ψ(x). The gradient transport uses ψ = ∇φ/m0 and t = ε/(ωN).
class TransportMap {
 public:
  TransportMap(const EquilibriumMeasure& mu, FunctionVectorField psi, double t)
      : mu_(&mu), psi_(std::move(psi)), t_(t), c1_(transport_c1_norm(psi_)) {
    if (!(std::abs(t) * c1_ < 0.5)) throw DiffeomorphismError();
  }

  TransportMap(const TestFunction& phi, const EquilibriumMeasure& mu, double t)
      : TransportMap(mu, wrap(GradientOverDensity(phi, mu)), t) {}

  static TransportMap from_epsilon(const TestFunction& phi, const EquilibriumMeasure& mu, double epsilon, double omega,
                                   std::size_t n) {
    if (omega == 0.0 || n == 0) throw std::invalid_argument("transport needs omega != 0 and N > 0");
    return TransportMap(phi, mu, epsilon / (omega * double(n)));
  }

  double t() const { return t_; }
  double threshold() const { return c1_ > 0.0 ? 0.5 / c1_ : infinity; }
  const EquilibriumMeasure& measure() const { return *mu_; }
  const FunctionVectorField& psi() const { return psi_; }
  Disk support() const { return psi_.support(); }

  Vec2 operator()(Vec2 x) const {
    if (t_ == 0.0 || !support().contains(x)) return x;
    return x + t_ * psi_.value(x);
  }

  Mat2 jacobian(Vec2 x) const { return Mat2::identity() + t_ * psi_.jacobian(x); }

  double jacobian_det(Vec2 x) const {
    if (t_ == 0.0 || !support().contains(x)) return 1.0;
    const Mat2 d = psi_.jacobian(x);
    // det(I + tD) = 1 + t tr D + t² det D, written to keep the O(t) part exact.
    return 1.0 + t_ * (d.trace() + t_ * (d.xx * d.yy - d.xy * d.yx));
  }

  // Newton iteration for T(x) = y; T is the identity off supp ψ.
  Vec2 inverse(Vec2 y) const {
    if (t_ == 0.0 || !support().contains(y)) return y;
    Vec2 x = y;
    for (int it = 0; it < 60; ++it) {
      const Vec2 res = (*this)(x) - y;
      if (norm(res) <= 1e-16 * (1.0 + norm(y))) break;
      const Mat2 j = jacobian(x);
      const double det = j.xx * j.yy - j.xy * j.yx;
      const Vec2 step{(j.yy * res.x - j.xy * res.y) / det, (-j.yx * res.x + j.xx * res.y) / det};
      x -= step;
      if (norm(step) <= 1e-17 * (1.0 + norm(x))) break;
    }
    return x;
  }

  std::vector<Vec2> apply(std::span<const Vec2> pts) const {
    std::vector<Vec2> out(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) out[i] = (*this)(pts[i]);
    return out;
  }

  PointConfiguration apply(const PointConfiguration& config) const { return PointConfiguration(apply(config.points())); }

 private:
  template <VectorField Psi>
  static FunctionVectorField wrap(Psi psi) {
    return {[psi](Vec2 x) { return psi.value(x); }, [psi](Vec2 x) { return psi.jacobian(x); }, psi.support()};
  }

  const EquilibriumMeasure* mu_;
  FunctionVectorField psi_;
  double t_;
  double c1_;
};

struct PushforwardDensity {
  double exact = 0.0;      // m_ε(T(x)) = m0(x)/det DT(x)
  double surrogate = 0.0;  // m0 − t div(m0 ψ) at T(x); equals m0 − t Δφ for ψ = ∇φ/m0
};

inline PushforwardDensity pushforward_density_at(const TransportMap& map, Vec2 x) {
  const double det = map.jacobian_det(x);
  if (!(det > 0.0)) throw DiffeomorphismError();
  const EquilibriumMeasure& mu = map.measure();
  const Vec2 y = map(x);
  const double div = dot(mu.density_gradient(y), map.psi().value(y)) + mu.density(y) * map.psi().jacobian(y).trace();
  return {mu.density(x) / det, mu.density(y) - map.t() * div};
}

// m_ε(y) − m0(y) at an arbitrary point, through the inverse map.
inline double pushforward_excess(const TransportMap& map, Vec2 y) {
  if (map.t() == 0.0 || !map.support().contains(y)) return 0.0;
  const Vec2 x = map.inverse(y);
  return map.measure().density(x) / map.jacobian_det(x) - map.measure().density(y);
}

// ∫ m_ε over the plane: ∫ m0 plus the excess on supp ψ.
inline double pushforward_mass(const TransportMap& map) {
  const EquilibriumMeasure& mu = map.measure();
  const Disk sigma = mu.support();
  const double base = integrate_disk(sigma, {sigma.radius / 8.0, 12}, [&](Vec2 z) { return mu.density(z); });
  const Disk s = map.support();
  return base + integrate_disk(s, {s.radius / 8.0, 12}, [&](Vec2 y) { return pushforward_excess(map, y); });
}

inline double log_jacobian_sum(const TransportMap& map, std::span<const Vec2> pts) {
  CompensatedSum s;
  for (const Vec2& p : pts) {
    const double det = map.jacobian_det(p);
    if (!(det > 0.0)) throw DiffeomorphismError();
    s.add(std::log(det));
  }
  return s.value();
}

// Π det DT(xᵢ).
inline double jacobian_product(const TransportMap& map, const PointConfiguration& config) {
  if (map.t() == 0.0) return 1.0;
  return std::exp(log_jacobian_sum(map, config.points()));
}

// Least-squares slope of log y against log x, with R².
struct OrderFit {
  double order = std::numeric_limits<double>::quiet_NaN();
  double r_squared = std::numeric_limits<double>::quiet_NaN();
  bool degenerate = true;  // fewer than two nonzero residuals
};

inline OrderFit fit_order(std::span<const double> x, std::span<const double> y) {
  std::vector<double> lx, ly;
  for (std::size_t k = 0; k < x.size() && k < y.size(); ++k) {
    if (x[k] > 0.0 && std::abs(y[k]) > 0.0) {
      lx.push_back(std::log(x[k]));
      ly.push_back(std::log(std::abs(y[k])));
    }
  }
  OrderFit f;
  if (lx.size() < 2) return f;
  const double n = double(lx.size());
  double mx = 0, my = 0;
  for (std::size_t k = 0; k < lx.size(); ++k) mx += lx[k], my += ly[k];
  mx /= n, my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t k = 0; k < lx.size(); ++k) {
    sxx += (lx[k] - mx) * (lx[k] - mx);
    sxy += (lx[k] - mx) * (ly[k] - my);
    syy += (ly[k] - my) * (ly[k] - my);
  }
  f.order = sxy / sxx;
  f.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  f.degenerate = false;
  return f;
}

struct ExpansionReport {
  std::string id;
  std::vector<double> ladder;              // ε, strictly decreasing
  std::vector<double> derivatives;         // (g(ε) − g(−ε)) / 2ε
  std::vector<double> second_differences;  // g(ε) + g(−ε) − 2 g(0)
  std::vector<double> curvatures;          // second difference / ε²
  double value_at_zero = 0.0;
  double measured = 0.0;   // g'(0), Richardson over the two smallest ε
  double predicted = 0.0;  // first-order formula
  double mismatch = 0.0;
  double tolerance = 0.0;
  OrderFit fit;
  bool flat = false;  // g constant along the ladder
  bool flagged = false;
  bool pass = false;
  std::string note;
};

// ε ∈ {10^{−2.5}, …, 10^{−5}} × ωN ℓ², so t = ε/(ωN) runs over half decades
// and t |Dψ| ~ t ℓ^{−2} stays in the diffeomorphism regime.
inline std::vector<double> default_ladder(double omega, std::size_t n, double ell = 1.0) {
  std::vector<double> l;
  for (int k = 0; k < 6; ++k) l.push_back(std::pow(10.0, -2.5 - 0.5 * k) * std::abs(omega) * double(n) * ell * ell);
  return l;
}

namespace detail {

// Runs fn(k) for k < n on up to max_threads threads; results land by index.
inline void parallel_indices(std::size_t n, unsigned max_threads, const std::function<void(std::size_t)>& fn) {
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned workers = std::min<unsigned>(max_threads == 0 ? hw : max_threads, unsigned(n));
  if (workers <= 1) {
    for (std::size_t k = 0; k < n; ++k) fn(k);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      try {
        for (std::size_t k = w; k < n; k += workers) fn(k);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline void check_ladder(std::span<const double> ladder) {
  if (ladder.size() < 2) throw std::invalid_argument("ladder needs at least two values");
  for (std::size_t k = 0; k < ladder.size(); ++k) {
    if (!(ladder[k] > 0.0)) throw std::invalid_argument("ladder values must be positive");
    if (k > 0 && !(ladder[k] < ladder[k - 1])) throw std::invalid_argument("ladder must be strictly decreasing");
  }
}

// Fills the ladder part of a report from g evaluated at 0 and ±ε.
inline ExpansionReport ladder_report(std::string id, std::span<const double> ladder,
                                     const std::function<double(double)>& g, unsigned max_threads) {
  check_ladder(ladder);
  const std::size_t n = ladder.size();
  std::vector<double> vals(2 * n + 1);
  parallel_indices(2 * n + 1, max_threads, [&](std::size_t k) {
    if (k == 2 * n) vals[k] = g(0.0);
    else vals[k] = g(k < n ? ladder[k] : -ladder[k - n]);
  });
  ExpansionReport r;
  r.id = std::move(id);
  r.ladder.assign(ladder.begin(), ladder.end());
  r.value_at_zero = vals[2 * n];
  bool flat = true;
  for (std::size_t k = 0; k < n; ++k) {
    const double e = ladder[k], gp = vals[k], gm = vals[n + k];
    r.derivatives.push_back((gp - gm) / (2.0 * e));
    const double s = (gp - r.value_at_zero) + (gm - r.value_at_zero);
    r.second_differences.push_back(s);
    r.curvatures.push_back(s / (e * e));
    flat = flat && gp == r.value_at_zero && gm == r.value_at_zero;
  }
  r.flat = flat;
  // D(ε) = g'(0) + c ε² + …
  const double e1 = ladder[n - 2], e0 = ladder[n - 1];
  const double d1 = r.derivatives[n - 2], d0 = r.derivatives[n - 1];
  const double q = (e1 * e1) / (e0 * e0);
  r.measured = (q * d0 - d1) / (q - 1.0);
  r.fit = fit_order(r.ladder, r.second_differences);
  return r;
}

inline void finish(ExpansionReport& r, double band) {
  r.mismatch = std::abs(r.measured - r.predicted);
  r.tolerance += band;
  const bool order_ok =
      r.flat || r.fit.degenerate || (r.fit.order >= 1.8 && r.fit.order <= 2.2 && r.fit.r_squared >= 0.99);
  r.pass = !r.flagged && r.mismatch <= r.tolerance && order_ok;
}

// Size of the Richardson correction: the O(ε²) band of the first-order check.
inline double richardson_band(const ExpansionReport& r) { return std::abs(r.derivatives.back() - r.measured); }

}  // namespace detail

struct ExpansionOptions {
  unsigned max_threads = 1;
  AnisotropyOptions anisotropy;
};

// g(ε) = F(T_ε X_N, μ0) against g'(0) = A/(Nω) + (2π/ω)⟨φ, M_N⟩.
inline ExpansionReport verify_energy_expansion(const PointConfiguration& config, const EquilibriumMeasure& mu,
                                               const TestFunction& phi, double omega, std::span<const double> ladder,
                                               const ExpansionOptions& opt = {}) {
  if (omega == 0.0) throw std::invalid_argument("omega must be nonzero");
  const std::size_t n = config.size();
  const double f0 = log_energy(config, mu);
  if (!std::isfinite(f0)) throw std::invalid_argument("energy of the configuration is not finite");
  auto g = [&](double eps) {
    if (eps == 0.0) return f0;
    const TransportMap map = TransportMap::from_epsilon(phi, mu, eps, omega, n);
    return log_energy(map.apply(config.points()), mu);
  };
  ExpansionReport r = detail::ladder_report("termAA", ladder, g, opt.max_threads);
  const double scale = 1.0 / (double(n) * omega);
  if (phi.is_zero()) {
    r.predicted = 0.0;
    r.tolerance = 0.0;
  } else {
    const GradientOverDensity psi(phi, mu);
    const AnisotropyResult a = anisotropy(config, mu, psi, opt.anisotropy);
    r.flagged = !a.converged;
    if (r.flagged) r.note = "anisotropy ladder did not converge";
    r.predicted = scale * a.A + (two_pi / omega) * fluctuation(phi, config, mu);
    r.tolerance = std::max(2.0 * std::abs(scale) * a.error_estimate, 1e-3 * std::abs(r.measured));
  }
  detail::finish(r, 0.0);
  return r;
}

// g(ε) = ⟨φ, T_ε X_N − Nμ0⟩ against (1/ω)[∫|∇φ|² + (1/N)⟨|∇φ|²/m0, M_N⟩].
inline ExpansionReport verify_fluctuation_expansion(const PointConfiguration& config, const EquilibriumMeasure& mu,
                                                    const TestFunction& phi, double omega,
                                                    std::span<const double> ladder, const ExpansionOptions& opt = {}) {
  if (omega == 0.0) throw std::invalid_argument("omega must be nonzero");
  const std::size_t n = config.size();
  const LinearStatistic<PhiField> stat(PhiField{&phi}, mu);
  auto g = [&](double eps) {
    if (eps == 0.0) return stat(config.points());
    const TransportMap map = TransportMap::from_epsilon(phi, mu, eps, omega, n);
    return stat(map.apply(config.points()));
  };
  ExpansionReport r = detail::ladder_report("termBB", ladder, g, opt.max_threads);
  const PhiIntegrals ints = phi_integrals(phi, mu);
  const double sum = fluctuation(GradientEnergyDensityField{&phi, &mu}, config.points(), mu);
  r.predicted = (ints.dirichlet + sum / double(n)) / omega;
  r.tolerance = 1e-6;
  detail::finish(r, detail::richardson_band(r));
  return r;
}

// g(ε) = Σ log det DT_ε(xᵢ) against (1/ω)∫Δφ log m0 + (1/(ωN))⟨div ψ, M_N⟩.
inline ExpansionReport verify_jacobian_expansion(const PointConfiguration& config, const EquilibriumMeasure& mu,
                                                 const TestFunction& phi, double omega, std::span<const double> ladder,
                                                 const ExpansionOptions& opt = {}) {
  if (omega == 0.0) throw std::invalid_argument("omega must be nonzero");
  const std::size_t n = config.size();
  auto g = [&](double eps) {
    if (eps == 0.0) return 0.0;
    return log_jacobian_sum(TransportMap::from_epsilon(phi, mu, eps, omega, n), config.points());
  };
  ExpansionReport r = detail::ladder_report("termCC", ladder, g, opt.max_threads);
  const PhiIntegrals ints = phi_integrals(phi, mu);
  const GradientOverDensity psi(phi, mu);
  const double div_fluct = fluctuation(TransportDivergenceField{psi}, config.points(), mu);
  r.predicted = ints.laplacian_log_density / omega + div_fluct / (omega * double(n));
  r.tolerance = 1e-6;
  detail::finish(r, detail::richardson_band(r));
  return r;
}

struct KernelIdentityOptions {
  std::optional<double> h;  // radial step; default support radius / 64
};

struct KernelIdentityResult {
  double max_relative_error = 0.0;
  std::vector<double> integrals;  // ∫ −log|x − y| Δf(y) dy per probe
  std::vector<double> targets;    // −2π f(x) per probe
};

// ∫ −log|x − y| Δf(y) dy in polar coordinates about x. The disk |y − x| ≤ h
// is done analytically with Δf frozen at x: ∫_{|u|≤h} −log|u| du = πh²(½ − log h).
// Outside it, composite midpoint in the radius and trapezoid in angle, O(h²).
template <class F>
double log_kernel_laplacian(const F& f, Vec2 x, double h) {
  const Disk s = f.support();
  const double reach = norm(x - s.center) + s.radius;
  const int n_theta = std::max(64, int(std::ceil(two_pi * reach / h)));
  CompensatedSum total;
  if (s.contains(x)) total.add(f.laplacian(x) * pi * h * h * (0.5 - std::log(h)));
  for (int k = 0; k < n_theta; ++k) {
    const double th = two_pi * (k + 0.5) / n_theta;
    const Vec2 dir{std::cos(th), std::sin(th)};
    const RayInterval iv = ray_disk_intersection(x, dir, s);
    if (iv.empty()) continue;
    const double lo = std::max(h, iv.lo), hi = iv.hi;
    if (hi <= lo) continue;
    const int m = std::max(1, int(std::ceil((hi - lo) / h)));
    const double dr = (hi - lo) / m;
    CompensatedSum ray;
    for (int j = 0; j < m; ++j) {
      const double r = lo + (j + 0.5) * dr;
      ray.add(-std::log(r) * f.laplacian(x + r * dir) * r);
    }
    total.add(ray.value() * dr * two_pi / n_theta);
  }
  return total.value();
}

template <class F>
KernelIdentityResult verify_kernel_identity(const F& f, std::span<const Vec2> probes,
                                            const KernelIdentityOptions& opt = {}) {
  const double h = opt.h.value_or(f.support().radius / 64.0);
  if (!(h > 0.0)) throw std::invalid_argument("kernel identity step must be positive");
  KernelIdentityResult out;
  for (const Vec2& x : probes) {
    const double lhs = log_kernel_laplacian(f, x, h);
    const double rhs = -two_pi * f.value(x);
    out.integrals.push_back(lhs);
    out.targets.push_back(rhs);
    out.max_relative_error = std::max(out.max_relative_error, std::abs(lhs - rhs) / (1.0 + std::abs(rhs)));
  }
  return out;
}

// ½ N² ∬ −log|x − y| (m_ε − m0)(x) (m_ε − m0)(y) dx dy. The excess density is
// evaluated exactly through the inverse map on a polar Gauss grid over supp ψ;
// each node carries a self term from the disk of equal area.
inline double term_two_energy(const TransportMap& map, std::size_t n) {
  const Disk s = map.support();
  std::vector<Vec2> nodes;
  std::vector<double> w, nu;
  visit_polar_grid(s, {s.radius / 8.0, 4}, [&](Vec2 z, double wt) {
    nodes.push_back(z);
    w.push_back(wt);
  });
  nu.resize(nodes.size());
  for (std::size_t k = 0; k < nodes.size(); ++k) nu[k] = pushforward_excess(map, nodes[k]);
  CompensatedSum e;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nu[i] == 0.0) continue;
    const double a = std::sqrt(w[i] / pi);
    double u = nu[i] * w[i] * (0.5 - std::log(a));
    for (std::size_t j = 0; j < nodes.size(); ++j) {
      if (j == i || nu[j] == 0.0) continue;
      u -= w[j] * nu[j] * std::log(norm(nodes[i] - nodes[j]));
    }
    e.add(w[i] * nu[i] * u);
  }
  return 0.5 * double(n) * double(n) * e.value();
}

struct TermTwoReport {
  std::vector<double> ladder;
  std::vector<double> energies;
  OrderFit fit;
  double leading = 0.0;  // π ε²/ω² ∫|∇φ|² at the smallest ε
  bool pass = false;
};

inline TermTwoReport verify_term_two(const TestFunction& phi, const EquilibriumMeasure& mu, double omega,
                                     std::size_t n, std::span<const double> ladder, unsigned max_threads = 1) {
  detail::check_ladder(ladder);
  TermTwoReport r;
  r.ladder.assign(ladder.begin(), ladder.end());
  r.energies.resize(ladder.size());
  detail::parallel_indices(ladder.size(), max_threads, [&](std::size_t k) {
    r.energies[k] = term_two_energy(TransportMap::from_epsilon(phi, mu, ladder[k], omega, n), n);
  });
  r.fit = fit_order(r.ladder, r.energies);
  const double e = ladder.back();
  r.leading = pi * e * e / (omega * omega) * phi_integrals(phi, mu).dirichlet;
  r.pass = !r.fit.degenerate && r.fit.order >= 1.9;
  return r;
}

// |Ani(T_ε X_N) − Ani(X_N)| along ±ε, compared with the shape
// (1/ω) ℓ^{−3} N^{−1/2} (Ele + Points + N ℓ²) on supp φ. The constant in front
// is not known; slope/shape is reported, and checked against a frozen value
// calibrated as the sup over seeded N = 8 configurations on the uniform disk
// (observed sup ≈ 17).
inline constexpr double anisotropy_transport_constant = 40.0;

struct AnisotropyTransportReport {
  std::vector<double> ladder;
  std::vector<double> plus;   // Ani(T_ε X) − Ani(X)
  std::vector<double> minus;  // Ani(T_{−ε} X) − Ani(X)
  double base = 0.0;
  double base_error = 0.0;
  double slope = 0.0;  // least-squares |d|/ε through the origin
  double band = 0.0;   // even part plus quadrature error
  double ele = 0.0;
  std::size_t points = 0;
  double shape = 0.0;
  double ratio = 0.0;  // slope / shape
  bool symmetric = false;
  bool flagged = false;
  bool pass = false;
};

inline AnisotropyTransportReport verify_anisotropy_transport(const PointConfiguration& config,
                                                             const EquilibriumMeasure& mu, const TestFunction& phi,
                                                             double omega, std::span<const double> ladder,
                                                             const ExpansionOptions& opt = {}) {
  if (omega == 0.0) throw std::invalid_argument("omega must be nonzero");
  detail::check_ladder(ladder);
  const std::size_t n = config.size(), m = ladder.size();
  const GradientOverDensity psi(phi, mu);
  AnisotropyTransportReport r;
  r.ladder.assign(ladder.begin(), ladder.end());
  std::vector<AnisotropyResult> res(2 * m + 1);
  detail::parallel_indices(2 * m + 1, opt.max_threads, [&](std::size_t k) {
    if (k == 2 * m) {
      res[k] = anisotropy(config, mu, psi, opt.anisotropy);
      return;
    }
    const double eps = k < m ? ladder[k] : -ladder[k - m];
    const TransportMap map = TransportMap::from_epsilon(phi, mu, eps, omega, n);
    res[k] = anisotropy(map.apply(config), mu, psi, opt.anisotropy);
  });
  r.base = res[2 * m].ani;
  double err = res[2 * m].error_estimate;
  r.flagged = !res[2 * m].converged;
  double num = 0.0, den = 0.0, even = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    r.plus.push_back(res[k].ani - r.base);
    r.minus.push_back(res[m + k].ani - r.base);
    r.flagged = r.flagged || !res[k].converged || !res[m + k].converged;
    err = std::max({err, res[k].error_estimate, res[m + k].error_estimate});
    const double e = ladder[k];
    num += e * (r.plus[k] - r.minus[k]);
    den += 2.0 * e * e;
    even = std::max(even, std::abs(r.plus[k] + r.minus[k]) / 2.0);
  }
  r.base_error = res[2 * m].error_estimate;
  r.slope = std::abs(num / den);
  r.band = even + 2.0 * err;
  r.symmetric = true;
  for (std::size_t k = 0; k < m; ++k)
    r.symmetric = r.symmetric && std::abs(std::abs(r.plus[k]) - std::abs(r.minus[k])) <= 2.0 * r.slope * ladder[k] + r.band;
  const Disk window = phi.support();
  const double ell = phi.scale();
  r.ele = electric_energy(config, mu, window).value;
  r.points = points_count(config, window);
  r.shape = (1.0 / std::abs(omega)) * std::pow(ell, -3.0) / std::sqrt(double(n)) *
            (r.ele + double(r.points) + double(n) * ell * ell);
  r.ratio = r.shape > 0.0 ? r.slope / r.shape : 0.0;
  r.pass = !r.flagged && r.symmetric && std::isfinite(r.ratio) && r.ratio <= anisotropy_transport_constant;
  return r;
}

}  // namespace coulomb
