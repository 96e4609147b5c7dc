#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "coulomb/diagnostics.hpp"
#include "coulomb/electric.hpp"
#include "coulomb/energy.hpp"
#include "coulomb/fields.hpp"
#include "coulomb/measure.hpp"
#include "coulomb/quadrature.hpp"
#include "coulomb/sampler.hpp"
#include "coulomb/test_function.hpp"
#include "coulomb/transport.hpp"

namespace coulomb {

using Complex = std::complex<double>;

enum class Regime { macroscopic, mesoscopic };

inline const char* to_string(Regime r) { return r == Regime::macroscopic ? "macroscopic" : "mesoscopic"; }

struct GaussianLimit {
  double mean = 0.0;      // b_Z
  double variance = 0.0;  // σ_Z²
  double beta = 2.0;
  Regime regime = Regime::macroscopic;
  std::string measure;
  double dirichlet = 0.0;              // ∫ |∇φ|²
  double laplacian_log_density = 0.0;  // ∫ Δφ log m0
};

// σ_Z² = (1/2πβ) ∫|∇φ|², b_Z = (1/2π)(1/β − 1/4) ∫ Δφ log m0 (zero when mesoscopic).
inline GaussianLimit theoretical_limit(const TestFunction& phi, const EquilibriumMeasure& mu, double beta,
                                       Regime regime) {
  if (!(beta > 0.0)) throw std::invalid_argument("beta must be positive");
  const PhiIntegrals I = phi_integrals(phi, mu);
  GaussianLimit g;
  g.beta = beta;
  g.regime = regime;
  g.measure = mu.name();
  g.dirichlet = I.dirichlet;
  g.laplacian_log_density = I.laplacian_log_density;
  g.variance = I.dirichlet / (two_pi * beta);
  g.mean = regime == Regime::mesoscopic ? 0.0 : (1.0 / two_pi) * (1.0 / beta - 0.25) * I.laplacian_log_density;
  return g;
}

inline GaussianLimit theoretical_limit(const TestFunction& phi, const EquilibriumMeasure& mu, double beta) {
  return theoretical_limit(phi, mu, beta, phi.spec().mesoscopic ? Regime::mesoscopic : Regime::macroscopic);
}

// E e^{iωZ} for Z ~ N(b, σ²).
inline Complex gaussian_charfn(const GaussianLimit& g, double omega) {
  return std::exp(Complex(-0.5 * omega * omega * g.variance, omega * g.mean));
}

// P[Z ∈ (a − ε, a + ε)].
inline double gaussian_window_probability(const GaussianLimit& g, double a, double eps) {
  if (g.variance <= 0.0) return std::abs(a - g.mean) < eps ? 1.0 : 0.0;
  const double s = std::sqrt(2.0 * g.variance);
  const double lo = (a - eps - g.mean) / s, hi = (a + eps - g.mean) / s;
  // erfc differences keep relative accuracy in the tails
  if (lo > 0.0) return 0.5 * (std::erfc(lo) - std::erfc(hi));
  if (hi < 0.0) return 0.5 * (std::erfc(-hi) - std::erfc(-lo));
  return 0.5 * (std::erf(hi) - std::erf(lo));
}

// ---------------------------------------------------------------- sample moments

struct MomentSummary {
  std::size_t samples = 0;
  double mean = 0.0;
  double mean_stderr = 0.0;
  double variance = 0.0;
  double variance_stderr = 0.0;
  double ess = 0.0;           // of X
  double ess_squares = 0.0;   // of (X − mean)²
};

// Per-chain series; ESS is summed over chains, separately for X and (X − m)².
inline MomentSummary moment_summary(const std::vector<std::vector<double>>& chains) {
  MomentSummary out;
  MomentAccumulator acc;
  for (const auto& c : chains)
    for (double x : c) acc.add(x);
  if (acc.count < 2) throw std::invalid_argument("moment summary needs samples");
  out.samples = acc.count;
  out.mean = acc.mean();
  CompensatedSum m2, m4;
  for (const auto& c : chains) {
    if (c.size() < 10) continue;
    std::vector<double> sq(c.size());
    for (std::size_t t = 0; t < c.size(); ++t) {
      const double d = c[t] - out.mean;
      sq[t] = d * d;
    }
    out.ess += effective_sample_size(c);
    out.ess_squares += effective_sample_size(sq);
  }
  for (const auto& c : chains)
    for (double x : c) {
      const double d2 = (x - out.mean) * (x - out.mean);
      m2.add(d2);
      m4.add(d2 * d2);
    }
  const double n = double(acc.count);
  out.variance = m2.value() / n;
  const double kurt = m4.value() / n - out.variance * out.variance;
  const double ess = std::max(out.ess, 1.0), ess2 = std::max(out.ess_squares, 1.0);
  out.mean_stderr = std::sqrt(out.variance / ess);
  out.variance_stderr = std::sqrt(std::max(kurt, 0.0) / ess2);
  return out;
}

// ---------------------------------------------------------------- characteristic function

struct CharFnEstimate {
  std::vector<double> omega;
  std::vector<Complex> value;
  std::vector<double> stderr_;
  double ess = 0.0;
  std::size_t samples = 0;
};

inline constexpr double min_effective_samples = 100.0;

// F̂(ω) = mean of e^{iωX}; stderr² = (1 − |F̂|²)/ESS, the variance of the summand.
inline CharFnEstimate empirical_charfn(std::span<const double> samples, std::span<const double> omega, double ess) {
  if (samples.empty()) throw std::invalid_argument("empirical characteristic function of an empty series");
  ess = std::clamp(ess, 1.0, double(samples.size()));
  if (ess < min_effective_samples) throw std::invalid_argument("fewer than 100 effective samples");
  CharFnEstimate out;
  out.ess = ess;
  out.samples = samples.size();
  out.omega.assign(omega.begin(), omega.end());
  const double n = double(samples.size());
  for (double w : omega) {
    CompensatedSum re, im;
    for (double x : samples) {
      const double a = w * x;
      re.add(std::cos(a));
      im.add(std::sin(a));
    }
    const Complex f(re.value() / n, im.value() / n);
    out.value.push_back(f);
    out.stderr_.push_back(std::sqrt(std::max(0.0, 1.0 - std::norm(f)) / ess));
  }
  return out;
}

inline CharFnEstimate empirical_charfn(std::span<const double> samples, std::span<const double> omega) {
  if (samples.empty()) throw std::invalid_argument("empirical characteristic function of an empty series");
  const double ess = samples.size() >= 10 ? effective_sample_size(samples) : double(samples.size());
  return empirical_charfn(samples, omega, ess);
}

inline std::vector<double> uniform_grid(double lo, double hi, std::size_t points) {
  if (points < 2) return {lo};
  std::vector<double> g(points);
  for (std::size_t k = 0; k < points; ++k) g[k] = lo + (hi - lo) * double(k) / double(points - 1);
  return g;
}

inline constexpr double default_omega_max = 20.0;

// ---------------------------------------------------------------- decay

enum class DecayStatus { noise_dominated, faster_than_bound, matches_bound, slower_than_bound };

inline const char* to_string(DecayStatus s) {
  switch (s) {
    case DecayStatus::noise_dominated: return "noise-dominated";
    case DecayStatus::faster_than_bound: return "faster than bound";
    case DecayStatus::matches_bound: return "matches bound";
    case DecayStatus::slower_than_bound: return "slower than bound";
  }
  return "";
}

struct DecayFit {
  DecayStatus status = DecayStatus::noise_dominated;
  double slope = std::numeric_limits<double>::quiet_NaN();
  double r_squared = std::numeric_limits<double>::quiet_NaN();
  double window_lo = 0.0, window_hi = 0.0;
  std::size_t window_points = 0;
  // Tail beyond the window: raw mean |F̂|, and sqrt(max(0, mean(|F̂|² − stderr²))),
  // which removes the Monte Carlo bias of |F̂|².
  double floor_raw = 0.0;
  double floor = 0.0;
  double floor_stderr = 0.0;
  std::size_t floor_points = 0;
  double bound_term = 0.0;  // ℓ^{−2}/N
  double floor_over_bound = 0.0;
};

struct DecayOptions {
  double omega_min = 2.0;
  double signal_factor = 3.0;
  double slope_band = 0.1;
};

// Log-log fit of |F̂| on the contiguous run from ω_min where |F̂| > 3·stderr.
inline DecayFit decay_probe(const CharFnEstimate& est, double ell, std::size_t n, const DecayOptions& opt = {}) {
  DecayFit out;
  out.bound_term = 1.0 / (ell * ell * double(n));
  std::vector<double> lx, ly;
  std::size_t k = 0;
  while (k < est.omega.size() && est.omega[k] < opt.omega_min) ++k;
  for (; k < est.omega.size(); ++k) {
    const double a = std::abs(est.value[k]);
    if (!(a > opt.signal_factor * est.stderr_[k]) || a <= 0.0) break;
    if (lx.empty()) out.window_lo = est.omega[k];
    out.window_hi = est.omega[k];
    lx.push_back(est.omega[k]);
    ly.push_back(a);
  }
  out.window_points = lx.size();
  CompensatedSum raw, debiased, sq;
  std::vector<double> excess;
  for (; k < est.omega.size(); ++k) {
    const double a2 = std::norm(est.value[k]);
    const double s2 = est.stderr_[k] * est.stderr_[k];
    raw.add(std::sqrt(a2));
    excess.push_back(a2 - s2);
    debiased.add(a2 - s2);
  }
  out.floor_points = excess.size();
  if (!excess.empty()) {
    const double m = double(excess.size());
    out.floor_raw = raw.value() / m;
    const double mean_excess = debiased.value() / m;
    out.floor = std::sqrt(std::max(0.0, mean_excess));
    // Noise in the mean excess, propagated through the square root (floored at one tail variance).
    double var = 0.0;
    for (double e : excess) var += (e - mean_excess) * (e - mean_excess);
    const double se_excess = std::sqrt(var / std::max(1.0, m - 1.0) / m);
    out.floor_stderr = out.floor > 0.0 ? se_excess / (2.0 * out.floor) : std::sqrt(se_excess);
    out.floor_over_bound = out.floor / out.bound_term;
  }
  if (lx.size() < 3) return out;
  const OrderFit fit = fit_order(lx, ly);
  out.slope = fit.order;
  out.r_squared = fit.r_squared;
  if (out.slope < -2.0 - opt.slope_band)
    out.status = DecayStatus::faster_than_bound;
  else if (out.slope <= -2.0 + opt.slope_band)
    out.status = DecayStatus::matches_bound;
  else
    out.status = DecayStatus::slower_than_bound;
  return out;
}

// ---------------------------------------------------------------- local CLT

struct LocalCltRow {
  double eps = 0.0;
  double center = 0.0;
  double p_emp = 0.0;
  double p_gauss = 0.0;
  double ratio = std::numeric_limits<double>::quiet_NaN();
  double stderr_ = 0.0;  // of p_emp
  double ci_lo = std::numeric_limits<double>::quiet_NaN();
  double ci_hi = std::numeric_limits<double>::quiet_NaN();
  std::size_t hits = 0;
  double expected_hits = 0.0;
  bool insufficient = false;  // fewer than 50 hits
  bool in_bracket = true;     // ε/(ℓ^{−2} log N/N) ≥ 5 and 1/ε ≥ 5
};

inline constexpr std::size_t min_window_hits = 50;

// ε_N = K (ℓ^{−2} log N / N)^{1/2}.
inline double local_clt_eps(std::size_t n, double ell, double k) {
  return k * std::sqrt(std::log(double(n)) / (ell * ell * double(n)));
}

inline std::vector<double> local_clt_eps_ladder(std::size_t n, double ell, std::span<const double> ks) {
  std::vector<double> out;
  for (double k : ks) out.push_back(local_clt_eps(n, ell, k));
  return out;
}

inline std::vector<double> local_clt_eps_ladder(std::size_t n, double ell) {
  const double ks[] = {1.0, 2.0, 4.0};
  return local_clt_eps_ladder(n, ell, ks);
}

inline bool eps_in_bracket(double eps, std::size_t n, double ell, double margin = 5.0) {
  const double lower = std::log(double(n)) / (ell * ell * double(n));
  return eps / lower >= margin && 1.0 / eps >= margin;
}

// δ_N = (ℓ^{−2}/N)^{3/4} ε^{1/4}.
inline double regularization_delta(std::size_t n, double ell, double eps) {
  return std::pow(1.0 / (ell * ell * double(n)), 0.75) * std::pow(eps, 0.25);
}

// Binomial stderr on ESS draws; the CI is ±3 stderr mapped through the ratio.
// n and ell only drive the bracket flag.
inline std::vector<LocalCltRow> local_clt_probe(std::span<const double> samples, double ess, const GaussianLimit& g,
                                                double a, std::span<const double> eps, std::size_t n = 0,
                                                double ell = 1.0) {
  if (samples.empty()) throw std::invalid_argument("local CLT probe of an empty series");
  ess = std::clamp(ess, 1.0, double(samples.size()));
  std::vector<LocalCltRow> rows;
  for (double e : eps) {
    if (!(e > 0.0)) throw std::invalid_argument("window half-width must be positive");
    LocalCltRow r;
    r.eps = e;
    r.center = a;
    for (double x : samples) r.hits += std::abs(x - a) < e ? 1 : 0;
    r.p_emp = double(r.hits) / double(samples.size());
    r.p_gauss = gaussian_window_probability(g, a, e);
    r.expected_hits = r.p_gauss * double(samples.size());
    r.stderr_ = std::sqrt(r.p_emp * (1.0 - r.p_emp) / ess);
    r.insufficient = r.hits < min_window_hits;
    r.in_bracket = n > 1 ? eps_in_bracket(e, n, ell) : true;
    if (r.p_gauss > 0.0) {
      r.ratio = r.p_emp / r.p_gauss;
      r.ci_lo = (r.p_emp - 3.0 * r.stderr_) / r.p_gauss;
      r.ci_hi = (r.p_emp + 3.0 * r.stderr_) / r.p_gauss;
    }
    rows.push_back(r);
  }
  return rows;
}

// ---------------------------------------------------------------- regularization

// R(u) = c exp(−1/(1 − u²)) on (−1, 1), of mass 1.
class Mollifier {
 public:
  static double shape(double u) {
    const double s = 1.0 - u * u;
    return s > 0.0 ? std::exp(-1.0 / s) : 0.0;
  }

  static double normalization() {
    static const double c = 1.0 / integrate_composite(shape, -1.0, 1.0, 32, 16);
    return c;
  }

  static double density(double u) { return normalization() * shape(u); }

  // R̂(k) = ∫ R(u) e^{iku} du, real since R is even.
  static double fourier(double k) {
    const int panels = std::max(32, int(std::ceil(std::abs(k))));
    return 2.0 * normalization() * integrate_composite([k](double u) { return shape(u) * std::cos(k * u); }, 0.0, 1.0,
                                                       panels, 16);
  }

  // Rejection from the uniform proposal; acceptance exp(1 − 1/(1 − u²)).
  static double draw(Rng& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0), v(0.0, 1.0);
    for (;;) {
      const double x = u(rng);
      const double s = 1.0 - x * x;
      if (s <= 0.0) continue;
      if (v(rng) < std::exp(1.0 - 1.0 / s)) return x;
    }
  }
};

// X̃ = X + δU with U ~ R, independent across samples.
inline std::vector<double> regularized_variable(std::span<const double> samples, double delta, Rng& rng) {
  if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
  std::vector<double> out(samples.size());
  for (std::size_t k = 0; k < samples.size(); ++k) out[k] = samples[k] + delta * Mollifier::draw(rng);
  return out;
}

struct ParsevalOptions {
  double low_cutoff = 5.0;         // K
  double truncation = 40.0;        // integrate ω up to truncation/δ
  int order = 8;                   // Gauss points per panel
  double panel_scale = 1.0;        // panel width = panel_scale / max(ε, max|X|, 1)
  double tail_flag_fraction = 0.1;
};

struct ParsevalResult {
  double lhs = 0.0;         // P[X̃ ∈ (−ε, ε)] by counting
  double lhs_stderr = 0.0;
  double rhs = 0.0;         // (1/π) ∫ sin(εω)/ω R̂(δω) F̂(ω) dω over |ω| ≤ Ω
  double low = 0.0;         // |ω| ≤ K
  double intermediate = 0.0;  // K < |ω| ≤ 1/δ
  double high = 0.0;        // |ω| > 1/δ
  double omega_max = 0.0;
  double tail_estimate = 0.0;  // (1/π) ∫_{|ω|>Ω} |R̂(δω)|/|ω|
  bool flagged = false;
};

inline ParsevalResult parseval_probe(std::span<const double> samples, double ess, double delta, double eps,
                                     Rng& rng, const ParsevalOptions& opt = {}) {
  if (samples.empty()) throw std::invalid_argument("Parseval probe of an empty series");
  if (!(delta > 0.0) || !(eps > 0.0)) throw std::invalid_argument("delta and eps must be positive");
  ess = std::clamp(ess, 1.0, double(samples.size()));
  ParsevalResult out;
  const std::vector<double> reg = regularized_variable(samples, delta, rng);
  std::size_t hits = 0;
  for (double x : reg) hits += std::abs(x) < eps ? 1 : 0;
  out.lhs = double(hits) / double(reg.size());
  out.lhs_stderr = std::sqrt(out.lhs * (1.0 - out.lhs) / ess);

  double xmax = 0.0;
  for (double x : samples) xmax = std::max(xmax, std::abs(x));
  const double n = double(samples.size());
  // The integrand is even in ω (sin(εω)/ω and R̂ even, Re F̂ even), so integrate over ω > 0 and double.
  auto integrand = [&](double w) {
    CompensatedSum re;
    for (double x : samples) re.add(std::cos(w * x));
    const double sinc = w == 0.0 ? eps : std::sin(eps * w) / w;
    return (2.0 / pi) * sinc * Mollifier::fourier(delta * w) * re.value() / n;
  };
  out.omega_max = opt.truncation / delta;
  const double width = opt.panel_scale / std::max({eps, xmax, 1.0});
  auto segment = [&](double a, double b) {
    if (b <= a) return 0.0;
    const int panels = std::max(1, int(std::ceil((b - a) / width)));
    return integrate_composite(integrand, a, b, panels, opt.order);
  };
  const double k = std::min(opt.low_cutoff, 1.0 / delta);
  out.low = segment(0.0, k);
  out.intermediate = segment(k, 1.0 / delta);
  out.high = segment(1.0 / delta, out.omega_max);
  out.rhs = out.low + out.intermediate + out.high;
  // ∫_Ω^∞ |R̂(δω)|/ω dω = ∫_{δΩ}^∞ |R̂(s)|/s ds, cut where R̂ has decayed by 1e-12 more.
  auto tail = [&](double s) { return std::abs(Mollifier::fourier(s)) / s; };
  const double s0 = opt.truncation;
  out.tail_estimate = (2.0 / pi) * integrate_composite(tail, s0, 20.0 * s0, int(19.0 * s0), 8);
  out.flagged = out.tail_estimate > opt.tail_flag_fraction * std::abs(out.rhs);
  return out;
}

// ---------------------------------------------------------------- ODE

struct OdeCurve {
  std::vector<double> omega;
  std::vector<Complex> value;
};

inline constexpr double ode_max_step = 1e-3;

// F' = (−ω‖∇φ‖²/(2πβ) + i b_Z) F, F(0) = 1, by classical RK4 with steps
// no longer than ode_max_step between consecutive grid nodes. ‖∇φ‖²/(2πβ) is σ_Z².
inline OdeCurve homogeneous_ode_solution(const GaussianLimit& g, std::span<const double> omega,
                                         double max_step = ode_max_step) {
  if (!std::is_sorted(omega.begin(), omega.end())) throw std::invalid_argument("omega grid must be ascending");
  const double a = g.variance;
  const Complex phase(0.0, g.mean);
  auto rhs = [&](double w, Complex f) { return (-w * a + phase) * f; };
  auto advance = [&](double from, double to, Complex f) {
    const int steps = std::max(1, int(std::ceil(std::abs(to - from) / max_step)));
    const double h = (to - from) / steps;
    for (int s = 0; s < steps; ++s) {
      const double w = from + s * h;
      const Complex k1 = rhs(w, f);
      const Complex k2 = rhs(w + 0.5 * h, f + 0.5 * h * k1);
      const Complex k3 = rhs(w + 0.5 * h, f + 0.5 * h * k2);
      const Complex k4 = rhs(w + h, f + h * k3);
      f += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return f;
  };
  OdeCurve out;
  out.omega.assign(omega.begin(), omega.end());
  out.value.resize(omega.size());
  const auto split = std::lower_bound(omega.begin(), omega.end(), 0.0) - omega.begin();
  Complex f(1.0, 0.0);
  double at = 0.0;
  for (std::size_t k = split; k < omega.size(); ++k) {
    f = advance(at, omega[k], f);
    at = omega[k];
    out.value[k] = f;
  }
  f = Complex(1.0, 0.0);
  at = 0.0;
  for (std::ptrdiff_t k = split - 1; k >= 0; --k) {
    f = advance(at, omega[k], f);
    at = omega[k];
    out.value[k] = f;
  }
  return out;
}

inline double max_abs_error(const OdeCurve& c, const GaussianLimit& g) {
  double e = 0.0;
  for (std::size_t k = 0; k < c.omega.size(); ++k) e = std::max(e, std::abs(c.value[k] - gaussian_charfn(g, c.omega[k])));
  return e;
}

// ---------------------------------------------------------------- a priori bounds

struct AprioriInput {
  std::size_t n = 0;
  std::vector<PointConfiguration> snapshots;
  std::vector<double> fluctuations;  // ⟨ξ, M_N⟩ samples
};

struct AprioriOptions {
  std::vector<double> radii{0.15, 0.3};
  Vec2 center{0.0, 0.0};
  bool anisotropy = true;
};

struct ScalingRow {
  std::size_t n = 0;
  double r = 0.0;
  double n_r2 = 0.0;
  double ele = 0.0, ele_stderr = 0.0;
  double points = 0.0, points_stderr = 0.0;
  double ani = 0.0, ani_stderr = 0.0;  // mean |Ani|
  std::size_t snapshots = 0;
};

struct NormRow {
  std::size_t n = 0;
  double l1 = 0.0;
  double l2 = 0.0;
  std::size_t samples = 0;
};

struct AprioriReport {
  std::vector<ScalingRow> rows;
  std::vector<NormRow> norms;
  OrderFit ele, points, ani;  // log-log slopes against N r²
  double l1_spread = 0.0;     // max / min over N
  double l2_spread = 0.0;
  double n_range = 0.0;       // max N / min N
};

namespace detail {

inline std::pair<double, double> mean_stderr(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  const double m = mean(v);
  const double s = v.size() > 1 ? std::sqrt(variance(v) * double(v.size()) / double(v.size() - 1) / double(v.size())) : 0.0;
  return {m, s};
}

}  // namespace detail

// Mean Ele, Points and |Ani| on disks of radius r against N r², and the L¹/L²
// norms of the fluctuation samples against N. Ani uses ψ = ∇φ_r/m0 with the
// mesoscopic bump filling the window.
inline AprioriReport apriori_bound_probe(const std::vector<AprioriInput>& inputs, const EquilibriumMeasure& mu,
                                         const AprioriOptions& opt = {}) {
  std::vector<std::size_t> ns;
  for (const auto& in : inputs) ns.push_back(in.n);
  std::sort(ns.begin(), ns.end());
  ns.erase(std::unique(ns.begin(), ns.end()), ns.end());
  if (ns.size() < 3) throw std::invalid_argument("a priori probe needs at least three values of N");
  if (opt.radii.empty()) throw std::invalid_argument("a priori probe needs window radii");

  AprioriReport out;
  std::vector<double> x, ele, pts, ani;
  for (const double r : opt.radii) {
    const Disk window{opt.center, r};
    std::optional<TestFunction> bump;
    if (opt.anisotropy) {
      TestFunctionSpec spec;
      spec.center = opt.center;
      spec.scale = r / spec.base_radius;
      spec.mesoscopic = true;
      bump.emplace(spec, mu);
    }
    for (const auto& in : inputs) {
      ScalingRow row;
      row.n = in.n;
      row.r = r;
      row.n_r2 = double(in.n) * r * r;
      row.snapshots = in.snapshots.size();
      std::vector<double> e, p, a;
      for (const auto& c : in.snapshots) {
        if (c.size() != in.n) throw std::invalid_argument("snapshot size does not match N");
        e.push_back(electric_energy(c, mu, window).value);
        p.push_back(double(points_count(c, window)));
        if (bump) a.push_back(std::abs(anisotropy(c, mu, GradientOverDensity(*bump, mu)).ani));
      }
      std::tie(row.ele, row.ele_stderr) = detail::mean_stderr(e);
      std::tie(row.points, row.points_stderr) = detail::mean_stderr(p);
      std::tie(row.ani, row.ani_stderr) = detail::mean_stderr(a);
      if (!e.empty()) {
        x.push_back(row.n_r2);
        ele.push_back(row.ele);
        pts.push_back(row.points);
        ani.push_back(row.ani);
      }
      out.rows.push_back(row);
    }
  }
  out.ele = fit_order(x, ele);
  out.points = fit_order(x, pts);
  if (opt.anisotropy) out.ani = fit_order(x, ani);

  double lo1 = infinity, hi1 = 0.0, lo2 = infinity, hi2 = 0.0;
  for (const auto& in : inputs) {
    NormRow nr;
    nr.n = in.n;
    nr.samples = in.fluctuations.size();
    if (nr.samples == 0) continue;
    CompensatedSum s1, s2;
    for (double v : in.fluctuations) {
      s1.add(std::abs(v));
      s2.add(v * v);
    }
    nr.l1 = s1.value() / double(nr.samples);
    nr.l2 = std::sqrt(s2.value() / double(nr.samples));
    lo1 = std::min(lo1, nr.l1);
    hi1 = std::max(hi1, nr.l1);
    lo2 = std::min(lo2, nr.l2);
    hi2 = std::max(hi2, nr.l2);
    out.norms.push_back(nr);
  }
  if (!out.norms.empty()) {
    out.l1_spread = hi1 > 0.0 ? hi1 / lo1 : 1.0;
    out.l2_spread = hi2 > 0.0 ? hi2 / lo2 : 1.0;
  }
  out.n_range = double(ns.back()) / double(ns.front());
  return out;
}

}  // namespace coulomb
