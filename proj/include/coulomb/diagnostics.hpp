#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "coulomb/quadrature.hpp"

namespace coulomb {

inline double mean(std::span<const double> xs) {
  CompensatedSum s;
  for (double x : xs) s.add(x);
  return xs.empty() ? 0.0 : s.value() / static_cast<double>(xs.size());
}

// Biased (1/n) sample variance.
inline double variance(std::span<const double> xs) {
  const double m = mean(xs);
  CompensatedSum s;
  for (double x : xs) s.add((x - m) * (x - m));
  return xs.empty() ? 0.0 : s.value() / static_cast<double>(xs.size());
}

// Effective sample size by Geyer's initial monotone positive sequence.
//
// Autocorrelations are summed in adjacent pairs Γ_m = ρ_{2m} + ρ_{2m+1}
// until the first non-positive pair; pairs are forced non-increasing. The
// integrated time τ = −1 + 2 Σ Γ_m is floored at 1, so ESS = n / max(τ, 1)
// never exceeds n. Antithetic series (τ < 1) therefore report ESS = n, and a
// constant series (zero variance) is defined to have ESS = n.
inline double effective_sample_size(std::span<const double> xs) {
  const std::size_t n = xs.size();
  if (n < 10) throw std::invalid_argument("effective_sample_size needs at least 10 samples");
  const double m = mean(xs);
  std::vector<double> centred(n);
  for (std::size_t t = 0; t < n; ++t) centred[t] = xs[t] - m;
  auto autocov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t t = 0; t + lag < n; ++t) s += centred[t] * centred[t + lag];
    return s / static_cast<double>(n);
  };
  const double c0 = autocov(0);
  if (!(c0 > 0.0) || c0 <= 1e-300) return static_cast<double>(n);

  double tau = -1.0;
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t lag = 0; lag + 1 < n; lag += 2) {
    double gamma = (autocov(lag) + autocov(lag + 1)) / c0;
    if (gamma <= 0.0) break;
    gamma = std::min(gamma, prev);
    prev = gamma;
    tau += 2.0 * gamma;
  }
  return static_cast<double>(n) / std::max(tau, 1.0);
}

}  // namespace coulomb
