#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <thread>
#include <vector>

#include "coulomb/diagnostics.hpp"
#include "coulomb/energy.hpp"
#include "coulomb/geometry.hpp"
#include "coulomb/measure.hpp"
#include "coulomb/quadrature.hpp"
#include "coulomb/test_function.hpp"

namespace coulomb {

using Rng = std::mt19937_64;

// Per-chain generator; the stream id is mixed into the seed sequence so
// chains sharing a master seed get distinct streams.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32), 0x9e3779b9u};
  return Rng(seq);
}

// N i.i.d. draws from μ0 by rejection against the maximal density.
inline std::vector<Vec2> sample_equilibrium(const EquilibriumMeasure& mu, std::size_t n, Rng& rng) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const Disk s = mu.support();
  const double peak = mu.density(s.center);
  std::vector<Vec2> pts;
  pts.reserve(n);
  while (pts.size() < n) {
    const Vec2 z{s.center.x + s.radius * unit(rng), s.center.y + s.radius * unit(rng)};
    if (!s.contains(z)) continue;
    if (u01(rng) * peak <= mu.density(z)) pts.push_back(z);
  }
  return pts;
}

struct SamplerOptions {
  double beta = 2.0;
  double sigma_prop = 0.0;                   // 0 selects 0.5/√N
  std::optional<std::size_t> burn_in_sweeps;  // default 50·N
  std::size_t thinning_moves = 0;            // 0 selects N (one sweep per record)
  bool langevin = false;
  std::optional<Disk> bias_region;           // mesoscopic biased particle choice
  std::size_t revalidate_every = 1000;       // sweeps between cache checks
  double revalidate_tolerance = 1e-9;

  double sigma_for(std::size_t n) const { return sigma_prop > 0.0 ? sigma_prop : 0.5 / std::sqrt(double(n)); }
  std::size_t burn_in_for(std::size_t n) const { return burn_in_sweeps.value_or(50 * n); }
  std::size_t thinning_for(std::size_t n) const { return thinning_moves > 0 ? thinning_moves : n; }
};

// A Markov chain on configurations with cached pair logarithms
// L[i][j] = −log|xᵢ − xⱼ| and row sums, so a single-particle move is O(N).
class ChainState {
 public:
  ChainState(std::vector<Vec2> points, const EquilibriumMeasure& mu, const ConfiningPotential& zeta, double beta,
             std::uint64_t seed, std::uint64_t stream)
      : mu_(&mu), zeta_(&zeta), beta_(beta), seed_(seed), stream_(stream), rng_(make_rng(seed, stream)),
        pts_(std::move(points)) {
    if (!(beta > 0.0)) throw std::invalid_argument("beta must be positive");
    if (pts_.size() < 2) throw std::invalid_argument("a chain needs at least two points");
    n_ = pts_.size();
    scratch_.resize(n_);
    rebuild();
    if (!std::isfinite(pair_total_)) throw std::invalid_argument("initial configuration has coincident points");
  }

  std::size_t size() const { return n_; }
  std::span<const Vec2> points() const { return pts_; }
  PointConfiguration configuration() const { return PointConfiguration(pts_); }
  double beta() const { return beta_; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }
  Rng& rng() { return rng_; }
  const EquilibriumMeasure& measure() const { return *mu_; }

  // F(X_N, μ0) from the caches.
  double energy() const {
    const double nn = double(n_);
    return pair_total_ + potential_total_ + 0.5 * nn * nn * mu_->self_energy();
  }
  double confinement() const { return confinement_total_; }
  double log_density() const { return -beta_ * (energy() + confinement_total_); }

  // Change in log-density if particle i moved to y. Fills the scratch row.
  double proposal_delta(std::size_t i, Vec2 y) {
    double pairs = 0.0;
    for (std::size_t j = 0; j < n_; ++j) {
      if (j == i) {
        scratch_[j] = 0.0;
        continue;
      }
      const double v = pair_interaction(y, pts_[j]);
      if (v == infinity) return -infinity;
      scratch_[j] = v;
      pairs += v;
    }
    const auto ext_new = external(y);
    return -beta_ * ((pairs - row_[i]) + (ext_new.first - pot_[i]) + (ext_new.second - conf_[i]));
  }

  // Applies the move whose scratch row was filled by the last proposal_delta(i, y).
  void commit(std::size_t i, Vec2 y) {
    double row = 0.0;
    for (std::size_t j = 0; j < n_; ++j) {
      if (j == i) continue;
      const double v = scratch_[j];
      row_[j] += v - logs_[i * n_ + j];
      logs_[i * n_ + j] = v;
      logs_[j * n_ + i] = v;
      row += v;
    }
    pair_total_ += row - row_[i];
    row_[i] = row;
    const auto ext = external(y);
    potential_total_ += ext.first - pot_[i];
    confinement_total_ += ext.second - conf_[i];
    pot_[i] = ext.first;
    conf_[i] = ext.second;
    pts_[i] = y;
  }

  // −β ∇_{xᵢ}(F + ζ̄) with particle i placed at y and the others fixed.
  Vec2 particle_gradient(std::size_t i, Vec2 y) const {
    Vec2 g{};
    for (std::size_t j = 0; j < n_; ++j) {
      if (j == i) continue;
      const Vec2 d = y - pts_[j];
      g -= d / norm2(d);
    }
    const double nn = double(n_);
    g -= nn * mu_->log_potential_gradient(y);
    g += 2.0 * nn * zeta_->gradient(y);
    return -beta_ * g;
  }

  // Recomputes every cache and returns the largest relative drift found.
  double revalidate() {
    const std::vector<double> old_rows = row_;
    const double old_pairs = pair_total_, old_pot = potential_total_, old_conf = confinement_total_;
    rebuild();
    auto rel = [](double cached, double fresh) {
      return std::abs(cached - fresh) / std::max(1.0, std::abs(fresh));
    };
    double worst = std::max({rel(old_pairs, pair_total_), rel(old_pot, potential_total_), rel(old_conf, confinement_total_)});
    for (std::size_t i = 0; i < n_; ++i) worst = std::max(worst, rel(old_rows[i], row_[i]));
    return worst;
  }

 private:
  // (−N p(y), 2N ζ(y))
  std::pair<double, double> external(Vec2 y) const {
    const double nn = double(n_);
    return {-nn * mu_->log_potential(y), 2.0 * nn * (*zeta_)(y)};
  }

  void rebuild() {
    logs_.assign(n_ * n_, 0.0);
    row_.assign(n_, 0.0);
    pot_.assign(n_, 0.0);
    conf_.assign(n_, 0.0);
    CompensatedSum pairs, pot, conf;
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = i + 1; j < n_; ++j) {
        const double v = pair_interaction(pts_[i], pts_[j]);
        logs_[i * n_ + j] = logs_[j * n_ + i] = v;
        pairs.add(v);
      }
      const auto ext = external(pts_[i]);
      pot_[i] = ext.first;
      conf_[i] = ext.second;
      pot.add(ext.first);
      conf.add(ext.second);
    }
    for (std::size_t i = 0; i < n_; ++i) {
      CompensatedSum r;
      for (std::size_t j = 0; j < n_; ++j)
        if (j != i) r.add(logs_[i * n_ + j]);
      row_[i] = r.value();
    }
    pair_total_ = pairs.value();
    potential_total_ = pot.value();
    confinement_total_ = conf.value();
  }

  const EquilibriumMeasure* mu_;
  const ConfiningPotential* zeta_;
  double beta_;
  std::uint64_t seed_, stream_;
  Rng rng_;
  std::vector<Vec2> pts_;
  std::size_t n_ = 0;
  std::vector<double> logs_, row_, pot_, conf_, scratch_;
  double pair_total_ = 0.0, potential_total_ = 0.0, confinement_total_ = 0.0;
};

struct StepResult {
  bool accepted = false;
  double delta = 0.0;  // Δ log-density of the proposal (−∞ if auto-rejected)
};

// Metropolis acceptance: accept iff u < exp(Δ); Δ ≥ 0 always accepts.
inline bool metropolis_accept(double delta, Rng& rng) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  if (delta >= 0.0) return true;
  return u < std::exp(delta);
}

// One random-walk Metropolis move of a uniformly chosen particle.
inline StepResult metropolis_step(ChainState& state, double sigma, std::optional<Disk> restrict_to = std::nullopt,
                                  std::span<const std::size_t> candidates = {}) {
  Rng& rng = state.rng();
  std::size_t i;
  if (candidates.empty()) {
    i = std::uniform_int_distribution<std::size_t>(0, state.size() - 1)(rng);
  } else {
    i = candidates[std::uniform_int_distribution<std::size_t>(0, candidates.size() - 1)(rng)];
  }
  std::normal_distribution<double> gauss(0.0, sigma);
  const double dx = gauss(rng);
  const double dy = gauss(rng);
  const Vec2 y = state.points()[i] + Vec2{dx, dy};
  StepResult out;
  if (restrict_to && !restrict_to->contains(y)) {
    // Consume the acceptance draw so streams stay aligned.
    metropolis_accept(-infinity, rng);
    out.delta = -infinity;
    return out;
  }
  out.delta = state.proposal_delta(i, y);
  out.accepted = metropolis_accept(out.delta, rng);
  if (out.accepted) state.commit(i, y);
  return out;
}

// Single-particle Metropolis-adjusted Langevin move.
inline StepResult langevin_step(ChainState& state, double sigma) {
  Rng& rng = state.rng();
  const std::size_t i = std::uniform_int_distribution<std::size_t>(0, state.size() - 1)(rng);
  std::normal_distribution<double> gauss(0.0, sigma);
  const double dx = gauss(rng);
  const double dy = gauss(rng);
  const Vec2 x = state.points()[i];
  const double h = 0.5 * sigma * sigma;
  const Vec2 y = x + h * state.particle_gradient(i, x) + Vec2{dx, dy};
  StepResult out;
  out.delta = state.proposal_delta(i, y);
  if (out.delta == -infinity) {
    metropolis_accept(-infinity, rng);
    return out;
  }
  const Vec2 back = x - (y + h * state.particle_gradient(i, y));
  const Vec2 fwd = y - (x + h * state.particle_gradient(i, x));
  const double correction = (norm2(fwd) - norm2(back)) / (2.0 * sigma * sigma);
  out.delta += correction;
  out.accepted = metropolis_accept(out.delta, rng);
  if (out.accepted) state.commit(i, y);
  return out;
}

struct SampleRecord {
  std::size_t chain = 0;
  std::size_t sweep = 0;
  double fluctuation = 0.0;
  double energy = 0.0;
  std::size_t points_in_supp = 0;
};

struct Snapshot {
  std::size_t chain = 0;
  std::size_t sweep = 0;
  std::vector<Vec2> points;
};

struct ChainOutput {
  std::vector<SampleRecord> samples;
  std::vector<Snapshot> snapshots;
  std::uint64_t proposed = 0;
  std::uint64_t accepted = 0;
  double max_cache_drift = 0.0;

  double acceptance_rate() const { return proposed ? double(accepted) / double(proposed) : 0.0; }
  std::vector<double> fluctuations() const {
    std::vector<double> v;
    v.reserve(samples.size());
    for (const auto& s : samples) v.push_back(s.fluctuation);
    return v;
  }
};

// Independent chains sharing a target; each chain owns its stream.
struct ChainEnsemble {
  std::vector<ChainState> chains;
  SamplerOptions options;

  static ChainEnsemble create(const EquilibriumMeasure& mu, const ConfiningPotential& zeta, std::size_t n,
                              std::size_t n_chains, std::uint64_t seed, const SamplerOptions& opt) {
    if (n_chains == 0) throw std::invalid_argument("at least one chain is required");
    ChainEnsemble e;
    e.options = opt;
    e.chains.reserve(n_chains);
    for (std::size_t c = 0; c < n_chains; ++c) {
      Rng init = make_rng(seed, 0x100000000ull + c);
      e.chains.emplace_back(sample_equilibrium(mu, n, init), mu, zeta, opt.beta, seed, c);
    }
    return e;
  }
};

struct RunOptions {
  std::size_t snapshot_every = 0;  // keep every k-th record's configuration (0: none)
  unsigned max_threads = 0;        // 0: hardware concurrency
};

namespace detail {

inline std::size_t count_in(std::span<const Vec2> pts, const Disk& d) {
  std::size_t k = 0;
  for (const Vec2& p : pts) k += d.contains(p) ? 1 : 0;
  return k;
}

template <class Stat>
ChainOutput run_one_chain(ChainState& state, std::size_t chain_id, const SamplerOptions& opt, const Stat& stat,
                          const Disk& supp, std::size_t n_samples, const RunOptions& run) {
  ChainOutput out;
  const std::size_t n = state.size();
  const double sigma = opt.sigma_for(n);
  const std::size_t thin = opt.thinning_for(n);
  std::vector<std::size_t> inside;
  std::size_t moves = 0;
  std::size_t next_check = opt.revalidate_every > 0 ? opt.revalidate_every * n : 0;

  auto move = [&] {
    StepResult r;
    if (opt.langevin) {
      r = langevin_step(state, sigma);
    } else if (opt.bias_region) {
      // Mixture of the plain kernel and a kernel that picks among particles
      // in the region and keeps them there; both leave the target invariant.
      const bool biased = std::uniform_real_distribution<double>(0.0, 1.0)(state.rng()) < 0.5;
      if (biased) {
        inside.clear();
        const auto pts = state.points();
        for (std::size_t j = 0; j < n; ++j)
          if (opt.bias_region->contains(pts[j])) inside.push_back(j);
        if (inside.empty()) {
          ++moves;
          ++out.proposed;
          return;
        }
        r = metropolis_step(state, sigma, opt.bias_region, inside);
      } else {
        r = metropolis_step(state, sigma);
      }
    } else {
      r = metropolis_step(state, sigma);
    }
    ++moves;
    ++out.proposed;
    out.accepted += r.accepted ? 1 : 0;
    if (next_check && moves >= next_check) {
      next_check += opt.revalidate_every * n;
      const double drift = state.revalidate();
      out.max_cache_drift = std::max(out.max_cache_drift, drift);
      if (drift > opt.revalidate_tolerance)
        throw std::runtime_error("cached interaction sums drifted beyond tolerance");
    }
  };

  const std::size_t burn = opt.burn_in_for(n) * n;
  for (std::size_t k = 0; k < burn; ++k) move();
  out.samples.reserve(n_samples);
  for (std::size_t s = 0; s < n_samples; ++s) {
    for (std::size_t k = 0; k < thin; ++k) move();
    SampleRecord rec;
    rec.chain = chain_id;
    rec.sweep = moves / n;
    rec.fluctuation = stat(state.points());
    rec.energy = state.energy();
    rec.points_in_supp = count_in(state.points(), supp);
    out.samples.push_back(rec);
    if (run.snapshot_every && (s + 1) % run.snapshot_every == 0)
      out.snapshots.push_back({chain_id, rec.sweep, std::vector<Vec2>(state.points().begin(), state.points().end())});
  }
  return out;
}

}  // namespace detail

// Runs every chain (concurrently when cores allow) and returns per-chain
// outputs in chain order. Deterministic given the ensemble's seeds.
inline std::vector<ChainOutput> run_chain(ChainEnsemble& ensemble, const TestFunction& phi, std::size_t n_samples,
                                          const RunOptions& run = {}) {
  std::vector<ChainOutput> outputs(ensemble.chains.size());
  if (n_samples == 0) return outputs;
  const EquilibriumMeasure& mu = ensemble.chains.front().measure();
  const LinearStatistic<PhiField> stat(PhiField{&phi}, mu);
  auto eval = [&](std::span<const Vec2> pts) { return stat(pts); };
  const Disk supp = phi.support();

  unsigned workers = run.max_threads ? run.max_threads : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(ensemble.chains.size()));
  std::vector<std::exception_ptr> errors(ensemble.chains.size());
  auto work = [&](std::size_t c) {
    try {
      outputs[c] = detail::run_one_chain(ensemble.chains[c], c, ensemble.options, eval, supp, n_samples, run);
    } catch (...) {
      errors[c] = std::current_exception();
    }
  };
  if (workers <= 1) {
    for (std::size_t c = 0; c < ensemble.chains.size(); ++c) work(c);
  } else {
    std::vector<std::thread> pool;
    std::size_t next = 0;
    std::mutex m;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (;;) {
          std::size_t c;
          {
            std::lock_guard lock(m);
            if (next >= ensemble.chains.size()) return;
            c = next++;
          }
          work(c);
        }
      });
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return outputs;
}

// Running first and second moments; partials merge in chain order.
struct MomentAccumulator {
  CompensatedSum sum, sum_sq;
  std::size_t count = 0;

  void add(double x) {
    sum.add(x);
    sum_sq.add(x * x);
    ++count;
  }
  void merge(const MomentAccumulator& o) {
    sum.merge(o.sum);
    sum_sq.merge(o.sum_sq);
    count += o.count;
  }
  double mean() const { return count ? sum.value() / double(count) : 0.0; }
  double variance() const {
    if (count == 0) return 0.0;
    const double m = mean();
    return std::max(0.0, sum_sq.value() / double(count) - m * m);
  }
};

// Summed per-chain ESS of the fluctuation series.
inline double ensemble_ess(const std::vector<ChainOutput>& outputs) {
  double total = 0.0;
  for (const auto& o : outputs) {
    const auto f = o.fluctuations();
    if (f.size() >= 10) total += effective_sample_size(f);
  }
  return total;
}

inline std::vector<double> pooled_fluctuations(const std::vector<ChainOutput>& outputs) {
  std::vector<double> v;
  for (const auto& o : outputs)
    for (const auto& s : o.samples) v.push_back(s.fluctuation);
  return v;
}

}  // namespace coulomb
