#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "coulomb/diagnostics.hpp"
#include "coulomb/sampler.hpp"

using namespace coulomb;
using Catch::Approx;

namespace {

const EquilibriumMeasure& uniform() {
  static const EquilibriumMeasure mu = EquilibriumMeasure::uniform_disk();
  return mu;
}
const ConfiningPotential zeta;

TestFunction centred_bump(double amplitude = 1.0) {
  TestFunctionSpec s;
  s.amplitude = amplitude;
  return TestFunction(s, uniform());
}

SamplerOptions short_run(std::size_t burn = 20) {
  SamplerOptions o;
  o.beta = 2.0;
  o.burn_in_sweeps = burn;
  return o;
}

}  // namespace

TEST_CASE("Metropolis rule", "[sampler]") {
  Rng rng(1);
  for (int k = 0; k < 1000; ++k) CHECK(metropolis_accept(0.0, rng));
  for (int k = 0; k < 1000; ++k) CHECK_FALSE(metropolis_accept(-infinity, rng));
}

TEST_CASE("proposal onto an occupied site is rejected", "[sampler]") {
  ChainState s({{0.1, 0.0}, {-0.2, 0.3}, {0.0, -0.4}}, uniform(), zeta, 2.0, 3, 0);
  const Vec2 occupied = s.points()[1];
  CHECK(s.proposal_delta(0, occupied) == -infinity);
  CHECK_THROWS_AS(ChainState({{0.1, 0.0}, {0.1, 0.0}}, uniform(), zeta, 2.0, 1, 0), std::invalid_argument);
}

TEST_CASE("N=2 acceptance rate", "[sampler]") {
  ChainState s({{0.3, 0.0}, {-0.3, 0.0}}, uniform(), zeta, 2.0, 42, 0);
  const double sigma = 0.5 / std::sqrt(2.0);
  int accepted = 0;
  for (int k = 0; k < 10000; ++k) accepted += metropolis_step(s, sigma).accepted ? 1 : 0;
  const double rate = accepted / 10000.0;
  CHECK(rate > 0.1);
  CHECK(rate < 0.9);
}

TEST_CASE("cached acceptance ratio equals full recomputation", "[sampler][property]") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g(0.0, 0.4);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (const auto& mu : {EquilibriumMeasure::uniform_disk(), EquilibriumMeasure::variable_disk()}) {
    for (int trial = 0; trial < 30; ++trial) {
      const std::size_t n = 2 + trial % 15;
      std::vector<Vec2> pts(n);
      for (auto& p : pts) p = {g(rng), g(rng)};
      ChainState s(pts, mu, zeta, 1.0 + 3.0 * u01(rng), 100 + trial, 0);
      for (int m = 0; m < 20; ++m) {
        const std::size_t i = rng() % n;
        const Vec2 y = s.points()[i] + Vec2{g(rng), g(rng)};
        std::vector<Vec2> moved(s.points().begin(), s.points().end());
        moved[i] = y;
        const double full = gibbs_log_density(PointConfiguration(moved), mu, zeta, s.beta()) -
                            gibbs_log_density(s.configuration(), mu, zeta, s.beta());
        const double cached = s.proposal_delta(i, y);
        CHECK(std::abs(std::exp(std::min(0.0, cached)) - std::exp(std::min(0.0, full))) <= 1e-9);
        CHECK(cached == Approx(full).margin(1e-9));
        if (u01(rng) < 0.5) s.commit(i, y);
        CHECK(s.log_density() == Approx(gibbs_log_density(s.configuration(), mu, zeta, s.beta())).margin(1e-9));
      }
    }
  }
}

TEST_CASE("caches stay valid over long runs", "[sampler][property]") {
  auto ens = ChainEnsemble::create(uniform(), zeta, 32, 2, 77, short_run(10));
  ens.options.revalidate_every = 50;
  const auto out = run_chain(ens, centred_bump(), 200);
  for (const auto& o : out) {
    CHECK(o.max_cache_drift <= 1e-9);
    CHECK(o.acceptance_rate() >= 0.0);
    CHECK(o.acceptance_rate() <= 1.0);
    CHECK(o.samples.size() == 200);
  }
  for (std::size_t c = 0; c < ens.chains.size(); ++c) {
    const double fresh = log_energy(ens.chains[c].configuration(), uniform());
    CHECK(ens.chains[c].energy() == Approx(fresh).margin(1e-9 * std::max(1.0, std::abs(fresh))));
  }
}

TEST_CASE("same seed gives identical streams", "[sampler]") {
  auto a = ChainEnsemble::create(uniform(), zeta, 16, 3, 5, short_run());
  auto b = ChainEnsemble::create(uniform(), zeta, 16, 3, 5, short_run());
  auto c = ChainEnsemble::create(uniform(), zeta, 16, 3, 6, short_run());
  const auto oa = run_chain(a, centred_bump(), 100);
  const auto ob = run_chain(b, centred_bump(), 100, {0, 1});
  const auto oc = run_chain(c, centred_bump(), 100);
  for (std::size_t k = 0; k < oa.size(); ++k) {
    REQUIRE(oa[k].samples.size() == ob[k].samples.size());
    for (std::size_t s = 0; s < oa[k].samples.size(); ++s) {
      CHECK(oa[k].samples[s].fluctuation == ob[k].samples[s].fluctuation);
      CHECK(oa[k].samples[s].energy == ob[k].samples[s].energy);
    }
  }
  CHECK(oa[0].samples.back().fluctuation != oc[0].samples.back().fluctuation);
  // Chains of one ensemble use distinct streams.
  CHECK(oa[0].samples.back().fluctuation != oa[1].samples.back().fluctuation);
  CHECK(a.chains[0].stream() != a.chains[1].stream());
}

TEST_CASE("zero test function and empty requests", "[sampler]") {
  auto e = ChainEnsemble::create(uniform(), zeta, 8, 1, 1, short_run());
  const auto out = run_chain(e, centred_bump(0.0), 50);
  for (const auto& s : out[0].samples) CHECK(s.fluctuation == 0.0);
  CHECK(run_chain(e, centred_bump(), 0)[0].samples.empty());
}

TEST_CASE("merged partials equal single-threaded aggregation", "[sampler][property]") {
  auto a = ChainEnsemble::create(uniform(), zeta, 16, 4, 12, short_run());
  auto b = ChainEnsemble::create(uniform(), zeta, 16, 4, 12, short_run());
  const auto threaded = run_chain(a, centred_bump(), 200, {0, 4});
  const auto serial = run_chain(b, centred_bump(), 200, {0, 1});
  MomentAccumulator merged, single;
  for (const auto& o : threaded) {
    MomentAccumulator part;
    for (const auto& s : o.samples) part.add(s.fluctuation);
    merged.merge(part);
  }
  for (const auto& o : serial)
    for (const auto& s : o.samples) single.add(s.fluctuation);
  CHECK(merged.count == single.count);
  CHECK(merged.mean() == Approx(single.mean()).margin(1e-15));
  CHECK(merged.variance() == Approx(single.variance()).margin(1e-15));
  CHECK(ensemble_ess(threaded) == ensemble_ess(serial));
}

TEST_CASE("effective sample size", "[diagnostics]") {
  std::mt19937_64 rng(123);
  std::normal_distribution<double> g;
  std::vector<double> iid(10000);
  for (auto& x : iid) x = g(rng);
  const double ess = effective_sample_size(iid);
  CHECK(ess >= 8000.0);
  CHECK(ess <= 12000.0);

  std::vector<double> alt(1000);
  for (std::size_t k = 0; k < alt.size(); ++k) alt[k] = k % 2 ? 1.0 : -1.0;
  CHECK(effective_sample_size(alt) == 1000.0);
  CHECK(effective_sample_size(std::vector<double>(500, 3.0)) == 500.0);

  // AR(1) with ρ = 0.9 has τ = 19.
  std::vector<double> ar(200000);
  double x = 0.0;
  for (auto& v : ar) v = x = 0.9 * x + g(rng);
  CHECK(effective_sample_size(ar) == Approx(200000.0 / 19.0).epsilon(0.15));
  CHECK_THROWS_AS(effective_sample_size(std::vector<double>(5, 1.0)), std::invalid_argument);
}

TEST_CASE("Langevin and biased kernels target the same law", "[sampler]") {
  // A 3-particle system: compare the mean pair energy across kernels.
  auto mean_energy = [](SamplerOptions opt) {
    auto e = ChainEnsemble::create(uniform(), zeta, 3, 4, 31, opt);
    const auto out = run_chain(e, centred_bump(), 20000);
    MomentAccumulator m;
    for (const auto& o : out)
      for (const auto& s : o.samples) m.add(s.energy);
    return std::pair{m.mean(), std::sqrt(m.variance() / ensemble_ess(out))};
  };
  SamplerOptions plain = short_run(100);
  plain.sigma_prop = 0.3;
  SamplerOptions mala = plain;
  mala.langevin = true;
  mala.sigma_prop = 0.15;
  SamplerOptions biased = plain;
  biased.bias_region = Disk{{0.0, 0.0}, 0.5};
  const auto [m0, s0] = mean_energy(plain);
  const auto [m1, s1] = mean_energy(mala);
  const auto [m2, s2] = mean_energy(biased);
  CHECK(std::abs(m1 - m0) <= 4.0 * std::hypot(s0, s1));
  CHECK(std::abs(m2 - m0) <= 4.0 * std::hypot(s0, s2));
}

TEST_CASE("N=64 variance is near the limiting value", "[sampler][slow]") {
  SamplerOptions opt;
  opt.beta = 2.0;
  opt.burn_in_sweeps = 500;
  auto e = ChainEnsemble::create(uniform(), zeta, 64, 4, 2718, opt);
  const TestFunction phi = centred_bump();
  std::vector<double> pooled;
  std::vector<std::vector<double>> per_chain(4);
  double ess = 0.0;
  // Only the first block burns in; extend until 10^5 effective samples.
  while (ess < 1e5) {
    const auto out = run_chain(e, phi, 25000);
    e.options.burn_in_sweeps = 0;
    ess = 0.0;
    for (std::size_t c = 0; c < out.size(); ++c) {
      const auto f = out[c].fluctuations();
      per_chain[c].insert(per_chain[c].end(), f.begin(), f.end());
      ess += effective_sample_size(per_chain[c]);
    }
  }
  for (const auto& c : per_chain) pooled.insert(pooled.end(), c.begin(), c.end());
  const double var = variance(pooled);
  const double sigma2 = (12.0 * pi / 11.0) / (2.0 * pi * 2.0);
  INFO("ESS " << ess << " variance " << var << " limit " << sigma2);
  CHECK(var >= sigma2 / 3.0);
  CHECK(var <= sigma2 * 3.0);
}
