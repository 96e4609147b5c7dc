#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "coulomb/transport.hpp"
#include "oracles.hpp"

using namespace coulomb;
using Catch::Approx;

namespace {

const EquilibriumMeasure& uniform() {
  static const EquilibriumMeasure mu = EquilibriumMeasure::uniform_disk();
  return mu;
}

const EquilibriumMeasure& variable() {
  static const EquilibriumMeasure mu = EquilibriumMeasure::variable_disk();
  return mu;
}

TestFunction bump(const EquilibriumMeasure& mu, double amplitude = 1.0, double scale = 1.0, Vec2 c = {}) {
  TestFunctionSpec s;
  s.amplitude = amplitude;
  s.scale = scale;
  s.center = c;
  s.mesoscopic = scale != 1.0;
  return TestFunction(s, mu);
}

std::vector<Vec2> random_points(std::size_t n, double spread, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-spread, spread);
  std::vector<Vec2> pts;
  while (pts.size() < n) {
    const Vec2 p{u(rng), u(rng)};
    if (norm(p) < spread) pts.push_back(p);
  }
  return pts;
}

// ∫|∇φ̄|² for φ̄ = (1 − |u|²)⁶, any radius: 2π ∫ (12 r (1 − r²)⁵)² r dr = 12π/11.
constexpr double bump_dirichlet = 12.0 * pi / 11.0;

}  // namespace

TEST_CASE("identity transport", "[transport]") {
  const TestFunction phi = bump(uniform());
  const TransportMap id(phi, uniform(), 0.0);
  for (const Vec2& x : random_points(50, 0.95, 1)) {
    CHECK(id(x) == x);
    CHECK(id.jacobian_det(x) == 1.0);
    const auto d = pushforward_density_at(id, x);
    CHECK(d.exact == uniform().density(x));
  }
  CHECK(jacobian_product(id, PointConfiguration(random_points(10, 0.8, 2))) == 1.0);
}

TEST_CASE("transport beyond the threshold is rejected", "[transport]") {
  const TestFunction phi = bump(uniform());
  const TransportMap small(phi, uniform(), 1e-3);
  const double thr = small.threshold();
  CHECK(thr > 1e-3);
  CHECK_NOTHROW(TransportMap(phi, uniform(), 0.99 * thr));
  CHECK_THROWS_WITH(TransportMap(phi, uniform(), 1.01 * thr), "not a diffeomorphism");
  CHECK_THROWS_WITH(TransportMap(phi, uniform(), -1.01 * thr), "not a diffeomorphism");
}

TEST_CASE("Jacobian determinant stays positive below the threshold", "[transport][property]") {
  for (const auto* mu : {&uniform(), &variable()}) {
    for (double scale : {1.0, 0.5}) {
      const TestFunction phi = bump(*mu, 1.0, scale, scale < 1.0 ? Vec2{0.1, -0.05} : Vec2{});
      const double thr = TransportMap(phi, *mu, 0.0).threshold();
      for (double frac : {-0.99, -0.5, 0.5, 0.99}) {
        const TransportMap map(phi, *mu, frac * thr);
        double lo = infinity;
        const Disk s = phi.support();
        for (int i = 0; i <= 200; ++i)
          for (int j = 0; j <= 200; ++j) {
            const Vec2 z{s.center.x + s.radius * (2.0 * i / 200 - 1), s.center.y + s.radius * (2.0 * j / 200 - 1)};
            lo = std::min(lo, map.jacobian_det(z));
          }
        CHECK(lo > 0.0);
      }
    }
  }
}

TEST_CASE("inverse map", "[transport]") {
  const TestFunction phi = bump(variable(), 1.0, 0.5, {0.2, 0.1});
  const TransportMap map(phi, variable(), 0.5 * TransportMap(phi, variable(), 0.0).threshold());
  for (const Vec2& x : random_points(200, 0.9, 3)) {
    const Vec2 back = map.inverse(map(x));
    CHECK(norm(back - x) <= 1e-13);
  }
}

TEST_CASE("pushforward preserves mass", "[transport][property]") {
  for (const auto* mu : {&uniform(), &variable()}) {
    const TestFunction phi = bump(*mu);
    for (double t : {3e-3, 1e-3, 1e-4, 1e-5, -1e-3}) {
      const double mass = pushforward_mass(TransportMap(phi, *mu, t));
      CHECK(std::abs(mass - 1.0) <= 1e-6);
    }
  }
}

TEST_CASE("first-order surrogate of the pushforward density", "[transport]") {
  const TestFunction phi = bump(variable());
  const std::vector<double> ts{1e-3, 3e-4, 1e-4, 3e-5, 1e-5};
  for (const Vec2& x : {Vec2{0.1, 0.2}, Vec2{-0.4, 0.3}, Vec2{0.5, -0.5}}) {
    std::vector<double> gaps;
    for (double t : ts) {
      const auto d = pushforward_density_at(TransportMap(phi, variable(), t), x);
      gaps.push_back(d.exact - d.surrogate);
    }
    const OrderFit f = fit_order(ts, gaps);
    INFO("x = (" << x.x << ", " << x.y << ") order " << f.order);
    CHECK(f.order >= 1.9);
  }
  // The surrogate for ψ = ∇φ/m0 is m0 − tΔφ.
  const TransportMap map(phi, variable(), 1e-4);
  const Vec2 x{0.3, -0.1}, y = map(x);
  CHECK(pushforward_density_at(map, x).surrogate ==
        Approx(variable().density(y) - 1e-4 * phi.laplacian(y)).epsilon(1e-14));
}

TEST_CASE("divergence-free transport has a second-order Jacobian product", "[transport]") {
  const TestFunction phi = bump(uniform());
  const RotatedGradient rot(phi);
  const FunctionVectorField field{[rot](Vec2 x) { return rot.value(x); }, [rot](Vec2 x) { return rot.jacobian(x); },
                                  rot.support()};
  const PointConfiguration cfg(random_points(8, 0.8, 5));
  const std::vector<double> ts{1e-3, 3e-4, 1e-4, 3e-5, 1e-5};
  std::vector<double> dev;
  for (double t : ts) dev.push_back(jacobian_product(TransportMap(uniform(), field, t), cfg) - 1.0);
  const OrderFit f = fit_order(ts, dev);
  CHECK(f.order >= 1.9);
  CHECK(f.r_squared >= 0.99);
}

TEST_CASE("order fit recovers a power law", "[transport]") {
  const std::vector<double> x{1e-1, 1e-2, 1e-3, 1e-4};
  std::vector<double> y;
  for (double v : x) y.push_back(-3.0 * v * v);
  const OrderFit f = fit_order(x, y);
  CHECK(f.order == Approx(2.0).margin(1e-12));
  CHECK(f.r_squared == Approx(1.0).margin(1e-12));
  CHECK(fit_order(x, std::vector<double>(4, 0.0)).degenerate);
}

TEST_CASE("energy expansion", "[transport]") {
  const double omega = 3.0;
  const auto ladder = default_ladder(omega, 8);
  const PointConfiguration cfg(random_points(8, 0.8, 3));

  const auto flat = verify_energy_expansion(cfg, uniform(), bump(uniform(), 0.0), omega, ladder);
  CHECK(flat.flat);
  CHECK(flat.measured == 0.0);
  CHECK(flat.predicted == 0.0);
  CHECK(flat.pass);

  const auto r = verify_energy_expansion(cfg, uniform(), bump(uniform()), omega, ladder);
  INFO("measured " << r.measured << " predicted " << r.predicted << " tolerance " << r.tolerance);
  CHECK(r.mismatch <= r.tolerance);
  CHECK(r.fit.order >= 1.8);
  CHECK(r.fit.order <= 2.2);
  CHECK(r.fit.r_squared >= 0.99);
  CHECK(r.pass);
  // Symmetric second differences divided by ε² stay bounded along the ladder.
  const auto [lo, hi] = std::minmax_element(r.curvatures.begin(), r.curvatures.end());
  CHECK(std::abs(*hi) <= 2.0 * std::abs(*lo));
}

TEST_CASE("energy expansion on the variable-density disk", "[transport]") {
  const double omega = 2.0;
  const PointConfiguration cfg(random_points(6, 0.8, 13));
  const auto r = verify_energy_expansion(cfg, variable(), bump(variable()), omega, default_ladder(omega, 6));
  INFO("measured " << r.measured << " predicted " << r.predicted << " tolerance " << r.tolerance);
  CHECK(r.pass);
}

TEST_CASE("fluctuation expansion", "[transport]") {
  const double omega = 3.0;
  const auto ladder = default_ladder(omega, 8);
  const auto zero = verify_fluctuation_expansion(PointConfiguration(random_points(8, 0.8, 4)), uniform(),
                                                 bump(uniform(), 0.0), omega, ladder);
  CHECK(zero.measured == 0.0);
  CHECK(zero.predicted == Approx(0.0).margin(1e-15));

  // All points outside supp φ: the two background integrals cancel.
  const TestFunction small = bump(uniform(), 1.0, 0.3);
  const PointConfiguration away({{0.6, 0.0}, {-0.5, 0.4}, {0.0, -0.7}, {0.45, 0.45}});
  const auto out = verify_fluctuation_expansion(away, uniform(), small, omega, default_ladder(omega, 4, 0.3));
  CHECK(std::abs(out.measured) <= 1e-10);
  CHECK(std::abs(out.predicted) <= 1e-10);

  for (std::uint64_t seed : {6u, 7u}) {
    const auto r = verify_fluctuation_expansion(PointConfiguration(random_points(8, 0.8, seed)), variable(),
                                                bump(variable()), omega, ladder);
    INFO("measured " << r.measured << " predicted " << r.predicted);
    CHECK(r.mismatch <= r.tolerance);
    CHECK(r.pass);
  }
}

TEST_CASE("Jacobian expansion", "[transport]") {
  const double omega = 3.0;
  const PointConfiguration cfg({{0.1, 0.05}, {-0.3, 0.2}, {0.25, -0.35}, {-0.1, -0.4}});
  const auto r = verify_jacobian_expansion(cfg, uniform(), bump(uniform()), omega, default_ladder(omega, 4));
  CHECK(r.mismatch <= r.tolerance);
  CHECK(r.pass);

  // With a variable density the background term ∫Δφ log m0 enters with weight 1/ω.
  const TestFunction phi = bump(variable());
  const auto v = verify_jacobian_expansion(cfg, variable(), phi, omega, default_ladder(omega, 4));
  const double lap_log = phi_integrals(phi, variable()).laplacian_log_density;
  CHECK(std::abs(lap_log) > 1e-2);
  CHECK(v.pass);
  CHECK(std::abs(v.measured - (v.predicted - lap_log / omega + lap_log / (omega * 4.0))) > 100.0 * v.tolerance);
}

TEST_CASE("kernel identity", "[transport]") {
  const TestFunction phi = bump(uniform());
  const std::vector<Vec2> centre{{0.0, 0.0}};
  const auto r = verify_kernel_identity(phi, centre);
  CHECK(r.max_relative_error <= 1e-3);
  CHECK(r.targets[0] == Approx(-two_pi));

  const std::vector<Vec2> probes{{0.0, 0.0}, {0.3, -0.2}, {0.6, 0.1}};
  const double h = phi.support().radius / 32.0;
  const double e1 = verify_kernel_identity(phi, probes, {h}).max_relative_error;
  const double e2 = verify_kernel_identity(phi, probes, {h / 2.0}).max_relative_error;
  INFO("errors " << e1 << " " << e2);
  CHECK(e1 / e2 >= 3.0);

  // Far from supp f both sides vanish.
  const std::vector<Vec2> far{{5.0, 3.0}};
  const auto f = verify_kernel_identity(phi, far);
  CHECK(f.targets[0] == 0.0);
  CHECK(std::abs(f.integrals[0]) <= 1e-6);

  // Independent check of the integral at an interior probe.
  const Vec2 x{0.3, -0.2};
  const double rho = phi.support().radius;
  const double ref = oracle::gk(
      [&](double th) {
        const double c = std::cos(th), s = std::sin(th);
        const double b = x.x * c + x.y * s, hi = -b + std::sqrt(b * b - (norm2(x) - rho * rho));
        return oracle::gk([&](double r) { return r > 0 ? -std::log(r) * phi.laplacian({x.x + r * c, x.y + r * s}) * r : 0.0; },
                          0.0, hi, 1e-12);
      },
      0.0, 2.0 * oracle::pi, 1e-11);
  CHECK(ref == Approx(-two_pi * phi.value(x)).epsilon(1e-8));
}

TEST_CASE("term II is second order", "[transport]") {
  const double omega = 3.0;
  const std::size_t n = 8;
  for (const auto* mu : {&uniform(), &variable()}) {
    const TestFunction phi = bump(*mu);
    const auto r = verify_term_two(phi, *mu, omega, n, default_ladder(omega, n));
    INFO("order " << r.fit.order);
    CHECK(r.pass);
    CHECK(r.fit.order >= 1.9);
    // Leading term π ε²/ω² ∫|∇φ|².
    CHECK(r.energies.back() == Approx(r.leading).epsilon(1e-3));
  }
  const double e = 1e-4 * 3.0 * 8.0;
  CHECK(pi * e * e / 9.0 * phi_integrals(bump(uniform()), uniform()).dirichlet ==
        Approx(pi * e * e / 9.0 * bump_dirichlet).epsilon(1e-10));
}

TEST_CASE("anisotropy under transport", "[transport][slow]") {
  const double omega = 3.0;
  const std::size_t n = 8;
  const TestFunction phi = bump(uniform());
  std::vector<double> ladder;
  for (double t : {1e-3, 3e-4, 1e-4}) ladder.push_back(t * omega * double(n));
  // The claim is an upper bound, so per-configuration ratios spread widely;
  // the regression constant is their sup, which must reproduce across seed sets.
  // Configurations whose η ladder is not monotone come back flagged and are
  // left out of the sup; they must stay rare.
  auto sup_ratio = [&](std::uint64_t first) {
    double sup = 0.0;
    int flagged = 0;
    for (std::uint64_t seed = first; seed < first + 20; ++seed) {
      const PointConfiguration cfg(random_points(n, 0.8, 500 + seed));
      const auto r = verify_anisotropy_transport(cfg, uniform(), phi, omega, ladder);
      INFO("seed " << seed << " slope " << r.slope << " shape " << r.shape);
      CHECK(std::isfinite(r.ratio));
      if (r.flagged) {
        CHECK_FALSE(r.pass);
        ++flagged;
        continue;
      }
      CHECK(r.symmetric);
      CHECK(r.pass);
      sup = std::max(sup, r.ratio);
    }
    CHECK(flagged <= 2);
    return sup;
  };
  const double a = sup_ratio(0), b = sup_ratio(20);
  INFO("sup ratios " << a << " " << b);
  CHECK(a > 0.0);
  CHECK(std::max(a, b) <= 3.0 * std::min(a, b));
}
