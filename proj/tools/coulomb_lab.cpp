// coulomb-lab: sampling, transport checks and CLT probes from a JSON config.

#include <CLI11/CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "coulomb/coulomb.hpp"

namespace fs = std::filesystem;
using namespace coulomb;
using nlohmann::json;

namespace {

struct Context {
  LabConfig cfg;
  EquilibriumMeasure mu;
  TestFunction phi;
  io::Metadata meta;
};

Context load(const std::string& path, std::optional<std::uint64_t> seed) {
  LabConfig cfg = load_config(path);
  cfg.seed = resolve_seed(cfg, seed);
  EquilibriumMeasure mu = make_measure(cfg);
  TestFunction phi = make_phi(cfg, mu);
  io::Metadata meta{config_hash(cfg), cfg.seed};
  return {std::move(cfg), std::move(mu), std::move(phi), meta};
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
}

fs::path out_dir(const std::string& dir) {
  fs::create_directories(dir);
  return dir;
}

json fit_json(const OrderFit& f) {
  return {{"order", f.order}, {"r_squared", f.r_squared}, {"degenerate", f.degenerate}};
}

json report_json(const ExpansionReport& r) {
  return {{"id", r.id},
          {"ladder", r.ladder},
          {"derivatives", r.derivatives},
          {"residuals", r.second_differences},
          {"curvatures", r.curvatures},
          {"measured", r.measured},
          {"predicted", r.predicted},
          {"mismatch", r.mismatch},
          {"tolerance", r.tolerance},
          {"fit", fit_json(r.fit)},
          {"flat", r.flat},
          {"flagged", r.flagged},
          {"pass", r.pass},
          {"note", r.note}};
}

// Fluctuation series per chain with the ESS summed over chains.
struct Series {
  std::vector<std::vector<double>> chains;
  std::vector<double> pooled;
  double ess = 0.0;
};

Series read_series(const std::string& path, const io::Metadata& expect) {
  io::Metadata meta;
  Series s;
  s.chains = io::fluctuation_series(io::read_samples(path, &meta));
  if (meta.config_hash != expect.config_hash)
    std::cerr << "warning: " << path << " was written by config " << meta.config_hash << ", not "
              << expect.config_hash << '\n';
  for (const auto& c : s.chains) {
    s.pooled.insert(s.pooled.end(), c.begin(), c.end());
    if (c.size() >= 10) s.ess += effective_sample_size(c);
  }
  if (s.pooled.empty()) throw std::runtime_error(path + " holds no samples");
  return s;
}

int cmd_sample(const Context& c, const std::string& out) {
  const fs::path dir = out_dir(out);
  const ConfiningPotential zeta(c.mu.support());
  auto ens = ChainEnsemble::create(c.mu, zeta, c.cfg.n, c.cfg.sampler.chains, c.cfg.seed, sampler_options(c.cfg, c.phi));
  RunOptions run;
  run.snapshot_every = c.cfg.sampler.snapshot_every;
  run.max_threads = c.cfg.sampler.max_threads;
  const auto outputs = run_chain(ens, c.phi, c.cfg.sampler.samples_per_chain, run);
  io::write_samples(dir / "samples.csv", outputs, c.meta);
  if (run.snapshot_every) io::write_snapshots(dir / "snapshots.csv", outputs, c.meta);
  json diag;
  diag["config_hash"] = c.meta.config_hash;
  diag["seed"] = c.meta.seed;
  double total = 0.0;
  for (const auto& o : outputs) {
    const auto f = o.fluctuations();
    const double ess = f.size() >= 10 ? effective_sample_size(f) : double(f.size());
    total += ess;
    diag["chains"].push_back({{"acceptance", o.acceptance_rate()},
                              {"ess", ess},
                              {"samples", f.size()},
                              {"max_cache_drift", o.max_cache_drift}});
  }
  diag["ess_total"] = total;
  write_json(dir / "diagnostics.json", diag);
  std::cout << "wrote " << (dir / "samples.csv").string() << " (ESS " << total << ")\n";
  return 0;
}

int cmd_anisotropy(const Context& c, const std::string& snapshot, std::optional<std::size_t> chain,
                   std::optional<std::size_t> sweep, const std::string& out) {
  const auto snaps = io::read_snapshots(snapshot);
  const Snapshot* pick = nullptr;
  for (const auto& s : snaps)
    if ((!chain || s.chain == *chain) && (!sweep || s.sweep == *sweep)) {
      pick = &s;
      break;
    }
  if (!pick) throw std::runtime_error("no snapshot matches the selection");
  const PointConfiguration config(pick->points);
  const AnisotropyResult r = anisotropy(config, c.mu, GradientOverDensity(c.phi, c.mu));
  const json j = {{"ani", r.ani},
                  {"A", r.A},
                  {"error_estimate", r.error_estimate},
                  {"converged", r.converged},
                  {"chain", pick->chain},
                  {"sweep", pick->sweep}};
  if (out.empty())
    std::cout << j.dump(2) << '\n';
  else
    write_json(out, j);
  return 0;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

int cmd_verify(const Context& c, const std::string& claims, std::optional<std::size_t> seeds, const std::string& out) {
  const fs::path dir = out_dir(out);
  const std::size_t k = seeds.value_or(c.cfg.claims.seeds);
  const std::size_t n = c.cfg.claims.n;
  const double omega = c.cfg.claims.omega;
  ExpansionOptions opt;
  opt.max_threads = c.cfg.claims.max_threads;
  const double ell = c.phi.scale();
  const auto ladder = default_ladder(omega, n, ell);
  auto config_for = [&](std::size_t s) {
    Rng rng = make_rng(c.cfg.seed, s);
    return PointConfiguration(sample_equilibrium(c.mu, n, rng));
  };
  json report;
  report["config_hash"] = c.meta.config_hash;
  report["seed"] = c.meta.seed;
  bool all = true;
  for (const std::string& id : split_list(claims)) {
    json entry;
    bool pass = true;
    if (id == "termAA" || id == "termBB" || id == "termCC") {
      for (std::size_t s = 0; s < k; ++s) {
        const PointConfiguration x = config_for(s);
        const ExpansionReport r = id == "termAA"   ? verify_energy_expansion(x, c.mu, c.phi, omega, ladder, opt)
                                  : id == "termBB" ? verify_fluctuation_expansion(x, c.mu, c.phi, omega, ladder, opt)
                                                   : verify_jacobian_expansion(x, c.mu, c.phi, omega, ladder, opt);
        json e = report_json(r);
        e["config_index"] = s;
        entry["runs"].push_back(e);
        pass = pass && r.pass;
      }
    } else if (id == "identity") {
      const Disk s = c.phi.support();
      const std::vector<Vec2> probes{s.center, s.center + Vec2{0.5 * s.radius, 0.0},
                                     s.center + Vec2{0.0, 0.9 * s.radius}};
      const KernelIdentityResult fine = verify_kernel_identity(c.phi, probes);
      KernelIdentityOptions coarse_opt;
      coarse_opt.h = s.radius / 32.0;
      const KernelIdentityResult coarse = verify_kernel_identity(c.phi, probes, coarse_opt);
      entry["integrals"] = fine.integrals;
      entry["targets"] = fine.targets;
      entry["relative_error"] = fine.max_relative_error;
      entry["halving_ratio"] = coarse.max_relative_error / fine.max_relative_error;
      pass = fine.max_relative_error <= 1e-3 && coarse.max_relative_error / fine.max_relative_error >= 3.0;
    } else if (id == "termII") {
      const TermTwoReport r = verify_term_two(c.phi, c.mu, omega, n, ladder, opt.max_threads);
      entry = {{"ladder", r.ladder}, {"energies", r.energies}, {"fit", fit_json(r.fit)}, {"leading", r.leading}};
      pass = r.pass;
    } else if (id == "changeani") {
      std::vector<double> ani_ladder;
      for (double t : {1e-3, 3e-4, 1e-4}) ani_ladder.push_back(t * omega * double(n));
      double sup = 0.0;
      for (std::size_t s = 0; s < k; ++s) {
        const AnisotropyTransportReport r =
            verify_anisotropy_transport(config_for(s), c.mu, c.phi, omega, ani_ladder, opt);
        entry["runs"].push_back({{"config_index", s},
                                 {"ladder", r.ladder},
                                 {"residuals_plus", r.plus},
                                 {"residuals_minus", r.minus},
                                 {"slope", r.slope},
                                 {"shape", r.shape},
                                 {"ratio", r.ratio},
                                 {"symmetric", r.symmetric},
                                 {"flagged", r.flagged},
                                 {"pass", r.pass}});
        if (!r.flagged) sup = std::max(sup, r.ratio);
        pass = pass && (r.pass || r.flagged);
      }
      entry["sup_ratio"] = sup;
      entry["constant"] = anisotropy_transport_constant;
    } else {
      throw std::runtime_error("unknown claim: " + id);
    }
    entry["pass"] = pass;
    report["claims"][id] = entry;
    all = all && pass;
    std::cout << id << ": " << (pass ? "pass" : "FAIL") << '\n';
  }
  write_json(dir / "expansion_report.json", report);
  return all ? 0 : 1;
}

int cmd_charfn(const Context& c, const std::string& samples, const std::string& out) {
  const fs::path dir = out_dir(out);
  const Series s = read_series(samples, c.meta);
  const auto grid = uniform_grid(0.0, c.cfg.charfn.omega_max, c.cfg.charfn.points);
  const CharFnEstimate e = empirical_charfn(s.pooled, grid, s.ess);
  io::CsvWriter w(dir / "charfn.csv", c.meta, {"omega", "re", "im", "stderr"});
  for (std::size_t k = 0; k < grid.size(); ++k) w.row() << grid[k] << e.value[k].real() << e.value[k].imag() << e.stderr_[k];
  const DecayFit d = decay_probe(e, c.phi.scale(), c.cfg.n);
  write_json(dir / "decay.json", {{"config_hash", c.meta.config_hash},
                                  {"seed", c.meta.seed},
                                  {"status", to_string(d.status)},
                                  {"slope", d.slope},
                                  {"r_squared", d.r_squared},
                                  {"window", {d.window_lo, d.window_hi}},
                                  {"floor", d.floor},
                                  {"floor_raw", d.floor_raw},
                                  {"floor_stderr", d.floor_stderr},
                                  {"bound_term", d.bound_term},
                                  {"ess", e.ess}});
  std::cout << "decay: " << to_string(d.status) << ", slope " << d.slope << '\n';
  return 0;
}

int cmd_local_clt(const Context& c, const std::string& samples, const std::string& out) {
  const fs::path dir = out_dir(out);
  const Series s = read_series(samples, c.meta);
  const GaussianLimit g = theoretical_limit(c.phi, c.mu, c.cfg.beta);
  const double ell = c.phi.scale();
  const auto eps = local_clt_eps_ladder(c.cfg.n, ell, c.cfg.local_clt.k);
  io::CsvWriter w(dir / "localclt.csv", c.meta,
                  {"a", "eps", "p_emp", "p_gauss", "ratio", "ci_lo", "ci_hi", "hits", "insufficient", "in_bracket"});
  for (double a_sd : c.cfg.local_clt.centers_in_sd) {
    const double a = a_sd * std::sqrt(g.variance);
    for (const auto& r : local_clt_probe(s.pooled, s.ess, g, a, eps, c.cfg.n, ell))
      w.row() << a << r.eps << r.p_emp << r.p_gauss << r.ratio << r.ci_lo << r.ci_hi << r.hits
              << int(r.insufficient) << int(r.in_bracket);
  }
  return 0;
}

int cmd_bounds(const Context& c, const std::string& out) {
  const fs::path dir = out_dir(out);
  const ConfiningPotential zeta(c.mu.support());
  std::vector<AprioriInput> inputs;
  const auto& b = c.cfg.bounds;
  for (std::size_t n : b.n) {
    LabConfig local = c.cfg;
    local.n = n;
    auto ens = ChainEnsemble::create(c.mu, zeta, n, b.chains, c.cfg.seed + n, sampler_options(local, c.phi));
    RunOptions run;
    run.snapshot_every = std::max<std::size_t>(1, b.samples_per_chain / std::max<std::size_t>(1, b.snapshots_per_chain));
    run.max_threads = c.cfg.sampler.max_threads;
    const auto outputs = run_chain(ens, c.phi, b.samples_per_chain, run);
    AprioriInput in;
    in.n = n;
    in.fluctuations = pooled_fluctuations(outputs);
    for (const auto& o : outputs)
      for (const auto& s : o.snapshots) in.snapshots.emplace_back(s.points);
    inputs.push_back(std::move(in));
  }
  AprioriOptions opt;
  opt.radii = b.radii;
  opt.anisotropy = b.anisotropy;
  const AprioriReport rep = apriori_bound_probe(inputs, c.mu, opt);
  io::CsvWriter w(dir / "bounds.csv", c.meta,
                  {"n", "r", "n_r2", "ele", "ele_stderr", "points", "points_stderr", "ani", "ani_stderr", "l1", "l2",
                   "snapshots"});
  for (const auto& row : rep.rows) {
    NormRow nr;
    for (const auto& x : rep.norms)
      if (x.n == row.n) nr = x;
    w.row() << row.n << row.r << row.n_r2 << row.ele << row.ele_stderr << row.points << row.points_stderr << row.ani
            << row.ani_stderr << nr.l1 << nr.l2 << row.snapshots;
  }
  write_json(dir / "bounds.json", {{"config_hash", c.meta.config_hash},
                                   {"seed", c.meta.seed},
                                   {"ele_slope", fit_json(rep.ele)},
                                   {"points_slope", fit_json(rep.points)},
                                   {"ani_slope", fit_json(rep.ani)},
                                   {"l1_spread", rep.l1_spread},
                                   {"l2_spread", rep.l2_spread},
                                   {"n_range", rep.n_range}});
  std::cout << "Ele slope " << rep.ele.order << ", Points slope " << rep.points.order << '\n';
  return 0;
}

int cmd_ode(const Context& c, const std::string& out) {
  const fs::path dir = out_dir(out);
  const GaussianLimit g = theoretical_limit(c.phi, c.mu, c.cfg.beta);
  const auto points = std::size_t(std::llround(c.cfg.ode.omega_max / c.cfg.ode.step)) + 1;
  const auto grid = uniform_grid(0.0, c.cfg.ode.omega_max, points);
  const OdeCurve curve = homogeneous_ode_solution(g, grid, c.cfg.ode.step);
  io::CsvWriter w(dir / "ode.csv", c.meta, {"omega", "re", "im", "closed_re", "closed_im", "abs_error"});
  double worst = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const Complex f = gaussian_charfn(g, grid[k]);
    const double err = std::abs(curve.value[k] - f);
    worst = std::max(worst, err);
    w.row() << grid[k] << curve.value[k].real() << curve.value[k].imag() << f.real() << f.imag() << err;
  }
  std::cout << "max abs error " << worst << '\n';
  return worst <= 1e-6 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-dimensional Coulomb gas lab"};
  app.require_subcommand(1);

  std::string config, out = ".", samples, snapshot, claims = "termAA,termBB,termCC,identity,changeani";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> seeds, chain, sweep;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config, "JSON configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Seed (overrides SEED and the config)");
  };

  auto* sample = app.add_subcommand("sample", "Run the Metropolis ensemble and write samples.csv");
  common(sample);
  sample->add_option("--out", out, "Output directory");

  auto* ani = app.add_subcommand("anisotropy", "Ani and A for one snapshot");
  common(ani);
  ani->add_option("--snapshot", snapshot, "snapshots.csv or an x,y table")->required()->check(CLI::ExistingFile);
  ani->add_option("--chain", chain);
  ani->add_option("--sweep", sweep);
  std::string ani_out;
  ani->add_option("--out", ani_out, "JSON file (default stdout)");

  auto* verify = app.add_subcommand("verify-claims", "Finite-difference checks of the transport expansions");
  common(verify);
  verify->add_option("--claims", claims, "Comma list of termAA,termBB,termCC,identity,termII,changeani");
  verify->add_option("--seeds", seeds, "Number of seeded configurations");
  verify->add_option("--out", out, "Output directory");

  auto* charfn = app.add_subcommand("charfn", "Empirical characteristic function and decay fit");
  auto* local = app.add_subcommand("local-clt", "Local CLT window ratios");
  for (auto* sub : {charfn, local}) {
    common(sub);
    sub->add_option("--samples", samples, "samples.csv")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out, "Output directory");
  }

  auto* bounds = app.add_subcommand("bounds", "A priori scaling of Ele, Points and Ani");
  common(bounds);
  bounds->add_option("--out", out, "Output directory");

  auto* ode = app.add_subcommand("ode-check", "Homogeneous ODE against the Gaussian closed form");
  common(ode);
  ode->add_option("--out", out, "Output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    const Context c = load(config, seed);
    if (*sample) return cmd_sample(c, out);
    if (*ani) return cmd_anisotropy(c, snapshot, chain, sweep, ani_out);
    if (*verify) return cmd_verify(c, claims, seeds, out);
    if (*charfn) return cmd_charfn(c, samples, out);
    if (*local) return cmd_local_clt(c, samples, out);
    if (*bounds) return cmd_bounds(c, out);
    if (*ode) return cmd_ode(c, out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
