#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "coulomb/io.hpp"
#include "coulomb/measure.hpp"
#include "coulomb/sampler.hpp"
#include "coulomb/test_function.hpp"

namespace coulomb {

struct LabConfig {
  struct Measure {
    std::string preset = "uniform_disk";
    double c_min = 0.0;  // required lower bound on the density over Σ
  } measure;

  TestFunctionSpec phi;
  double beta = 2.0;
  std::size_t n = 256;
  std::uint64_t seed = 1;

  struct Sampler {
    std::size_t chains = 4;
    std::size_t samples_per_chain = 1000;
    std::optional<std::size_t> burn_in_sweeps;
    std::size_t thinning_sweeps = 1;
    double sigma_prop = 0.0;
    bool langevin = false;
    bool bias_to_support = false;
    std::size_t snapshot_every = 0;
    unsigned max_threads = 0;
  } sampler;

  struct CharFn {
    double omega_max = 20.0;
    std::size_t points = 201;
  } charfn;

  struct LocalClt {
    std::vector<double> k{1.0, 2.0, 4.0};
    std::vector<double> centers_in_sd{0.0, 1.0};  // a = c σ_Z
  } local_clt;

  struct Bounds {
    std::vector<std::size_t> n{64, 128, 256, 512};
    std::vector<double> radii{0.15, 0.3};
    std::size_t chains = 2;
    std::size_t snapshots_per_chain = 4;
    std::size_t samples_per_chain = 400;
    bool anisotropy = true;
  } bounds;

  struct Ode {
    double omega_max = 10.0;
    double step = 1e-3;
  } ode;

  struct Claims {
    std::size_t n = 8;
    double omega = 3.0;
    std::size_t seeds = 20;
    unsigned max_threads = 1;
  } claims;
};

namespace detail {

template <class T>
void get_to(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

inline nlohmann::json vec2_json(Vec2 v) { return nlohmann::json::array({v.x, v.y}); }

inline Vec2 vec2_from(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 2) throw std::invalid_argument("a point must be a two-element array");
  return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace detail

inline nlohmann::json to_json(const LabConfig& c, bool with_seed = true) {
  nlohmann::json j;
  j["measure"] = {{"preset", c.measure.preset}, {"c_min", c.measure.c_min}};
  j["phi"] = {{"center", detail::vec2_json(c.phi.center)}, {"scale", c.phi.scale}, {"base_radius", c.phi.base_radius},
              {"amplitude", c.phi.amplitude}, {"d_min", c.phi.d_min}, {"mesoscopic", c.phi.mesoscopic}};
  j["beta"] = c.beta;
  j["n"] = c.n;
  if (with_seed) j["seed"] = c.seed;
  const auto& s = c.sampler;
  j["sampler"] = {{"chains", s.chains},           {"samples_per_chain", s.samples_per_chain},
                  {"thinning_sweeps", s.thinning_sweeps}, {"sigma_prop", s.sigma_prop},
                  {"langevin", s.langevin},       {"bias_to_support", s.bias_to_support},
                  {"snapshot_every", s.snapshot_every}};
  j["sampler"]["burn_in_sweeps"] = s.burn_in_sweeps ? nlohmann::json(*s.burn_in_sweeps) : nlohmann::json(nullptr);
  j["charfn"] = {{"omega_max", c.charfn.omega_max}, {"points", c.charfn.points}};
  j["local_clt"] = {{"k", c.local_clt.k}, {"centers_in_sd", c.local_clt.centers_in_sd}};
  j["bounds"] = {{"n", c.bounds.n},
                 {"radii", c.bounds.radii},
                 {"chains", c.bounds.chains},
                 {"snapshots_per_chain", c.bounds.snapshots_per_chain},
                 {"samples_per_chain", c.bounds.samples_per_chain},
                 {"anisotropy", c.bounds.anisotropy}};
  j["ode"] = {{"omega_max", c.ode.omega_max}, {"step", c.ode.step}};
  j["claims"] = {{"n", c.claims.n}, {"omega", c.claims.omega}, {"seeds", c.claims.seeds}};
  return j;
}

inline LabConfig config_from_json(const nlohmann::json& j) {
  using detail::get_to;
  LabConfig c;
  if (j.contains("measure")) {
    const auto& m = j.at("measure");
    if (m.is_string()) {
      c.measure.preset = m.get<std::string>();
    } else {
      get_to(m, "preset", c.measure.preset);
      get_to(m, "c_min", c.measure.c_min);
    }
  }
  if (j.contains("phi")) {
    const auto& p = j.at("phi");
    if (p.contains("center")) c.phi.center = detail::vec2_from(p.at("center"));
    get_to(p, "scale", c.phi.scale);
    get_to(p, "base_radius", c.phi.base_radius);
    get_to(p, "amplitude", c.phi.amplitude);
    get_to(p, "d_min", c.phi.d_min);
    if (p.contains("mesoscopic"))
      p.at("mesoscopic").get_to(c.phi.mesoscopic);
    else
      c.phi.mesoscopic = c.phi.scale != 1.0;
  }
  get_to(j, "beta", c.beta);
  get_to(j, "n", c.n);
  get_to(j, "seed", c.seed);
  if (j.contains("sampler")) {
    const auto& s = j.at("sampler");
    get_to(s, "chains", c.sampler.chains);
    get_to(s, "samples_per_chain", c.sampler.samples_per_chain);
    if (s.contains("burn_in_sweeps") && !s.at("burn_in_sweeps").is_null())
      c.sampler.burn_in_sweeps = s.at("burn_in_sweeps").get<std::size_t>();
    get_to(s, "thinning_sweeps", c.sampler.thinning_sweeps);
    get_to(s, "sigma_prop", c.sampler.sigma_prop);
    get_to(s, "langevin", c.sampler.langevin);
    get_to(s, "bias_to_support", c.sampler.bias_to_support);
    get_to(s, "snapshot_every", c.sampler.snapshot_every);
    get_to(s, "max_threads", c.sampler.max_threads);
  }
  if (j.contains("charfn")) {
    get_to(j.at("charfn"), "omega_max", c.charfn.omega_max);
    get_to(j.at("charfn"), "points", c.charfn.points);
  }
  if (j.contains("local_clt")) {
    get_to(j.at("local_clt"), "k", c.local_clt.k);
    get_to(j.at("local_clt"), "centers_in_sd", c.local_clt.centers_in_sd);
  }
  if (j.contains("bounds")) {
    const auto& b = j.at("bounds");
    get_to(b, "n", c.bounds.n);
    get_to(b, "radii", c.bounds.radii);
    get_to(b, "chains", c.bounds.chains);
    get_to(b, "snapshots_per_chain", c.bounds.snapshots_per_chain);
    get_to(b, "samples_per_chain", c.bounds.samples_per_chain);
    get_to(b, "anisotropy", c.bounds.anisotropy);
  }
  if (j.contains("ode")) {
    get_to(j.at("ode"), "omega_max", c.ode.omega_max);
    get_to(j.at("ode"), "step", c.ode.step);
  }
  if (j.contains("claims")) {
    const auto& k = j.at("claims");
    get_to(k, "n", c.claims.n);
    get_to(k, "omega", c.claims.omega);
    get_to(k, "seeds", c.claims.seeds);
    get_to(k, "max_threads", c.claims.max_threads);
  }
  if (!(c.beta > 0.0)) throw std::invalid_argument("beta must be positive");
  if (c.n < 2) throw std::invalid_argument("n must be at least 2");
  if (c.sampler.chains == 0) throw std::invalid_argument("sampler.chains must be positive");
  if (c.sampler.thinning_sweeps == 0) throw std::invalid_argument("sampler.thinning_sweeps must be positive");
  if (c.charfn.points < 2 || !(c.charfn.omega_max > 0.0)) throw std::invalid_argument("bad charfn grid");
  if (!(c.ode.step > 0.0)) throw std::invalid_argument("ode.step must be positive");
  return c;
}

inline LabConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  return config_from_json(nlohmann::json::parse(in, nullptr, true, true));
}

// Hash of the resolved configuration without the seed, so files from one
// config under different seeds share a hash.
inline std::string config_hash(const LabConfig& c) { return io::hex64(io::fnv1a64(to_json(c, false).dump())); }

// --seed flag, then the SEED environment variable, then the config.
inline std::uint64_t resolve_seed(const LabConfig& c, std::optional<std::uint64_t> flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("SEED"); env && *env) return std::stoull(env);
  return c.seed;
}

inline EquilibriumMeasure make_measure(const LabConfig& c) {
  EquilibriumMeasure mu = EquilibriumMeasure::from_name(c.measure.preset);
  if (mu.c_min() < c.measure.c_min) throw std::invalid_argument("measure density falls below measure.c_min");
  return mu;
}

inline TestFunction make_phi(const LabConfig& c, const EquilibriumMeasure& mu) { return TestFunction(c.phi, mu); }

inline SamplerOptions sampler_options(const LabConfig& c, const TestFunction& phi) {
  SamplerOptions o;
  o.beta = c.beta;
  o.sigma_prop = c.sampler.sigma_prop;
  o.burn_in_sweeps = c.sampler.burn_in_sweeps;
  o.thinning_moves = c.sampler.thinning_sweeps * c.n;
  o.langevin = c.sampler.langevin;
  if (c.sampler.bias_to_support) o.bias_region = phi.support();
  return o;
}

}  // namespace coulomb
