// SPDX-License-Identifier: Apache-2.0
//
// JSON experiment configuration. Schema (all keys optional, defaults are the
// reference scenario):
//
//   {
//     "dims":   {"m_t": 2, "m_r": 2, "m_u": 2, "p": 8, "n": 3, "k": 2, "l": 1},
//     "sensing": {"angle_mode": "fixed" | "uniform",
//                 "aoa_deg": [15, 27], "aod_deg": [-37, 65],
//                 "sector_deg": [-60, 60], "gamma_std": 1.0},
//     "comm":   {"aoa_deg": [78], "aod_deg": [25], "gains": [[1.0, 0.0]]},
//     "constellation": 4,
//     "es_n0_grid": [0, 5, 10, 15, 20, 25, 30],
//     "sweep":  {"variable": "es_n0" | "n" | "p" | "m_u", "values": [...]},
//     "trials": 100,
//     "base_seed": 1,
//     "als":    {"init": "random" | "algebraic", "max_iters": 1000, "tol": 1e-6, "rcond": 1e-12,
//                "init_seed": 0, "n_restarts": 1},
//     "outputs": "results",
//     "noiseless": false
//   }
//
// For non-SNR sweeps "values" holds the swept dimension and es_n0_grid must
// hold exactly one entry, the fixed operating point.
// ------------------------------------------------------------------------

#include "isac/harness.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace isac {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::string& where, const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : obj.items())
    if (!allowed.contains(key)) throw ConfigError(where + ": unknown key '" + key + "'");
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

std::size_t positive_count(const json& obj, const char* key, std::size_t fallback,
                           const std::string& where) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 1)
    throw ConfigError(where + "." + key + ": expected an integer >= 1");
  return v.get<std::size_t>();
}

}  // namespace

std::string to_string(SweepVar v) {
  switch (v) {
    case SweepVar::EsN0: return "es_n0";
    case SweepVar::N: return "n";
    case SweepVar::P: return "p";
    case SweepVar::MU: return "m_u";
  }
  return "?";
}

SweepVar parse_sweep_var(const std::string& name) {
  if (name == "es_n0") return SweepVar::EsN0;
  if (name == "n") return SweepVar::N;
  if (name == "p") return SweepVar::P;
  if (name == "m_u") return SweepVar::MU;
  throw ConfigError("unknown sweep variable '" + name + "' (expected es_n0, n, p or m_u)");
}

std::vector<double> ExperimentConfig::grid() const {
  return sweep_var == SweepVar::EsN0 ? es_n0_grid : sweep_values;
}

Dims ExperimentConfig::dims_at(double sweep_value) const {
  Dims d = dims;
  const auto v = static_cast<std::size_t>(std::llround(sweep_value));
  switch (sweep_var) {
    case SweepVar::EsN0: break;
    case SweepVar::N: d.n = v; break;
    case SweepVar::P: d.p = v; break;
    case SweepVar::MU: d.m_u = v; break;
  }
  return d;
}

double ExperimentConfig::es_n0_at(double sweep_value) const {
  if (noiseless) return kNoiseless;
  return sweep_var == SweepVar::EsN0 ? sweep_value : es_n0_grid.front();
}

void validate(const ExperimentConfig& cfg) {
  if (cfg.trials < 1) throw ConfigError("trials must be >= 1");
  if (cfg.es_n0_grid.empty()) throw ConfigError("es_n0_grid must not be empty");
  if (!std::is_sorted(cfg.es_n0_grid.begin(), cfg.es_n0_grid.end()))
    throw ConfigError("es_n0_grid must be sorted ascending");
  if (cfg.sweep_var != SweepVar::EsN0) {
    if (cfg.es_n0_grid.size() != 1)
      throw ConfigError("a " + to_string(cfg.sweep_var) +
                        " sweep needs exactly one es_n0_grid entry (the operating point)");
    if (cfg.sweep_values.empty()) throw ConfigError("sweep.values must not be empty");
    if (!std::is_sorted(cfg.sweep_values.begin(), cfg.sweep_values.end()))
      throw ConfigError("sweep.values must be sorted ascending");
    for (double v : cfg.sweep_values)
      if (v < 1 || v != std::floor(v))
        throw ConfigError("sweep.values must be positive integers");
  }
  if (cfg.als.max_iters < 1) throw ConfigError("als.max_iters must be >= 1");
  if (!(cfg.als.tol > 0)) throw ConfigError("als.tol must be > 0");
  if (cfg.als.n_restarts < 1) throw ConfigError("als.n_restarts must be >= 1");
  if (!(cfg.gamma_std > 0)) throw ConfigError("sensing.gamma_std must be > 0");
  try {
    (void)Qam(cfg.constellation);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  const auto& ang = cfg.sensing_angles;
  if (ang.mode == AngleConfig::Mode::Fixed &&
      (ang.aoa_deg.size() != cfg.dims.k || ang.aod_deg.size() != cfg.dims.k))
    throw ConfigError("sensing.aoa_deg / aod_deg must list K = " + std::to_string(cfg.dims.k) +
                      " angles");
  if (ang.mode == AngleConfig::Mode::Uniform &&
      !(ang.sector_lo_deg > -90 && ang.sector_hi_deg < 90 && ang.sector_lo_deg < ang.sector_hi_deg))
    throw ConfigError("sensing.sector_deg must be an increasing pair inside (-90, 90)");
  if (cfg.comm_aoa_deg.size() != cfg.dims.l || cfg.comm_aod_deg.size() != cfg.dims.l ||
      cfg.comm_gains.size() != cfg.dims.l)
    throw ConfigError("comm.aoa_deg / aod_deg / gains must have L = " +
                      std::to_string(cfg.dims.l) + " entries");
  auto in_sector = [](double a) { return a > -90.0 && a < 90.0; };
  for (const auto* list : {&ang.aoa_deg, &ang.aod_deg, &cfg.comm_aoa_deg, &cfg.comm_aod_deg})
    for (double a : *list)
      if (!in_sector(a)) throw ConfigError("angle " + std::to_string(a) + " outside (-90, 90)");

  for (double v : cfg.grid()) {
    const Dims d = cfg.dims_at(v);
    const auto report = check_identifiability(d.m_r, d.m_t, d.p, d.n, d.k);
    if (!report.ok)
      throw ConfigError("sensing dimensions not identifiable at " + to_string(cfg.sweep_var) +
                        " = " + format_double(v) + ": " + report.describe());
    if (d.n < d.m_t)
      throw ConfigError("communication link needs N >= M_t (N = " + std::to_string(d.n) +
                        ", M_t = " + std::to_string(d.m_t) + ")");
    if (d.m_u < d.m_t)
      throw ConfigError("ZF benchmark needs M_u >= M_t (M_u = " + std::to_string(d.m_u) +
                        ", M_t = " + std::to_string(d.m_t) + ")");
  }
}

ExperimentConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  reject_unknown(root, "config",
                 {"dims", "sensing", "comm", "constellation", "es_n0_grid", "sweep", "trials",
                  "base_seed", "als", "outputs", "noiseless"});
  ExperimentConfig cfg;

  if (root.contains("dims")) {
    const json& d = root.at("dims");
    reject_unknown(d, "dims", {"m_t", "m_r", "m_u", "p", "n", "k", "l"});
    cfg.dims.m_t = positive_count(d, "m_t", cfg.dims.m_t, "dims");
    cfg.dims.m_r = positive_count(d, "m_r", cfg.dims.m_r, "dims");
    cfg.dims.m_u = positive_count(d, "m_u", cfg.dims.m_u, "dims");
    cfg.dims.p = positive_count(d, "p", cfg.dims.p, "dims");
    cfg.dims.n = positive_count(d, "n", cfg.dims.n, "dims");
    cfg.dims.k = positive_count(d, "k", cfg.dims.k, "dims");
    cfg.dims.l = positive_count(d, "l", cfg.dims.l, "dims");
  }
  if (root.contains("sensing")) {
    const json& s = root.at("sensing");
    reject_unknown(s, "sensing", {"angle_mode", "aoa_deg", "aod_deg", "sector_deg", "gamma_std"});
    std::string mode = "fixed";
    read(s, "angle_mode", mode, "sensing");
    if (mode == "fixed")
      cfg.sensing_angles.mode = AngleConfig::Mode::Fixed;
    else if (mode == "uniform")
      cfg.sensing_angles.mode = AngleConfig::Mode::Uniform;
    else
      throw ConfigError("sensing.angle_mode: expected 'fixed' or 'uniform'");
    read(s, "aoa_deg", cfg.sensing_angles.aoa_deg, "sensing");
    read(s, "aod_deg", cfg.sensing_angles.aod_deg, "sensing");
    if (s.contains("sector_deg")) {
      std::vector<double> sector;
      read(s, "sector_deg", sector, "sensing");
      if (sector.size() != 2) throw ConfigError("sensing.sector_deg: expected [lo, hi]");
      cfg.sensing_angles.sector_lo_deg = sector[0];
      cfg.sensing_angles.sector_hi_deg = sector[1];
    }
    read(s, "gamma_std", cfg.gamma_std, "sensing");
  }
  if (root.contains("comm")) {
    const json& c = root.at("comm");
    reject_unknown(c, "comm", {"aoa_deg", "aod_deg", "gains"});
    read(c, "aoa_deg", cfg.comm_aoa_deg, "comm");
    read(c, "aod_deg", cfg.comm_aod_deg, "comm");
    if (c.contains("gains")) {
      std::vector<std::vector<double>> g;
      read(c, "gains", g, "comm");
      cfg.comm_gains.clear();
      for (const auto& pair : g) {
        if (pair.size() != 2) throw ConfigError("comm.gains: each gain is [re, im]");
        cfg.comm_gains.emplace_back(pair[0], pair[1]);
      }
    }
  }
  read(root, "constellation", cfg.constellation, "config");
  read(root, "es_n0_grid", cfg.es_n0_grid, "config");
  if (root.contains("sweep")) {
    const json& s = root.at("sweep");
    reject_unknown(s, "sweep", {"variable", "values"});
    std::string var = "es_n0";
    read(s, "variable", var, "sweep");
    cfg.sweep_var = parse_sweep_var(var);
    read(s, "values", cfg.sweep_values, "sweep");
    if (cfg.sweep_var == SweepVar::EsN0 && !cfg.sweep_values.empty())
      throw ConfigError("sweep.values is not used for an es_n0 sweep; set es_n0_grid instead");
  }
  read(root, "trials", cfg.trials, "config");
  read(root, "base_seed", cfg.base_seed, "config");
  if (root.contains("als")) {
    const json& a = root.at("als");
    reject_unknown(a, "als", {"init", "max_iters", "tol", "rcond", "init_seed", "n_restarts"});
    if (a.contains("init")) {
      std::string init;
      read(a, "init", init, "als");
      if (init == "random")
        cfg.als.init = AlsInitMethod::Random;
      else if (init == "algebraic")
        cfg.als.init = AlsInitMethod::Algebraic;
      else
        throw ConfigError("als.init: expected 'random' or 'algebraic'");
    }
    read(a, "max_iters", cfg.als.max_iters, "als");
    read(a, "tol", cfg.als.tol, "als");
    read(a, "rcond", cfg.als.rcond, "als");
    read(a, "init_seed", cfg.als.init_seed, "als");
    read(a, "n_restarts", cfg.als.n_restarts, "als");
  }
  read(root, "outputs", cfg.outputs, "config");
  read(root, "noiseless", cfg.noiseless, "config");

  validate(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace isac
