// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "isac/harness.hpp"
#include "test_util.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

using namespace isac;
using isac::testing::random_cmat;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  for (std::string l; std::getline(is, l);)
    if (!l.empty()) out.push_back(l);
  return out;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  for (std::string c; std::getline(ss, c, sep);) out.push_back(c);
  return out;
}

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("isac_test_harness_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

ExperimentConfig small_config() {
  ExperimentConfig cfg;
  cfg.es_n0_grid = {10.0, 20.0};
  cfg.trials = 3;
  cfg.base_seed = 5;
  cfg.als.init = AlsInitMethod::Algebraic;
  return cfg;
}

}  // namespace

TEST_CASE("nmse") {
  std::mt19937_64 rng(1);
  CMat x = random_cmat(3, 4, rng);
  CHECK(nmse(x, x) == 0.0);
  CHECK(std::abs(nmse(2.0 * x, x) - 1.0) < 1e-15);
  CMat y = random_cmat(3, 4, rng);
  double num = 0, den = 0;
  for (Eigen::Index j = 0; j < 4; ++j)
    for (Eigen::Index i = 0; i < 3; ++i) {
      num += std::norm(y(i, j) - x(i, j));
      den += std::norm(x(i, j));
    }
  CHECK(std::abs(nmse(y, x) - num / den) < 1e-14);
  CHECK_THROWS(nmse(x, CMat::Zero(3, 4)));
  CHECK_THROWS(nmse(x, y.leftCols(2)));
}

TEST_CASE("ser") {
  Qam q(4);
  CMat s(4, 4);
  for (int i = 0; i < 16; ++i) s(i % 4, i / 4) = q.modulate(i % 4);
  CHECK(ser(s, s) == 0.0);
  CMat one = s;
  one(2, 3) = q.modulate((q.demodulate(s(2, 3)) + 1) % 4);
  CHECK(ser(one, s) == 1.0 / 16);
  CHECK(ser(-s, s) == 1.0);
  CHECK_THROWS(ser(s, s.leftCols(2)));
}

TEST_CASE("trial_seed") {
  CHECK(trial_seed(1, 10.0, 3) == trial_seed(1, 10.0, 3));
  CHECK(trial_seed(1, 10.0, 3) != trial_seed(1, 10.0, 4));
  CHECK(trial_seed(1, 10.0, 3) != trial_seed(1, 15.0, 3));
  CHECK(trial_seed(1, 10.0, 3) != trial_seed(2, 10.0, 3));
}

TEST_CASE("run_trial noiseless and deterministic") {
  ExperimentConfig cfg = small_config();
  cfg.noiseless = true;
  for (int t = 0; t < 5; ++t) {
    MetricsRecord r = run_trial(cfg, 0.0, t);
    CHECK(!r.hard_error);
    CHECK(r.converged);
    CHECK(r.nmse_ar < 1e-8);
    CHECK(r.nmse_at < 1e-8);
    CHECK(r.nmse_gamma < 1e-8);
    CHECK(r.nmse_h < 1e-8);
    CHECK(r.ser_krf == 0.0);
    CHECK(r.ser_zf == 0.0);
  }
  ExperimentConfig noisy = small_config();
  MetricsRecord a = run_trial(noisy, 10.0, 2), b = run_trial(noisy, 10.0, 2);
  CHECK(records_csv({a}) == records_csv({b}));
}

TEST_CASE("config parsing") {
  ExperimentConfig cfg = parse_config(R"({"trials": 7, "es_n0_grid": [0, 10],
      "als": {"init": "algebraic", "n_restarts": 2}})");
  CHECK(cfg.trials == 7);
  CHECK(cfg.es_n0_grid == std::vector<double>{0.0, 10.0});
  CHECK(cfg.als.init == AlsInitMethod::Algebraic);
  CHECK(cfg.als.n_restarts == 2);
  CHECK(cfg.dims.p == 8);

  CHECK_THROWS_AS(parse_config(R"({"trails": 7})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"als": {"tolerance": 1}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"trials": 0})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"es_n0_grid": [10, 0]})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"es_n0_grid": []})"), ConfigError);
  CHECK_THROWS_AS(parse_config("{not json"), ConfigError);

  try {
    parse_config(R"({"dims": {"k": 25}, "sensing": {"aoa_deg": [], "aod_deg": [], "angle_mode": "uniform"}})");
    FAIL("expected rejection");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("NP >= K") != std::string::npos);
  }

  ExperimentConfig sw = parse_config(R"({"sweep": {"variable": "p", "values": [4, 8]}, "es_n0_grid": [10]})");
  CHECK(sw.sweep_var == SweepVar::P);
  CHECK(sw.grid() == std::vector<double>{4.0, 8.0});
  CHECK(sw.dims_at(4.0).p == 4);
  CHECK(sw.es_n0_at(4.0) == 10.0);
}

TEST_CASE("run_sweep rows, summary and determinism") {
  ExperimentConfig cfg = small_config();
  SweepResult a = run_sweep(cfg, 1);
  SweepResult b = run_sweep(cfg, 3);
  CHECK(a.hard_errors == 0);
  CHECK(a.records.size() == 6);
  CHECK(a.summary.size() == 2);

  fs::path da = scratch("a"), db = scratch("b");
  write_sweep(a, da);
  write_sweep(b, db);
  CHECK(lines_of(slurp(da / "trials.csv")).size() == 1 + 6);
  CHECK(lines_of(slurp(da / "summary.csv")).size() == 1 + 2);
  CHECK(slurp(da / "trials.csv") == slurp(db / "trials.csv"));
  CHECK(slurp(da / "summary.csv") == slurp(db / "summary.csv"));
  fs::remove_all(db);
  write_sweep(run_sweep(cfg, 2), db);
  CHECK(slurp(da / "trials.csv") == slurp(db / "trials.csv"));

  // Summary rows against a direct recomputation from the trial rows.
  const auto& names = metric_names();
  for (std::size_t g = 0; g < 2; ++g) {
    const SummaryRow& row = a.summary[g];
    CHECK(row.sweep_value == cfg.es_n0_grid[g]);
    CHECK(row.trials == 3);
    for (std::size_t m = 0; m < names.size(); ++m) {
      std::vector<double> v;
      for (const auto& r : a.records)
        if (r.sweep_value == row.sweep_value) v.push_back(metric_value(r, names[m]));
      std::sort(v.begin(), v.end());
      double mean = (v[0] + v[1] + v[2]) / 3.0;
      CHECK(std::abs(row.median[m] - v[1]) <= 1e-12 * std::max(1.0, std::abs(v[1])));
      CHECK(std::abs(row.mean[m] - mean) <= 1e-12 * std::max(1.0, std::abs(mean)));
    }
  }
}

TEST_CASE("median_of and mean_of skip non-finite values") {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  CHECK(median_of({3.0, nan, 1.0, 2.0}) == 2.0);
  CHECK(median_of({4.0, 1.0}) == 2.5);
  CHECK(mean_of({1.0, nan, 3.0}) == 2.0);
  CHECK(std::isnan(mean_of({nan})));
}

TEST_CASE("emit_plot_data re-aggregation") {
  ExperimentConfig cfg = small_config();
  cfg.es_n0_grid = {0.0, 10.0, 20.0};
  cfg.trials = 4;
  fs::path dir = scratch("plot");
  fs::path csv = write_sweep(run_sweep(cfg, 1), dir);
  auto files = emit_plot_data(csv, dir / "plot");
  CHECK(files.size() == 2 * metric_names().size());

  // Independent aggregation straight from the CSV text.
  auto rows = lines_of(slurp(csv));
  auto header = split(rows[0], ',');
  auto col = std::find(header.begin(), header.end(), "ser_krf") - header.begin();
  std::map<double, std::vector<double>> by_value;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    auto cells = split(rows[i], ',');
    by_value[std::stod(cells[1])].push_back(std::stod(cells[std::size_t(col)]));
  }
  auto mean_lines = lines_of(slurp(dir / "plot" / "ser_krf_vs_es_n0_mean.dat"));
  REQUIRE(mean_lines.size() == 1 + 3);
  CHECK(mean_lines[0].rfind("#", 0) == 0);
  std::size_t i = 1;
  for (const auto& [value, v] : by_value) {
    auto cells = split(mean_lines[i++], ' ');
    double mean = 0;
    for (double x : v) mean += x;
    mean /= double(v.size());
    CHECK(std::stod(cells[0]) == value);
    CHECK(std::abs(std::stod(cells[1]) - mean) < 1e-12);
  }
  auto med_lines = lines_of(slurp(dir / "plot" / "ser_krf_vs_es_n0_median.dat"));
  i = 1;
  for (auto& [value, v] : by_value) {
    std::sort(v.begin(), v.end());
    double med = 0.5 * (v[1] + v[2]);
    CHECK(std::abs(std::stod(split(med_lines[i++], ' ')[1]) - med) < 1e-12);
  }
}

TEST_CASE("emit_plot_data with an all-NaN column and malformed input") {
  fs::path dir = scratch("nan");
  {
    std::ofstream f(dir / "t.csv");
    f << "sweep_var,sweep_value,trial,seed,converged,als_iters,nmse_ar,nmse_at,nmse_gamma,"
         "angle_rmse_deg,nmse_h,ser_krf,ser_zf\n"
      << "es_n0,0,0,1,0,3,nan,nan,nan,nan,0.5,0.25,0\n"
      << "es_n0,5,0,2,0,4,nan,nan,nan,nan,0.1,0.125,0\n";
  }
  emit_plot_data(dir / "t.csv", dir / "out");
  CHECK(lines_of(slurp(dir / "out" / "nmse_ar_vs_es_n0_mean.dat")).size() == 1);
  CHECK(lines_of(slurp(dir / "out" / "ser_krf_vs_es_n0_mean.dat")).size() == 3);

  {
    std::ofstream f(dir / "bad.csv");
    f << "a,b,c\n1,2,3\n";
  }
  CHECK_THROWS(emit_plot_data(dir / "bad.csv", dir / "out2"));
  CHECK_THROWS(emit_plot_data(dir / "missing.csv", dir / "out3"));
}
