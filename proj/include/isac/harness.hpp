// SPDX-License-Identifier: Apache-2.0
//
// Monte Carlo experiment driver: configuration, per-trial metrics, sweeps,
// CSV output and plot-ready aggregates.
// ------------------------------------------------------------------------
#pragma once

#include "isac/sensing_als.hpp"
#include "isac/signal_model.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace isac {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class SweepVar { EsN0, N, P, MU };

std::string to_string(SweepVar v);
SweepVar parse_sweep_var(const std::string& name);

struct Dims {
  std::size_t m_t = 2;
  std::size_t m_r = 2;
  std::size_t m_u = 2;
  std::size_t p = 8;
  std::size_t n = 3;
  std::size_t k = 2;
  std::size_t l = 1;
};

struct ExperimentConfig {
  Dims dims;
  AngleConfig sensing_angles{AngleConfig::Mode::Fixed, {15.0, 27.0}, {-37.0, 65.0}, -60.0, 60.0};
  double gamma_std = 1.0;
  std::vector<double> comm_aoa_deg{78.0};
  std::vector<double> comm_aod_deg{25.0};
  std::vector<cdouble> comm_gains{cdouble(1.0, 0.0)};
  int constellation = 4;
  std::vector<double> es_n0_grid{0, 5, 10, 15, 20, 25, 30};
  SweepVar sweep_var = SweepVar::EsN0;
  std::vector<double> sweep_values;  // only for N / P / M_u sweeps
  int trials = 100;
  std::uint64_t base_seed = 1;
  AlsConfig als;
  std::string outputs = "results";
  bool noiseless = false;

  /// The sweep grid: es_n0_grid for an SNR sweep, sweep_values otherwise.
  std::vector<double> grid() const;
  Dims dims_at(double sweep_value) const;
  double es_n0_at(double sweep_value) const;
};

/// Throws ConfigError naming the first problem (violated inequality included).
void validate(const ExperimentConfig& cfg);

/// JSON config; unknown keys are rejected. Validated before returning.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

struct MetricsRecord {
  SweepVar sweep_var = SweepVar::EsN0;
  double sweep_value = 0.0;
  int trial = 0;
  std::uint64_t seed = 0;
  bool converged = false;
  int als_iters = 0;
  double nmse_ar = 0.0;
  double nmse_at = 0.0;
  double nmse_gamma = 0.0;
  double angle_rmse_deg = 0.0;
  double nmse_h = 0.0;
  double ser_krf = 0.0;
  double ser_zf = 0.0;
  // Not serialized.
  double angle_max_err_deg = 0.0;
  double final_reconstruction_error = 0.0;
  bool hard_error = false;
  std::string error;
};

/// ||x_hat - x_true||_F^2 / ||x_true||_F^2
double nmse(const CMat& x_hat, const CMat& x_true);

/// Fraction of entries differing by more than 1e-9.
double ser(const CMat& s_hat, const CMat& s_true);

std::uint64_t trial_seed(std::uint64_t base_seed, double sweep_value, int trial);

MetricsRecord run_trial(const ExperimentConfig& cfg, double sweep_value, int trial);

/// Metric columns of the trial CSV, in order.
const std::vector<std::string>& metric_names();
double metric_value(const MetricsRecord& r, const std::string& name);

struct SummaryRow {
  double sweep_value = 0.0;
  int trials = 0;
  double converged_fraction = 0.0;
  std::vector<double> median;  // per metric_names()
  std::vector<double> mean;
};

struct SweepResult {
  SweepVar sweep_var = SweepVar::EsN0;
  std::vector<MetricsRecord> records;  // ordered by (grid index, trial)
  std::vector<SummaryRow> summary;
  int hard_errors = 0;
};

/// Median / mean over finite values; NaN when none.
double median_of(std::vector<double> v);
double mean_of(const std::vector<double>& v);

std::vector<SummaryRow> summarize(const std::vector<MetricsRecord>& records,
                                  const std::vector<double>& grid);

/// threads == 0 uses the hardware concurrency.
SweepResult run_sweep(const ExperimentConfig& cfg, unsigned threads = 0);

std::string records_csv(const std::vector<MetricsRecord>& records);
std::string summary_csv(SweepVar var, const std::vector<SummaryRow>& rows);

/// Writes trials.csv and summary.csv into dir; returns the trials.csv path.
std::filesystem::path write_sweep(const SweepResult& result, const std::filesystem::path& dir);

/// Reads a trials CSV and writes, per metric, two-column files
/// <metric>_vs_<var>_mean.dat and <metric>_vs_<var>_median.dat into out_dir.
std::vector<std::filesystem::path> emit_plot_data(const std::filesystem::path& csv,
                                                  const std::filesystem::path& out_dir);

std::string format_double(double v);

}  // namespace isac
