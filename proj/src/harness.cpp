// SPDX-License-Identifier: Apache-2.0

#include "isac/harness.hpp"

#include "isac/comm_krf.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <thread>

namespace isac {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t substream(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(seed ^ splitmix64(stream));
}

enum Stream : std::uint64_t { kScene = 1, kFrame, kSensingNoise, kCommNoise, kAlsInit };

CMat vstack(const CMat& top, const CMat& bottom) {
  CMat out(top.rows() + bottom.rows(), top.cols());
  out << top, bottom;
  return out;
}

// Rows 1..P-1; row 0 is the known reference and carries no data.
CMat data_rows(const CMat& s) { return s.rows() > 1 ? CMat(s.bottomRows(s.rows() - 1)) : s; }

}  // namespace

double nmse(const CMat& x_hat, const CMat& x_true) {
  if (x_hat.rows() != x_true.rows() || x_hat.cols() != x_true.cols())
    throw std::invalid_argument("nmse: shape mismatch");
  const double ref = x_true.squaredNorm();
  if (ref == 0.0) throw std::invalid_argument("nmse: zero reference");
  return (x_hat - x_true).squaredNorm() / ref;
}

double ser(const CMat& s_hat, const CMat& s_true) {
  if (s_hat.rows() != s_true.rows() || s_hat.cols() != s_true.cols())
    throw std::invalid_argument("ser: shape mismatch");
  if (s_true.size() == 0) return 0.0;
  Eigen::Index wrong = 0;
  for (Eigen::Index c = 0; c < s_true.cols(); ++c)
    for (Eigen::Index r = 0; r < s_true.rows(); ++r)
      if (std::abs(s_hat(r, c) - s_true(r, c)) > 1e-9) ++wrong;
  return static_cast<double>(wrong) / static_cast<double>(s_true.size());
}

std::uint64_t trial_seed(std::uint64_t base_seed, double sweep_value, int trial) {
  std::uint64_t h = splitmix64(base_seed);
  h = splitmix64(h ^ std::bit_cast<std::uint64_t>(sweep_value));
  h = splitmix64(h ^ static_cast<std::uint64_t>(static_cast<std::int64_t>(trial)));
  return h;
}

MetricsRecord run_trial(const ExperimentConfig& cfg, double sweep_value, int trial) {
  MetricsRecord rec;
  rec.sweep_var = cfg.sweep_var;
  rec.sweep_value = sweep_value;
  rec.trial = trial;
  rec.seed = trial_seed(cfg.base_seed, sweep_value, trial);

  const Dims d = cfg.dims_at(sweep_value);
  const double es_n0 = cfg.es_n0_at(sweep_value);
  const Qam qam(cfg.constellation);

  const SensingScene scene = sample_scene(d.k, d.n, d.m_r, d.m_t, cfg.gamma_std, cfg.sensing_angles,
                                          substream(rec.seed, kScene));
  const TransmitFrame frame =
      sample_frame(d.p, d.m_t, d.n, cfg.constellation, substream(rec.seed, kFrame));
  const CommLink link =
      make_comm_link(cfg.comm_aoa_deg, cfg.comm_aod_deg, cfg.comm_gains, d.m_u, d.m_t);

  const Tensor3 y_sense =
      add_noise(sensing_forward(scene, frame), es_n0, substream(rec.seed, kSensingNoise));
  const Tensor3 y_ue = add_noise(comm_forward(link, frame), es_n0, substream(rec.seed, kCommNoise));

  // Sensing link.
  rec.nmse_ar = rec.nmse_at = rec.nmse_gamma = rec.angle_rmse_deg = kNaN;
  rec.angle_max_err_deg = rec.final_reconstruction_error = kNaN;
  try {
    AlsConfig als = cfg.als;
    als.init_seed = substream(rec.seed ^ cfg.als.init_seed, kAlsInit);
    SensingEstimate est = als_fit(y_sense, frame.c, frame.s_pilot, d.k, als);
    rec.converged = est.converged;
    rec.als_iters = est.iters;
    rec.final_reconstruction_error = est.nmse_trace.back();
    est = remove_sensing_ambiguity(std::move(est));

    const CMat a_r = scene.a_r();
    const CMat a_t = scene.a_t();
    const auto perm = align_permutation(vstack(est.a_r_hat, est.a_t_hat), vstack(a_r, a_t));
    est.a_r_hat = permute_columns(est.a_r_hat, perm);
    est.a_t_hat = permute_columns(est.a_t_hat, perm);
    est.gamma_hat = permute_columns(est.gamma_hat, perm);
    rec.nmse_ar = nmse(est.a_r_hat, a_r);
    rec.nmse_at = nmse(est.a_t_hat, a_t);
    rec.nmse_gamma = nmse(est.gamma_hat, scene.gamma);

    est.theta_hat = extract_angles(est.a_r_hat);
    est.phi_hat = extract_angles(est.a_t_hat);
    auto theta = scene.theta;
    auto phi = scene.phi;
    std::sort(theta.begin(), theta.end());
    std::sort(phi.begin(), phi.end());
    double sq = 0.0, worst = 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double e1 = est.theta_hat[i] - theta[i];
      const double e2 = est.phi_hat[i] - phi[i];
      sq += e1 * e1 + e2 * e2;
      worst = std::max({worst, std::abs(e1), std::abs(e2)});
    }
    rec.angle_rmse_deg = std::sqrt(sq / static_cast<double>(2 * theta.size()));
    rec.angle_max_err_deg = worst;
  } catch (const IdentifiabilityError&) {
    throw;
  } catch (const std::exception& e) {
    // Diverged fit: keep the record, flag it.
    rec.converged = false;
    rec.error = e.what();
  }

  // Communication link.
  rec.nmse_h = rec.ser_krf = rec.ser_zf = kNaN;
  try {
    const CommEstimate ce = krf_receiver(y_ue, frame.c, frame.s_data.row(0), qam);
    rec.nmse_h = nmse(ce.h_hat, link.h);
    rec.ser_krf = ser(data_rows(ce.s_hat), data_rows(frame.s_data));
    const CMat s_zf = zf_benchmark(y_ue, link.h, frame.c, qam);
    rec.ser_zf = ser(data_rows(s_zf), data_rows(frame.s_data));
  } catch (const std::exception& e) {
    rec.hard_error = true;
    rec.error += (rec.error.empty() ? "" : "; ") + std::string(e.what());
  }
  return rec;
}

const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names{"als_iters",      "nmse_ar", "nmse_at", "nmse_gamma",
                                              "angle_rmse_deg", "nmse_h",  "ser_krf", "ser_zf"};
  return names;
}

double metric_value(const MetricsRecord& r, const std::string& name) {
  if (name == "als_iters") return r.als_iters;
  if (name == "nmse_ar") return r.nmse_ar;
  if (name == "nmse_at") return r.nmse_at;
  if (name == "nmse_gamma") return r.nmse_gamma;
  if (name == "angle_rmse_deg") return r.angle_rmse_deg;
  if (name == "nmse_h") return r.nmse_h;
  if (name == "ser_krf") return r.ser_krf;
  if (name == "ser_zf") return r.ser_zf;
  throw std::invalid_argument("unknown metric '" + name + "'");
}

double median_of(std::vector<double> v) {
  std::erase_if(v, [](double x) { return !std::isfinite(x); });
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

double mean_of(const std::vector<double>& v) {
  double acc = 0.0;
  std::size_t n = 0;
  for (double x : v)
    if (std::isfinite(x)) {
      acc += x;
      ++n;
    }
  return n ? acc / static_cast<double>(n) : kNaN;
}

std::vector<SummaryRow> summarize(const std::vector<MetricsRecord>& records,
                                  const std::vector<double>& grid) {
  std::vector<SummaryRow> rows;
  for (double g : grid) {
    SummaryRow row;
    row.sweep_value = g;
    int converged = 0;
    std::vector<std::vector<double>> cols(metric_names().size());
    for (const auto& r : records) {
      if (r.sweep_value != g) continue;
      ++row.trials;
      converged += r.converged ? 1 : 0;
      for (std::size_t m = 0; m < cols.size(); ++m)
        cols[m].push_back(metric_value(r, metric_names()[m]));
    }
    row.converged_fraction = row.trials ? static_cast<double>(converged) / row.trials : kNaN;
    for (const auto& c : cols) {
      row.median.push_back(median_of(c));
      row.mean.push_back(mean_of(c));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

SweepResult run_sweep(const ExperimentConfig& cfg, unsigned threads) {
  validate(cfg);
  const std::vector<double> grid = cfg.grid();
  const std::size_t trials = static_cast<std::size_t>(cfg.trials);
  const std::size_t jobs = grid.size() * trials;

  SweepResult out;
  out.sweep_var = cfg.sweep_var;
  out.records.resize(jobs);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs; j = next++) {
      // Slot j is owned by this job; the final order is fixed by index.
      const double v = grid[j / trials];
      const int t = static_cast<int>(j % trials);
      try {
        out.records[j] = run_trial(cfg, v, t);
      } catch (const std::exception& e) {
        MetricsRecord& r = out.records[j];
        r.sweep_var = cfg.sweep_var;
        r.sweep_value = v;
        r.trial = t;
        r.seed = trial_seed(cfg.base_seed, v, t);
        r.nmse_ar = r.nmse_at = r.nmse_gamma = r.angle_rmse_deg = kNaN;
        r.nmse_h = r.ser_krf = r.ser_zf = kNaN;
        r.hard_error = true;
        r.error = e.what();
      }
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(jobs, 1)));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (const auto& r : out.records) out.hard_errors += r.hard_error ? 1 : 0;
  out.summary = summarize(out.records, grid);
  return out;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string records_csv(const std::vector<MetricsRecord>& records) {
  std::ostringstream os;
  os << "sweep_var,sweep_value,trial,seed,converged,als_iters,nmse_ar,nmse_at,nmse_gamma,"
        "angle_rmse_deg,nmse_h,ser_krf,ser_zf\n";
  for (const auto& r : records) {
    os << to_string(r.sweep_var) << ',' << format_double(r.sweep_value) << ',' << r.trial << ','
       << r.seed << ',' << (r.converged ? 1 : 0) << ',' << r.als_iters << ','
       << format_double(r.nmse_ar) << ',' << format_double(r.nmse_at) << ','
       << format_double(r.nmse_gamma) << ',' << format_double(r.angle_rmse_deg) << ','
       << format_double(r.nmse_h) << ',' << format_double(r.ser_krf) << ','
       << format_double(r.ser_zf) << '\n';
  }
  return os.str();
}

std::string summary_csv(SweepVar var, const std::vector<SummaryRow>& rows) {
  std::ostringstream os;
  os << "sweep_var,sweep_value,trials,converged_fraction";
  for (const auto& m : metric_names()) os << ",median_" << m << ",mean_" << m;
  os << '\n';
  for (const auto& r : rows) {
    os << to_string(var) << ',' << format_double(r.sweep_value) << ',' << r.trials << ','
       << format_double(r.converged_fraction);
    for (std::size_t m = 0; m < r.median.size(); ++m)
      os << ',' << format_double(r.median[m]) << ',' << format_double(r.mean[m]);
    os << '\n';
  }
  return os.str();
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
  if (!f) throw std::runtime_error("write failed for " + path.string());
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_cell(const std::string& s, std::size_t line_no) {
  if (s == "nan") return kNaN;
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("malformed CSV value '" + s + "' on line " + std::to_string(line_no));
  }
}

}  // namespace

std::filesystem::path write_sweep(const SweepResult& result, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir.string() + ": " + ec.message());
  const auto trials = dir / "trials.csv";
  write_text(trials, records_csv(result.records));
  write_text(dir / "summary.csv", summary_csv(result.sweep_var, result.summary));
  return trials;
}

std::vector<std::filesystem::path> emit_plot_data(const std::filesystem::path& csv,
                                                  const std::filesystem::path& out_dir) {
  std::ifstream in(csv);
  if (!in) throw std::runtime_error("cannot open " + csv.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("malformed CSV: missing header");
  const auto header = split_csv_line(line);
  const std::vector<std::string> expected = split_csv_line(
      "sweep_var,sweep_value,trial,seed,converged,als_iters,nmse_ar,nmse_at,nmse_gamma,"
      "angle_rmse_deg,nmse_h,ser_krf,ser_zf");
  if (header != expected) throw std::runtime_error("malformed CSV: unexpected header");
  auto column = [&](const std::string& name) {
    return static_cast<std::size_t>(std::find(header.begin(), header.end(), name) - header.begin());
  };

  std::string var = "es_n0";
  // Keyed by sweep value; std::map keeps the grid order.
  std::map<double, std::vector<std::vector<double>>> groups;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw std::runtime_error("malformed CSV: line " + std::to_string(line_no) + " has " +
                               std::to_string(cells.size()) + " cells");
    var = cells[0];
    auto& g = groups[parse_cell(cells[1], line_no)];
    g.resize(metric_names().size());
    for (std::size_t m = 0; m < metric_names().size(); ++m)
      g[m].push_back(parse_cell(cells[column(metric_names()[m])], line_no));
  }

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("cannot create " + out_dir.string());
  std::vector<std::filesystem::path> written;
  for (std::size_t m = 0; m < metric_names().size(); ++m) {
    const std::string& name = metric_names()[m];
    for (const char* agg : {"mean", "median"}) {
      std::ostringstream os;
      os << "# " << var << ' ' << agg << '_' << name << '\n';
      for (const auto& [value, cols] : groups) {
        const double a = std::string(agg) == "mean" ? mean_of(cols[m]) : median_of(cols[m]);
        if (std::isnan(a)) continue;
        os << format_double(value) << ' ' << format_double(a) << '\n';
      }
      const auto path = out_dir / (name + "_vs_" + var + "_" + agg + ".dat");
      write_text(path, os.str());
      written.push_back(path);
    }
  }
  return written;
}

}  // namespace isac
