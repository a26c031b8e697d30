// SPDX-License-Identifier: Apache-2.0

#include "isac/signal_model.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

namespace isac {

namespace {

void check_angle(double angle_deg) {
  if (!(angle_deg > -90.0 && angle_deg < 90.0))
    throw std::invalid_argument("steering angle " + std::to_string(angle_deg) +
                                " deg outside (-90, 90)");
}

cdouble draw_cn(std::mt19937_64& rng, double variance) {
  std::normal_distribution<double> g(0.0, std::sqrt(variance / 2.0));
  const double re = g(rng);
  const double im = g(rng);
  return {re, im};
}

}  // namespace

CMat steering_vector(double angle_deg, std::size_t m) {
  check_angle(angle_deg);
  if (m == 0) throw std::invalid_argument("steering_vector: zero antennas");
  const double psi = std::numbers::pi * std::sin(angle_deg * std::numbers::pi / 180.0);
  CMat a(m, 1);
  for (std::size_t i = 0; i < m; ++i) a(i, 0) = std::polar(1.0, psi * static_cast<double>(i));
  return a;
}

CMat build_steering_matrix(const std::vector<double>& angles_deg, std::size_t m) {
  if (angles_deg.empty()) throw std::invalid_argument("build_steering_matrix: no angles");
  CMat a(m, angles_deg.size());
  for (std::size_t k = 0; k < angles_deg.size(); ++k) a.col(k) = steering_vector(angles_deg[k], m);
  return a;
}

CMat krst_code(std::size_t n, std::size_t m_t) {
  if (n < m_t)
    throw IdentifiabilityError("KRST code needs N >= M_t (N = " + std::to_string(n) +
                               ", M_t = " + std::to_string(m_t) + ")");
  CMat c(n, m_t);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t m = 0; m < m_t; ++m) {
      // Reduce the exponent mod n so that trivially-real entries stay exact.
      const auto e = static_cast<double>((r * m) % n);
      c(r, m) = std::polar(scale, -2.0 * std::numbers::pi * e / static_cast<double>(n));
    }
  return c;
}

double code_orthonormality_error(const CMat& c) {
  const CMat g = c.transpose() * c.conjugate() - CMat::Identity(c.cols(), c.cols());
  return g.size() == 0 ? 0.0 : g.cwiseAbs().maxCoeff();
}

Qam::Qam(int order) : order_(order) {
  const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(order))));
  if (order < 4 || side * side != order)
    throw std::invalid_argument("QAM order " + std::to_string(order) + " is not a square >= 4");
  // Average energy of the odd-integer grid is 2(M - 1)/3.
  const double scale = 1.0 / std::sqrt(2.0 * (order - 1) / 3.0);
  points_.reserve(order);
  for (int idx = 0; idx < order; ++idx) {
    const int li = idx % side;
    const int lq = idx / side;
    points_.emplace_back(scale * (2 * li - (side - 1)), scale * (2 * lq - (side - 1)));
  }
}

cdouble Qam::modulate(int index) const {
  if (index < 0 || index >= order_)
    throw std::out_of_range("QAM index " + std::to_string(index) + " out of range");
  return points_[index];
}

std::vector<cdouble> Qam::modulate(const std::vector<int>& indices) const {
  std::vector<cdouble> out;
  out.reserve(indices.size());
  for (int i : indices) out.push_back(modulate(i));
  return out;
}

int Qam::demodulate(cdouble symbol) const {
  int best = 0;
  double best_d = std::norm(symbol - points_[0]);
  for (int i = 1; i < order_; ++i) {
    const double d = std::norm(symbol - points_[i]);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

std::vector<int> Qam::demodulate(const std::vector<cdouble>& symbols) const {
  std::vector<int> out;
  out.reserve(symbols.size());
  for (const auto& s : symbols) out.push_back(demodulate(s));
  return out;
}

CMat Qam::detect(const CMat& soft) const {
  CMat hard(soft.rows(), soft.cols());
  for (Eigen::Index c = 0; c < soft.cols(); ++c)
    for (Eigen::Index r = 0; r < soft.rows(); ++r) hard(r, c) = points_[demodulate(soft(r, c))];
  return hard;
}

CommLink make_comm_link(std::vector<double> theta_ue, std::vector<double> phi_ue,
                        std::vector<cdouble> gains, std::size_t m_u, std::size_t m_t) {
  if (theta_ue.size() != phi_ue.size() || theta_ue.size() != gains.size())
    throw std::invalid_argument("make_comm_link: path lists differ in length");
  CommLink link{std::move(theta_ue), std::move(phi_ue), std::move(gains), m_u, m_t, {}};
  const CMat a_r = build_steering_matrix(link.theta_ue, m_u);
  const CMat a_t = build_steering_matrix(link.phi_ue, m_t);
  CVec g(link.gains.size());
  for (std::size_t l = 0; l < link.gains.size(); ++l) g(l) = link.gains[l];
  link.h = a_r * g.asDiagonal() * a_t.transpose();
  return link;
}

TransmitFrame sample_frame(std::size_t p, std::size_t m_t, std::size_t n, int order,
                           std::uint64_t seed) {
  const Qam qam(order);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(0, order - 1);
  TransmitFrame f;
  f.constellation = order;
  f.s_pilot.resize(p, m_t);
  f.s_data.resize(p, m_t);
  for (std::size_t m = 0; m < m_t; ++m)
    for (std::size_t r = 0; r < p; ++r) f.s_pilot(r, m) = qam.modulate(pick(rng));
  for (std::size_t m = 0; m < m_t; ++m)
    for (std::size_t r = 0; r < p; ++r) f.s_data(r, m) = qam.modulate(pick(rng));
  f.c = krst_code(n, m_t);
  return f;
}

SensingScene sample_scene(std::size_t k, std::size_t n, std::size_t m_r, std::size_t m_t,
                          double sigma, const AngleConfig& angles, std::uint64_t seed) {
  if (k == 0 || n == 0) throw std::invalid_argument("sample_scene: K and N must be >= 1");
  if (!(sigma > 0.0)) throw std::invalid_argument("sample_scene: sigma must be > 0");
  std::mt19937_64 rng(seed);
  SensingScene s;
  s.m_r = m_r;
  s.m_t = m_t;
  if (angles.mode == AngleConfig::Mode::Fixed) {
    if (angles.aoa_deg.size() != k || angles.aod_deg.size() != k)
      throw std::invalid_argument("sample_scene: fixed angle lists must have K entries");
    s.theta = angles.aoa_deg;
    s.phi = angles.aod_deg;
  } else {
    std::uniform_real_distribution<double> u(angles.sector_lo_deg, angles.sector_hi_deg);
    for (std::size_t i = 0; i < k; ++i) s.theta.push_back(u(rng));
    for (std::size_t i = 0; i < k; ++i) s.phi.push_back(u(rng));
  }
  for (double a : s.theta) check_angle(a);
  for (double a : s.phi) check_angle(a);
  s.gamma.resize(n, k);
  for (std::size_t c = 0; c < k; ++c)
    for (std::size_t r = 0; r < n; ++r) s.gamma(r, c) = draw_cn(rng, sigma * sigma);
  return s;
}

Tensor3 sensing_forward(const SensingScene& scene, const TransmitFrame& frame) {
  const CMat a_r = scene.a_r();
  const CMat a_t = scene.a_t();
  const CMat& g = scene.gamma;
  const CMat& c = frame.c;
  const CMat& s = frame.s_pilot;
  if (g.cols() != a_r.cols() || g.cols() != a_t.cols() || c.rows() != g.rows() ||
      c.cols() != a_t.rows() || s.cols() != a_t.rows())
    throw std::invalid_argument("sensing_forward: inconsistent dimensions");
  std::vector<CMat> slices;
  slices.reserve(g.rows());
  for (Eigen::Index n = 0; n < g.rows(); ++n)
    slices.push_back(a_r * row_diag(g, n) * a_t.transpose() * row_diag(c, n) * s.transpose());
  return Tensor3::from_slices(slices);
}

Tensor3 comm_forward(const CommLink& link, const TransmitFrame& frame) {
  const CMat& c = frame.c;
  const CMat& s = frame.s_data;
  if (link.h.cols() != c.cols() || s.cols() != c.cols())
    throw std::invalid_argument("comm_forward: inconsistent dimensions");
  std::vector<CMat> slices;
  slices.reserve(c.rows());
  for (Eigen::Index n = 0; n < c.rows(); ++n)
    slices.push_back(link.h * row_diag(c, n) * s.transpose());
  return Tensor3::from_slices(slices);
}

double noise_variance(double es_n0_db) { return std::pow(10.0, -es_n0_db / 10.0); }

Tensor3 add_noise(const Tensor3& t, double es_n0_db, std::uint64_t seed) {
  if (std::isinf(es_n0_db) && es_n0_db > 0) return t;
  const double n0 = noise_variance(es_n0_db);
  std::mt19937_64 rng(seed);
  Tensor3 out = t;
  for (std::size_t n = 0; n < t.dim3(); ++n)
    for (std::size_t p = 0; p < t.dim2(); ++p)
      for (std::size_t i = 0; i < t.dim1(); ++i) out(i, p, n) += draw_cn(rng, n0);
  return out;
}

}  // namespace isac
