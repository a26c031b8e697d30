// SPDX-License-Identifier: Apache-2.0
//
// Physical signal model of the bistatic sensing / communication link:
// steering matrices, reflection coefficients, KRST codes, QAM frames and
// tensor synthesis for both receivers.
//
// Arrays are half-wavelength ULAs: a(theta)_i = exp(j pi i sin(theta)),
// i = 0..M-1, so the first element is always 1.
// ------------------------------------------------------------------------
#pragma once

#include "isac/tensor.hpp"

#include <cstdint>
#include <limits>
#include <vector>

namespace isac {

/// es_n0_db value that disables noise.
inline constexpr double kNoiseless = std::numeric_limits<double>::infinity();

CMat steering_vector(double angle_deg, std::size_t m);
CMat build_steering_matrix(const std::vector<double>& angles_deg, std::size_t m);

/// N x M_t code: first M_t columns of the unitary N-point DFT, so c^T c^* = I.
CMat krst_code(std::size_t n, std::size_t m_t);

/// max |(c^T c^* - I)_{ij}|
double code_orthonormality_error(const CMat& c);

/// Square QAM with unit average energy. Index i maps to in-phase level i % L and
/// quadrature level i / L, L = sqrt(order).
class Qam {
 public:
  explicit Qam(int order);

  int order() const { return order_; }
  const std::vector<cdouble>& points() const { return points_; }

  cdouble modulate(int index) const;
  std::vector<cdouble> modulate(const std::vector<int>& indices) const;

  /// Nearest point; equidistant candidates resolve to the lowest index.
  int demodulate(cdouble symbol) const;
  std::vector<int> demodulate(const std::vector<cdouble>& symbols) const;

  /// Entrywise hard decision onto the constellation.
  CMat detect(const CMat& soft) const;

 private:
  int order_;
  std::vector<cdouble> points_;
};

struct SensingScene {
  std::vector<double> theta;  // AoA, degrees
  std::vector<double> phi;    // AoD, degrees
  CMat gamma;                 // N x K reflection coefficients
  std::size_t m_r = 0;
  std::size_t m_t = 0;

  std::size_t k() const { return theta.size(); }
  std::size_t n() const { return static_cast<std::size_t>(gamma.rows()); }
  CMat a_r() const { return build_steering_matrix(theta, m_r); }
  CMat a_t() const { return build_steering_matrix(phi, m_t); }
};

struct CommLink {
  std::vector<double> theta_ue;  // AoA at the UE, degrees
  std::vector<double> phi_ue;    // AoD at the BS, degrees
  std::vector<cdouble> gains;
  std::size_t m_u = 0;
  std::size_t m_t = 0;
  CMat h;  // M_u x M_t
};

/// H = A_R(theta_ue) diag(gains) A_T(phi_ue)^T.
CommLink make_comm_link(std::vector<double> theta_ue, std::vector<double> phi_ue,
                        std::vector<cdouble> gains, std::size_t m_u, std::size_t m_t);

struct TransmitFrame {
  CMat s_pilot;  // P x M_t
  CMat s_data;   // P x M_t, first row is the known reference
  CMat c;        // N x M_t
  int constellation = 4;
};

TransmitFrame sample_frame(std::size_t p, std::size_t m_t, std::size_t n, int order,
                           std::uint64_t seed);

struct AngleConfig {
  enum class Mode { Fixed, Uniform };
  Mode mode = Mode::Fixed;
  std::vector<double> aoa_deg;
  std::vector<double> aod_deg;
  double sector_lo_deg = -60.0;
  double sector_hi_deg = 60.0;
};

/// Gamma entries are i.i.d. CN(0, sigma^2).
SensingScene sample_scene(std::size_t k, std::size_t n, std::size_t m_r, std::size_t m_t,
                          double sigma, const AngleConfig& angles, std::uint64_t seed);

/// Slice n: A_R D_n(Gamma) A_T^T D_n(C) S_pilot^T.
Tensor3 sensing_forward(const SensingScene& scene, const TransmitFrame& frame);

/// Slice n: H D_n(C) S^T.
Tensor3 comm_forward(const CommLink& link, const TransmitFrame& frame);

/// Adds CN(0, N0) noise per entry with N0 = 10^(-es_n0_db / 10) (E_s = 1).
Tensor3 add_noise(const Tensor3& t, double es_n0_db, std::uint64_t seed);

double noise_variance(double es_n0_db);

}  // namespace isac
