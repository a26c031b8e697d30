// SPDX-License-Identifier: Apache-2.0
//
// PARATUCK-2 alternating least squares receiver for the sensing link.
//
// The sensing tensor has frontal slices
//     Y_n = A_R D_n(Gamma) A_T^T D_n(C) S^T,      n = 0..N-1,
// with S (pilots) and C (code) known. One ALS sweep solves three linear LS
// problems in turn, always using the freshest factors:
//   1. A_R   from the flat unfolding  Y_(1) = A_R F
//   2. A_T   from the stacked system  y = M vec(A_T^T)
//   3. Gamma row by row from         vec(Y_n) = (G_n kr A_R) Gamma_n^T
// Each step is a pseudoinverse solve, so one sweep costs
// O(min(K, NP) K NP) + O(min(P M_r N, M_t K) P M_r N M_t K) + N O(P M_r K^2).
//
// The factors are recovered up to per-column scaling and a common column
// permutation. Because C and S are known there is no residual per-slot scalar:
// scaling Gamma's row n would have to be undone by C, which is fixed.
// ------------------------------------------------------------------------
#pragma once

#include "isac/tensor.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace isac {

struct IdentifiabilityReport {
  bool ok = true;
  std::vector<std::string> violations;

  std::string describe() const;
};

/// Accepts iff NP >= K, N P M_r >= M_t K and P M_r >= K.
IdentifiabilityReport check_identifiability(std::size_t m_r, std::size_t m_t, std::size_t p,
                                            std::size_t n, std::size_t k);

enum class AlsInitMethod {
  Random,     // i.i.d. CN(0, 1) factors
  Algebraic,  // closed-form start from a generalized eigendecomposition, see algebraic_init
};

struct AlsConfig {
  AlsInitMethod init = AlsInitMethod::Random;
  int max_iters = 1000;
  double tol = 1e-6;
  double rcond = kDefaultRcond;
  std::uint64_t init_seed = 0;
  int n_restarts = 1;
};

struct SensingEstimate {
  CMat a_r_hat;  // M_r x K
  CMat a_t_hat;  // M_t x K
  CMat gamma_hat;  // N x K
  std::vector<double> nmse_trace;  // normalized reconstruction error per sweep
  bool converged = false;
  int iters = 0;
  std::vector<double> theta_hat;
  std::vector<double> phi_hat;
};

/// F = [F_0 ... F_{N-1}], F_n = D_n(Gamma) A_T^T D_n(C) S^T, K x NP.
CMat build_F(const CMat& gamma, const CMat& a_t, const CMat& c, const CMat& s_pilot);

/// Stacked system matrix M with blocks (S D_n(C)) kron (A_R D_n(Gamma)).
CMat build_M(const CMat& a_r, const CMat& gamma, const CMat& c, const CMat& s_pilot);

/// Stacked observation [vec(Y_0); ...; vec(Y_{N-1})].
CMat stack_slices(const Tensor3& t);

CMat estimate_AR(const CMat& y1, const CMat& f, double rcond = kDefaultRcond);

CMat estimate_AT(const Tensor3& y, const CMat& a_r, const CMat& gamma, const CMat& c,
                 const CMat& s_pilot, double rcond = kDefaultRcond);

CMat estimate_Gamma(const Tensor3& y, const CMat& a_r, const CMat& a_t, const CMat& c,
                    const CMat& s_pilot, double rcond = kDefaultRcond);

/// Tensor with slices A_R D_n(Gamma) A_T^T D_n(C) S^T.
Tensor3 paratuck_reconstruct(const CMat& a_r, const CMat& gamma, const CMat& a_t, const CMat& c,
                             const CMat& s_pilot);

struct AlsInit {
  CMat a_r;
  CMat gamma;
  CMat a_t;
};

/// Closed-form starting point. Removing the known code and pilots leaves the
/// M_r x M_t x N tensor Z_n = A_R D_n(Gamma) A_T^T; two random slot
/// combinations of its K x K compression are jointly diagonalized by A_R, and
/// each (Gamma column, A_T column) pair then follows from a rank-one fit.
/// Requires K <= min(M_r, M_t), N >= 2, P >= M_t and a code without zeros;
/// returns nullopt otherwise. Exact on noiseless data.
std::optional<AlsInit> algebraic_init(const Tensor3& y, const CMat& c, const CMat& s_pilot,
                                      std::size_t k, std::uint64_t seed);

/// Runs the three-step ALS. The first start follows cfg.init (falling back to
/// random when the algebraic start is unavailable); with n_restarts > 1 every
/// further start is random and the fit with the smallest final error wins.
SensingEstimate als_fit(const Tensor3& y, const CMat& c, const CMat& s_pilot, std::size_t k,
                        const AlsConfig& cfg = {});

/// Same iteration from a caller-provided starting point.
SensingEstimate als_fit_from(const Tensor3& y, const CMat& c, const CMat& s_pilot,
                             const AlsInit& init, const AlsConfig& cfg = {});

/// Normalizes the first rows of A_R and A_T to ones and moves the removed
/// column scales into Gamma. The reconstructed tensor is unchanged.
SensingEstimate remove_sensing_ambiguity(SensingEstimate est);

/// perm[k] is the estimated column matched to true column k; maximizes the
/// summed normalized correlation over all K! permutations (K <= 8).
std::vector<std::size_t> align_permutation(const CMat& est_cols, const CMat& true_cols);

CMat permute_columns(const CMat& m, const std::vector<std::size_t>& perm);

/// Per column, the angle maximizing |a(theta)^H a_hat| / (|a(theta)| |a_hat|) over
/// a grid on [-89.9, 89.9], refined by golden-section search inside the winning
/// cell. Sorted ascending.
std::vector<double> extract_angles(const CMat& a_hat, double grid_step_deg = 0.1);

}  // namespace isac
