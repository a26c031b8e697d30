// SPDX-License-Identifier: Apache-2.0
//
// Closed-form semi-blind receiver for the UE link.
//
// The UE tensor is a PARAFAC model [[H, S, C]]. With C column-orthonormal,
// projecting the tall unfolding onto C^* gives Q = S kr H, and each column
// q_m = s_m kron h_m reshapes to the rank-one matrix h_m s_m^T. A rank-one
// SVD per column recovers (s_m, h_m) up to a complex scalar, fixed with the
// known first row of S.
// ------------------------------------------------------------------------
#pragma once

#include "isac/signal_model.hpp"
#include "isac/tensor.hpp"

namespace isac {

struct CommEstimate {
  CMat s_hat;   // P x M_t hard decisions
  CMat s_soft;  // P x M_t, after scaling removal
  CMat h_hat;   // M_u x M_t
  CMat scaling_reference;  // 1 x M_t, the known first row of S
};

/// Q = Y_tall C^*. Rejects N < M_t and codes with |c^T c^* - I| > 1e-9.
CMat estimate_Q(const Tensor3& y, const CMat& c);

struct KrfFactors {
  CMat s;  // P x M_t
  CMat h;  // M_u x M_t
};

/// Per-column rank-one factorization of Q (PM_u x M_t) into S kr H.
KrfFactors krf_factorize(const CMat& q, std::size_t m_u, std::size_t p);

/// Rescales column m of s so that s(0, m) == reference(m); h gets the inverse.
KrfFactors remove_scaling(KrfFactors f, const CMat& reference_row);

CMat detect_symbols(const CMat& s_soft, const Qam& qam);

/// estimate_Q -> krf_factorize -> remove_scaling -> detect_symbols.
CommEstimate krf_receiver(const Tensor3& y, const CMat& c, const CMat& reference_row,
                          const Qam& qam);

/// Zero-forcing benchmark with perfect channel knowledge: LS solve of
/// [H D_0(C); ...; H D_{N-1}(C)] S^T = [Y_0; ...; Y_{N-1}], then hard decision.
CMat zf_benchmark(const Tensor3& y, const CMat& h_true, const CMat& c, const Qam& qam);

}  // namespace isac
