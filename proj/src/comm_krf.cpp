// SPDX-License-Identifier: Apache-2.0

#include "isac/comm_krf.hpp"

#include <cmath>
#include <string>

namespace isac {

CMat estimate_Q(const Tensor3& y, const CMat& c) {
  if (c.rows() != static_cast<Eigen::Index>(y.dim3()))
    throw std::invalid_argument("estimate_Q: code has " + std::to_string(c.rows()) +
                                " rows, tensor has " + std::to_string(y.dim3()) + " slots");
  if (c.rows() < c.cols())
    throw IdentifiabilityError("estimate_Q: requires N >= M_t (N = " + std::to_string(c.rows()) +
                               ", M_t = " + std::to_string(c.cols()) + ")");
  const double dev = code_orthonormality_error(c);
  if (dev > 1e-9)
    throw std::invalid_argument("estimate_Q: code is not column-orthonormal (deviation " +
                                std::to_string(dev) + ")");
  return unfold3_tall(y) * c.conjugate();
}

KrfFactors krf_factorize(const CMat& q, std::size_t m_u, std::size_t p) {
  if (static_cast<std::size_t>(q.rows()) != m_u * p)
    throw std::invalid_argument("krf_factorize: Q has " + std::to_string(q.rows()) +
                                " rows, expected P*M_u = " + std::to_string(m_u * p));
  KrfFactors f{CMat(p, q.cols()), CMat(m_u, q.cols())};
  for (Eigen::Index m = 0; m < q.cols(); ++m) {
    if (q.col(m).cwiseAbs().maxCoeff() == 0.0)
      throw std::invalid_argument("krf_factorize: column " + std::to_string(m) + " is zero");
    // q_m = s_m kron h_m  <=>  unvec(q_m) = h_m s_m^T  (M_u x P)
    const RankOne r = best_rank_one(unvec(q.col(m), m_u, p));
    const double root = std::sqrt(r.sigma);
    f.h.col(m) = root * r.u;
    f.s.col(m) = root * r.v.conjugate();
  }
  return f;
}

KrfFactors remove_scaling(KrfFactors f, const CMat& reference_row) {
  if (reference_row.size() != f.s.cols())
    throw std::invalid_argument("remove_scaling: reference row has the wrong length");
  for (Eigen::Index m = 0; m < f.s.cols(); ++m) {
    const cdouble pivot = f.s(0, m);
    const cdouble ref = reference_row(m);
    if (std::abs(pivot) == 0.0 || std::abs(ref) == 0.0)
      throw std::domain_error("remove_scaling: zero pivot in column " + std::to_string(m));
    const cdouble lambda = ref / pivot;
    f.s.col(m) *= lambda;
    f.h.col(m) /= lambda;
  }
  return f;
}

CMat detect_symbols(const CMat& s_soft, const Qam& qam) { return qam.detect(s_soft); }

CommEstimate krf_receiver(const Tensor3& y, const CMat& c, const CMat& reference_row,
                          const Qam& qam) {
  const CMat q = estimate_Q(y, c);
  const KrfFactors f = remove_scaling(krf_factorize(q, y.dim1(), y.dim2()), reference_row);
  return {detect_symbols(f.s, qam), f.s, f.h, reference_row};
}

CMat zf_benchmark(const Tensor3& y, const CMat& h_true, const CMat& c, const Qam& qam) {
  const Eigen::Index m_u = h_true.rows();
  const Eigen::Index m_t = h_true.cols();
  if (m_u < m_t)
    throw std::invalid_argument("zf_benchmark: requires M_u >= M_t (M_u = " +
                                std::to_string(m_u) + ", M_t = " + std::to_string(m_t) + ")");
  if (static_cast<Eigen::Index>(y.dim1()) != m_u || c.rows() != static_cast<Eigen::Index>(y.dim3()) ||
      c.cols() != m_t)
    throw std::invalid_argument("zf_benchmark: inconsistent dimensions");
  const Eigen::Index N = c.rows();
  CMat w(N * m_u, m_t);
  CMat y_stack(N * m_u, y.dim2());
  for (Eigen::Index n = 0; n < N; ++n) {
    w.middleRows(n * m_u, m_u) = h_true * row_diag(c, n);
    y_stack.middleRows(n * m_u, m_u) = frontal_slice(y, n);
  }
  Eigen::JacobiSVD<CMat> svd(w);
  const auto& sv = svd.singularValues();
  if (sv.size() < m_t || sv(m_t - 1) <= 1e-12 * sv(0))
    throw std::invalid_argument("zf_benchmark: channel system is rank deficient");
  const CMat s_t = pinv(w) * y_stack;
  return qam.detect(s_t.transpose());
}

}  // namespace isac
