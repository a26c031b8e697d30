// SPDX-License-Identifier: Apache-2.0

#include "isac/tensor.hpp"

#include <cmath>
#include <string>

namespace isac {

Tensor3::Tensor3(std::size_t dim1, std::size_t dim2, std::size_t dim3)
    : d1_(dim1), d2_(dim2), d3_(dim3), data_(dim1 * dim2 * dim3, cdouble(0.0, 0.0)) {}

Tensor3 Tensor3::from_slices(const std::vector<CMat>& slices) {
  if (slices.empty()) throw std::invalid_argument("Tensor3::from_slices: no slices");
  const auto rows = static_cast<std::size_t>(slices.front().rows());
  const auto cols = static_cast<std::size_t>(slices.front().cols());
  Tensor3 t(rows, cols, slices.size());
  for (std::size_t n = 0; n < slices.size(); ++n) {
    const CMat& s = slices[n];
    if (static_cast<std::size_t>(s.rows()) != rows || static_cast<std::size_t>(s.cols()) != cols)
      throw std::invalid_argument("Tensor3::from_slices: slice " + std::to_string(n) +
                                  " has a different shape");
    for (std::size_t p = 0; p < cols; ++p)
      for (std::size_t i = 0; i < rows; ++i) t(i, p, n) = s(i, p);
  }
  return t;
}

double Tensor3::squared_norm() const {
  double acc = 0.0;
  for (const auto& x : data_) acc += std::norm(x);
  return acc;
}

Tensor3 operator-(const Tensor3& a, const Tensor3& b) {
  if (a.dim1() != b.dim1() || a.dim2() != b.dim2() || a.dim3() != b.dim3())
    throw std::invalid_argument("Tensor3 subtraction: shape mismatch");
  Tensor3 out(a.dim1(), a.dim2(), a.dim3());
  for (std::size_t n = 0; n < a.dim3(); ++n)
    for (std::size_t p = 0; p < a.dim2(); ++p)
      for (std::size_t i = 0; i < a.dim1(); ++i) out(i, p, n) = a(i, p, n) - b(i, p, n);
  return out;
}

CMat frontal_slice(const Tensor3& t, std::size_t n) {
  if (n >= t.dim3())
    throw std::out_of_range("frontal_slice: slot " + std::to_string(n) + " >= " +
                            std::to_string(t.dim3()));
  CMat s(t.dim1(), t.dim2());
  for (std::size_t p = 0; p < t.dim2(); ++p)
    for (std::size_t i = 0; i < t.dim1(); ++i) s(i, p) = t(i, p, n);
  return s;
}

CMat unfold1_flat(const Tensor3& t) {
  const std::size_t P = t.dim2();
  CMat y(t.dim1(), t.dim3() * P);
  for (std::size_t n = 0; n < t.dim3(); ++n)
    for (std::size_t p = 0; p < P; ++p)
      for (std::size_t i = 0; i < t.dim1(); ++i) y(i, n * P + p) = t(i, p, n);
  return y;
}

Tensor3 fold1_flat(const CMat& y1, std::size_t dim2) {
  if (dim2 == 0 || static_cast<std::size_t>(y1.cols()) % dim2 != 0)
    throw std::invalid_argument("fold1_flat: column count is not a multiple of dim2");
  const std::size_t N = static_cast<std::size_t>(y1.cols()) / dim2;
  Tensor3 t(y1.rows(), dim2, N);
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t p = 0; p < dim2; ++p)
      for (std::size_t i = 0; i < t.dim1(); ++i) t(i, p, n) = y1(i, n * dim2 + p);
  return t;
}

CMat unfold3_tall(const Tensor3& t) {
  const std::size_t I = t.dim1();
  CMat y(t.dim2() * I, t.dim3());
  for (std::size_t n = 0; n < t.dim3(); ++n)
    for (std::size_t p = 0; p < t.dim2(); ++p)
      for (std::size_t i = 0; i < I; ++i) y(p * I + i, n) = t(i, p, n);
  return y;
}

CMat vec(const CMat& m) {
  CMat v(m.size(), 1);
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) v(c * m.rows() + r, 0) = m(r, c);
  return v;
}

CMat unvec(const CMat& v, std::size_t rows, std::size_t cols) {
  if (static_cast<std::size_t>(v.size()) != rows * cols)
    throw std::invalid_argument("unvec: length " + std::to_string(v.size()) + " != " +
                                std::to_string(rows) + "x" + std::to_string(cols));
  CMat m(rows, cols);
  // Eigen storage is column-major for both vectors and matrices.
  for (std::size_t c = 0; c < cols; ++c)
    for (std::size_t r = 0; r < rows; ++r) m(r, c) = v(c * rows + r);
  return m;
}

CMat row_diag(const CMat& m, std::size_t n) {
  if (n >= static_cast<std::size_t>(m.rows()))
    throw std::out_of_range("row_diag: row " + std::to_string(n) + " >= " +
                            std::to_string(m.rows()));
  CMat d = CMat::Zero(m.cols(), m.cols());
  for (Eigen::Index j = 0; j < m.cols(); ++j) d(j, j) = m(n, j);
  return d;
}

CMat kronecker(const CMat& a, const CMat& b) {
  CMat k(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index ac = 0; ac < a.cols(); ++ac)
    for (Eigen::Index ar = 0; ar < a.rows(); ++ar)
      k.block(ar * b.rows(), ac * b.cols(), b.rows(), b.cols()) = a(ar, ac) * b;
  return k;
}

CMat khatri_rao(const CMat& a, const CMat& b) {
  if (a.cols() != b.cols())
    throw std::invalid_argument("khatri_rao: column counts differ (" + std::to_string(a.cols()) +
                                " vs " + std::to_string(b.cols()) + ")");
  CMat k(a.rows() * b.rows(), a.cols());
  for (Eigen::Index c = 0; c < a.cols(); ++c) k.col(c) = kronecker(a.col(c), b.col(c));
  return k;
}

CMat pinv(const CMat& m, double rcond) {
  if (m.size() == 0) return CMat(m.cols(), m.rows());
  if (!all_finite(m)) throw std::domain_error("pinv: non-finite input");
  Eigen::JacobiSVD<CMat> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw std::runtime_error("pinv: SVD did not converge");
  const RVec& s = svd.singularValues();
  const double cutoff = rcond * (s.size() > 0 ? s(0) : 0.0);
  RVec inv = RVec::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > cutoff && s(i) > 0.0) inv(i) = 1.0 / s(i);
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().adjoint();
}

RankOne best_rank_one(const CMat& m) {
  if (m.size() == 0 || m.cwiseAbs().maxCoeff() == 0.0)
    throw std::invalid_argument("best_rank_one: all-zero input");
  Eigen::JacobiSVD<CMat> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw std::runtime_error("best_rank_one: SVD did not converge");
  RankOne r{svd.matrixU().col(0), svd.matrixV().col(0), svd.singularValues()(0)};
  for (Eigen::Index i = 0; i < r.u.size(); ++i) {
    if (std::abs(r.u(i)) > 0.0) {
      const cdouble phase = std::conj(r.u(i)) / std::abs(r.u(i));
      r.u *= phase;
      r.v *= phase;  // sigma u v^H is unchanged
      r.u(i) = std::abs(r.u(i));
      break;
    }
  }
  return r;
}

bool all_finite(const CMat& m) {
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      if (!std::isfinite(m(r, c).real()) || !std::isfinite(m(r, c).imag())) return false;
  return true;
}

}  // namespace isac
