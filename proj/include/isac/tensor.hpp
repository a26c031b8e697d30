// SPDX-License-Identifier: Apache-2.0
//
// Dense complex matrix / third-order tensor kernel.
//
// Index conventions used throughout the library:
//   * CMat is an Eigen column-major complex matrix; (m, n) is row m, column n.
//   * Tensor3 is indexed (i, p, n): i = antenna, p = symbol period, n = time slot.
//     The frontal slice n is the dim1 x dim2 matrix obtained by fixing n.
//   * vec() stacks columns (first index fastest). This is the only ordering for
//     which vec(A X B) = (B^T kron A) vec(X) holds, which the LS steps rely on.
//
// Cost note: every receiver step is dominated by an SVD-based pseudoinverse.
// For a J x K matrix that is O(min(J, K) J K).
// ------------------------------------------------------------------------
#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace isac {

using cdouble = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RVec = Eigen::VectorXd;

/// Raised when a problem size cannot be uniquely solved by a receiver step.
class IdentifiabilityError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(std::size_t dim1, std::size_t dim2, std::size_t dim3);

  /// Builds a tensor from frontal slices; all slices must share one shape.
  static Tensor3 from_slices(const std::vector<CMat>& slices);

  std::size_t dim1() const { return d1_; }
  std::size_t dim2() const { return d2_; }
  std::size_t dim3() const { return d3_; }
  std::size_t size() const { return data_.size(); }

  cdouble& operator()(std::size_t i, std::size_t p, std::size_t n) {
    return data_[i + d1_ * (p + d2_ * n)];
  }
  const cdouble& operator()(std::size_t i, std::size_t p, std::size_t n) const {
    return data_[i + d1_ * (p + d2_ * n)];
  }

  double squared_norm() const;

  friend bool operator==(const Tensor3&, const Tensor3&) = default;

 private:
  std::size_t d1_ = 0, d2_ = 0, d3_ = 0;
  std::vector<cdouble> data_;
};

Tensor3 operator-(const Tensor3& a, const Tensor3& b);

CMat frontal_slice(const Tensor3& t, std::size_t n);

/// Flat 1-mode unfolding: [Y_1 Y_2 ... Y_N], dim1 x (dim3 * dim2).
CMat unfold1_flat(const Tensor3& t);

/// Inverse of unfold1_flat for a known slice width.
Tensor3 fold1_flat(const CMat& y1, std::size_t dim2);

/// Tall 3-mode unfolding: column n is vec(Y_n), (dim2 * dim1) x dim3.
CMat unfold3_tall(const Tensor3& t);

CMat vec(const CMat& m);
CMat unvec(const CMat& v, std::size_t rows, std::size_t cols);

/// D_n(m): diagonal matrix carrying row n of m.
CMat row_diag(const CMat& m, std::size_t n);

CMat kronecker(const CMat& a, const CMat& b);

/// Column-wise Kronecker product; column k is kron(a.col(k), b.col(k)).
CMat khatri_rao(const CMat& a, const CMat& b);

constexpr double kDefaultRcond = 1e-12;

/// Moore-Penrose pseudoinverse. Singular values below rcond * sigma_max are dropped.
CMat pinv(const CMat& m, double rcond = kDefaultRcond);

struct RankOne {
  CVec u;
  CVec v;
  double sigma = 0.0;
};

/// Best Frobenius rank-one approximation sigma * u * v^H.
/// The first nonzero entry of u is made real and nonnegative.
RankOne best_rank_one(const CMat& m);

bool all_finite(const CMat& m);

}  // namespace isac
