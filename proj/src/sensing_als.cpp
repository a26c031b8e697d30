// SPDX-License-Identifier: Apache-2.0

#include "isac/sensing_als.hpp"

#include "isac/signal_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>

namespace isac {

std::string IdentifiabilityReport::describe() const {
  if (ok) return "ok";
  std::ostringstream os;
  for (std::size_t i = 0; i < violations.size(); ++i) os << (i ? "; " : "") << violations[i];
  return os.str();
}

IdentifiabilityReport check_identifiability(std::size_t m_r, std::size_t m_t, std::size_t p,
                                            std::size_t n, std::size_t k) {
  IdentifiabilityReport r;
  auto fail = [&r](std::string msg) {
    r.ok = false;
    r.violations.push_back(std::move(msg));
  };
  if (n * p < k)
    fail("NP >= K violated (NP = " + std::to_string(n * p) + ", K = " + std::to_string(k) + ")");
  if (n * p * m_r < m_t * k)
    fail("NPM_r >= M_t*K violated (NPM_r = " + std::to_string(n * p * m_r) +
         ", M_t*K = " + std::to_string(m_t * k) + ")");
  if (p * m_r < k)
    fail("PM_r >= K violated (PM_r = " + std::to_string(p * m_r) + ", K = " + std::to_string(k) +
         ")");
  return r;
}

CMat build_F(const CMat& gamma, const CMat& a_t, const CMat& c, const CMat& s_pilot) {
  const Eigen::Index K = gamma.cols();
  const Eigen::Index N = gamma.rows();
  const Eigen::Index P = s_pilot.rows();
  if (a_t.cols() != K || c.rows() != N || c.cols() != a_t.rows() || s_pilot.cols() != a_t.rows())
    throw std::invalid_argument("build_F: inconsistent dimensions");
  CMat f(K, N * P);
  for (Eigen::Index n = 0; n < N; ++n)
    f.middleCols(n * P, P) =
        row_diag(gamma, n) * a_t.transpose() * row_diag(c, n) * s_pilot.transpose();
  return f;
}

CMat build_M(const CMat& a_r, const CMat& gamma, const CMat& c, const CMat& s_pilot) {
  const Eigen::Index N = gamma.rows();
  const Eigen::Index rows_per = s_pilot.rows() * a_r.rows();
  if (gamma.cols() != a_r.cols() || c.rows() != N || c.cols() != s_pilot.cols())
    throw std::invalid_argument("build_M: inconsistent dimensions");
  CMat m(N * rows_per, s_pilot.cols() * a_r.cols());
  for (Eigen::Index n = 0; n < N; ++n)
    m.middleRows(n * rows_per, rows_per) =
        kronecker(s_pilot * row_diag(c, n), a_r * row_diag(gamma, n));
  return m;
}

CMat stack_slices(const Tensor3& t) {
  // Column-stacking the tall unfolding gives exactly [vec(Y_0); ...; vec(Y_{N-1})].
  return vec(unfold3_tall(t));
}

CMat estimate_AR(const CMat& y1, const CMat& f, double rcond) {
  if (y1.cols() != f.cols()) throw std::invalid_argument("estimate_AR: Y_(1) and F widths differ");
  return y1 * pinv(f, rcond);
}

CMat estimate_AT(const Tensor3& y, const CMat& a_r, const CMat& gamma, const CMat& c,
                 const CMat& s_pilot, double rcond) {
  const std::size_t K = a_r.cols();
  const std::size_t m_t = s_pilot.cols();
  if (y.dim3() * y.dim2() * y.dim1() < m_t * K)
    throw IdentifiabilityError("estimate_AT: NPM_r < M_t*K");
  const CMat m = build_M(a_r, gamma, c, s_pilot);
  if (m.rows() != static_cast<Eigen::Index>(y.size()))
    throw std::invalid_argument("estimate_AT: system size does not match the tensor");
  const CMat v = pinv(m, rcond) * stack_slices(y);
  return unvec(v, K, m_t).transpose();
}

CMat estimate_Gamma(const Tensor3& y, const CMat& a_r, const CMat& a_t, const CMat& c,
                    const CMat& s_pilot, double rcond) {
  const Eigen::Index K = a_r.cols();
  if (static_cast<Eigen::Index>(y.dim2() * y.dim1()) < K)
    throw IdentifiabilityError("estimate_Gamma: PM_r < K");
  if (a_t.cols() != K || c.rows() != static_cast<Eigen::Index>(y.dim3()) ||
      s_pilot.rows() != static_cast<Eigen::Index>(y.dim2()) ||
      a_r.rows() != static_cast<Eigen::Index>(y.dim1()))
    throw std::invalid_argument("estimate_Gamma: inconsistent dimensions");
  CMat gamma(y.dim3(), K);
  for (std::size_t n = 0; n < y.dim3(); ++n) {
    const CMat g_n = s_pilot * row_diag(c, n) * a_t;
    const CMat basis = khatri_rao(g_n, a_r);
    gamma.row(n) = (pinv(basis, rcond) * vec(frontal_slice(y, n))).transpose();
  }
  return gamma;
}

Tensor3 paratuck_reconstruct(const CMat& a_r, const CMat& gamma, const CMat& a_t, const CMat& c,
                             const CMat& s_pilot) {
  return fold1_flat(a_r * build_F(gamma, a_t, c, s_pilot), s_pilot.rows());
}

namespace {

CMat random_cn(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> g(0.0, std::sqrt(0.5));
  CMat m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) {
      const double re = g(rng);
      const double im = g(rng);
      m(r, c) = {re, im};
    }
  return m;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

CMat leading_left_vectors(const CMat& m, Eigen::Index k) {
  Eigen::JacobiSVD<CMat> svd(m, Eigen::ComputeThinU);
  return svd.matrixU().leftCols(k);
}

}  // namespace

std::optional<AlsInit> algebraic_init(const Tensor3& y, const CMat& c, const CMat& s_pilot,
                                      std::size_t k, std::uint64_t seed) {
  const auto m_r = static_cast<Eigen::Index>(y.dim1());
  const auto m_t = s_pilot.cols();
  const auto N = static_cast<Eigen::Index>(y.dim3());
  const auto K = static_cast<Eigen::Index>(k);
  if (K < 1 || K > std::min(m_r, m_t) || N < 2 || s_pilot.rows() < m_t || c.rows() != N ||
      c.cols() != m_t || c.cwiseAbs().minCoeff() == 0.0)
    return std::nullopt;

  // Z_n = Y_n (D_n(C) S^T)^+ = A_R D_n(Gamma) A_T^T
  std::vector<CMat> z;
  CMat z_rows(m_r, N * m_t), z_cols(m_t, N * m_r);
  for (Eigen::Index n = 0; n < N; ++n) {
    z.push_back(frontal_slice(y, n) * pinv(row_diag(c, n) * s_pilot.transpose()));
    z_rows.middleCols(n * m_t, m_t) = z.back();
    z_cols.middleCols(n * m_r, m_r) = z.back().transpose();
  }
  const CMat u = leading_left_vectors(z_rows, K);  // spans A_R
  const CMat v = leading_left_vectors(z_cols, K);  // spans A_T

  // W_n = U^H Z_n V^* = (U^H A_R) D_n(Gamma) (V^H A_T)^T
  std::vector<CMat> w;
  for (const auto& zn : z) w.push_back(u.adjoint() * zn * v.conjugate());
  std::mt19937_64 rng(seed);
  const CMat alpha = random_cn(rng, N, 1);
  const CMat beta = random_cn(rng, N, 1);
  CMat wa = CMat::Zero(K, K), wb = CMat::Zero(K, K);
  for (Eigen::Index n = 0; n < N; ++n) {
    wa += alpha(n) * w[n];
    wb += beta(n) * w[n];
  }
  // W_a W_b^{-1} = A~ D_a D_b^{-1} A~^{-1}
  Eigen::ComplexEigenSolver<CMat> eig(wa * pinv(wb));
  if (eig.info() != Eigen::Success) return std::nullopt;
  const CMat a_tilde = eig.eigenvectors();
  Eigen::JacobiSVD<CMat> cond(a_tilde);
  const auto& sv = cond.singularValues();
  if (!(sv(K - 1) > 1e-10 * sv(0))) return std::nullopt;
  const CMat a_tilde_inv = a_tilde.inverse();

  AlsInit init;
  init.a_r = u * a_tilde;
  init.gamma.resize(N, K);
  CMat b_tilde(K, K);
  for (Eigen::Index col = 0; col < K; ++col) {
    // Row n of A~^{-1} W_n is gamma(n, col) * b~_col^T: rank one across slots.
    CMat r(N, K);
    for (Eigen::Index n = 0; n < N; ++n) r.row(n) = (a_tilde_inv * w[n]).row(col);
    if (r.cwiseAbs().maxCoeff() == 0.0) return std::nullopt;
    const RankOne r1 = best_rank_one(r);
    init.gamma.col(col) = r1.sigma * r1.u;
    b_tilde.col(col) = r1.v.conjugate();
  }
  init.a_t = v * b_tilde;
  if (!all_finite(init.a_r) || !all_finite(init.a_t) || !all_finite(init.gamma)) return std::nullopt;
  return init;
}

SensingEstimate als_fit_from(const Tensor3& y, const CMat& c, const CMat& s_pilot,
                             const AlsInit& init, const AlsConfig& cfg) {
  if (cfg.max_iters < 1) throw std::invalid_argument("als_fit: max_iters must be >= 1");
  if (!(cfg.tol > 0.0)) throw std::invalid_argument("als_fit: tol must be > 0");
  const std::size_t K = init.a_r.cols();
  const auto report = check_identifiability(y.dim1(), s_pilot.cols(), y.dim2(), y.dim3(), K);
  if (!report.ok) throw IdentifiabilityError("als_fit: " + report.describe());

  const double y_norm2 = y.squared_norm();
  const double denom = y_norm2 > 0.0 ? y_norm2 : 1.0;
  const CMat y1 = unfold1_flat(y);

  SensingEstimate est;
  est.a_r_hat = init.a_r;
  est.gamma_hat = init.gamma;
  est.a_t_hat = init.a_t;
  double prev = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= cfg.max_iters; ++it) {
    est.a_r_hat = estimate_AR(y1, build_F(est.gamma_hat, est.a_t_hat, c, s_pilot), cfg.rcond);
    est.a_t_hat = estimate_AT(y, est.a_r_hat, est.gamma_hat, c, s_pilot, cfg.rcond);
    est.gamma_hat = estimate_Gamma(y, est.a_r_hat, est.a_t_hat, c, s_pilot, cfg.rcond);

    const CMat resid = y1 - est.a_r_hat * build_F(est.gamma_hat, est.a_t_hat, c, s_pilot);
    const double err = resid.squaredNorm() / denom;
    if (!std::isfinite(err))
      throw std::runtime_error("als_fit: non-finite reconstruction error at iteration " +
                               std::to_string(it));
    est.nmse_trace.push_back(err);
    est.iters = it;
    if (std::abs(err - prev) < cfg.tol) {
      est.converged = true;
      break;
    }
    prev = err;
  }
  return est;
}

SensingEstimate als_fit(const Tensor3& y, const CMat& c, const CMat& s_pilot, std::size_t k,
                        const AlsConfig& cfg) {
  const auto report = check_identifiability(y.dim1(), s_pilot.cols(), y.dim2(), y.dim3(), k);
  if (!report.ok) throw IdentifiabilityError("als_fit: " + report.describe());
  const int restarts = std::max(1, cfg.n_restarts);
  SensingEstimate best;
  double best_err = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    const std::uint64_t seed = r == 0 ? cfg.init_seed : mix_seed(cfg.init_seed, r);
    std::optional<AlsInit> start;
    if (r == 0 && cfg.init == AlsInitMethod::Algebraic)
      start = algebraic_init(y, c, s_pilot, k, seed);
    if (!start) {
      std::mt19937_64 rng(seed);
      start = AlsInit{random_cn(rng, y.dim1(), k), random_cn(rng, y.dim3(), k),
                      random_cn(rng, s_pilot.cols(), k)};
    }
    const AlsInit& init = *start;
    SensingEstimate est = als_fit_from(y, c, s_pilot, init, cfg);
    const double err = est.nmse_trace.back();
    if (err < best_err) {
      best_err = err;
      best = std::move(est);
    }
  }
  return best;
}

SensingEstimate remove_sensing_ambiguity(SensingEstimate est) {
  for (Eigen::Index k = 0; k < est.a_r_hat.cols(); ++k) {
    const cdouble ar0 = est.a_r_hat(0, k);
    const cdouble at0 = est.a_t_hat(0, k);
    if (std::abs(ar0) == 0.0 || std::abs(at0) == 0.0)
      throw std::domain_error("remove_sensing_ambiguity: zero in the first row of column " +
                              std::to_string(k));
    est.a_r_hat.col(k) /= ar0;
    est.a_t_hat.col(k) /= at0;
    est.gamma_hat.col(k) *= ar0 * at0;
  }
  return est;
}

std::vector<std::size_t> align_permutation(const CMat& est_cols, const CMat& true_cols) {
  const Eigen::Index K = true_cols.cols();
  if (est_cols.cols() != K || est_cols.rows() != true_cols.rows())
    throw std::invalid_argument("align_permutation: shape mismatch");
  if (K > 8) throw std::invalid_argument("align_permutation: K > 8 exceeds exhaustive search bound");

  // corr(i, j): normalized correlation of estimated column i with true column j.
  Eigen::MatrixXd corr(K, K);
  for (Eigen::Index i = 0; i < K; ++i)
    for (Eigen::Index j = 0; j < K; ++j) {
      const double den = est_cols.col(i).norm() * true_cols.col(j).norm();
      corr(i, j) = den > 0.0 ? std::abs(est_cols.col(i).dot(true_cols.col(j))) / den : 0.0;
    }

  std::vector<std::size_t> perm(K), best;
  std::iota(perm.begin(), perm.end(), 0);
  double best_score = -1.0;
  do {
    double score = 0.0;
    for (Eigen::Index k = 0; k < K; ++k) score += corr(perm[k], k);
    if (score > best_score + 1e-15) {
      best_score = score;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

CMat permute_columns(const CMat& m, const std::vector<std::size_t>& perm) {
  CMat out(m.rows(), perm.size());
  for (std::size_t k = 0; k < perm.size(); ++k) out.col(k) = m.col(perm[k]);
  return out;
}

namespace {

double steering_match(const CVec& a_hat, double norm_hat, double angle_deg) {
  const CMat a = steering_vector(angle_deg, a_hat.size());
  return std::abs(a.col(0).dot(a_hat)) / (std::sqrt(static_cast<double>(a_hat.size())) * norm_hat);
}

}  // namespace

std::vector<double> extract_angles(const CMat& a_hat, double grid_step_deg) {
  constexpr double kLimit = 89.9;
  if (!(grid_step_deg > 0.0)) throw std::invalid_argument("extract_angles: grid step must be > 0");
  const auto n_grid = static_cast<int>(std::floor(2.0 * kLimit / grid_step_deg + 1e-9)) + 1;
  std::vector<double> out;
  out.reserve(a_hat.cols());
  for (Eigen::Index k = 0; k < a_hat.cols(); ++k) {
    const CVec col = a_hat.col(k);
    const double nrm = col.norm();
    if (nrm == 0.0) throw std::invalid_argument("extract_angles: zero column");
    double best_theta = -kLimit;
    double best_val = -1.0;
    for (int g = 0; g < n_grid; ++g) {
      const double theta = -kLimit + g * grid_step_deg;
      const double v = steering_match(col, nrm, theta);
      if (v > best_val) {
        best_val = v;
        best_theta = theta;
      }
    }
    // Golden-section maximization inside the neighbouring grid cells.
    double lo = std::max(-kLimit, best_theta - grid_step_deg);
    double hi = std::min(kLimit, best_theta + grid_step_deg);
    const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = hi - ratio * (hi - lo);
    double x2 = lo + ratio * (hi - lo);
    double f1 = steering_match(col, nrm, x1);
    double f2 = steering_match(col, nrm, x2);
    while (hi - lo > 1e-9) {
      if (f1 < f2) {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + ratio * (hi - lo);
        f2 = steering_match(col, nrm, x2);
      } else {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - ratio * (hi - lo);
        f1 = steering_match(col, nrm, x1);
      }
    }
    const double refined = 0.5 * (lo + hi);
    out.push_back(steering_match(col, nrm, refined) >= best_val ? refined : best_theta);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace isac
