// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "isac/sensing_als.hpp"
#include "isac/signal_model.hpp"
#include "test_util.hpp"

#include <algorithm>
#include <numeric>

using namespace isac;
using isac::testing::random_cmat;

namespace {

struct Instance {
  SensingScene scene;
  TransmitFrame frame;
  Tensor3 y;
};

Instance reference_instance(std::uint64_t seed) {
  AngleConfig fixed{AngleConfig::Mode::Fixed, {15.0, 27.0}, {-37.0, 65.0}, -60.0, 60.0};
  Instance in;
  in.scene = sample_scene(2, 3, 2, 2, 1.0, fixed, seed);
  in.frame = sample_frame(8, 2, 3, 4, seed + 1000);
  in.y = sensing_forward(in.scene, in.frame);
  return in;
}

double tensor_rel_err(const Tensor3& a, const Tensor3& b) {
  return std::sqrt((a - b).squared_norm() / b.squared_norm());
}

bool brute_identifiable(std::size_t mr, std::size_t mt, std::size_t p, std::size_t n,
                        std::size_t k) {
  return n * p >= k && n * p * mr >= mt * k && p * mr >= k;
}

}  // namespace

TEST_CASE("check_identifiability") {
  CHECK(check_identifiability(2, 2, 8, 3, 2).ok);
  auto r = check_identifiability(2, 2, 8, 3, 25);
  CHECK(!r.ok);
  CHECK(r.describe().find("NP") != std::string::npos);
  auto r2 = check_identifiability(1, 4, 2, 1, 1);
  CHECK(!r2.ok);
  CHECK(r2.violations.size() == 1);

  int mismatches = 0;
  for (std::size_t mr = 1; mr <= 6; ++mr)
    for (std::size_t mt = 1; mt <= 6; ++mt)
      for (std::size_t p = 1; p <= 6; ++p)
        for (std::size_t n = 1; n <= 6; ++n)
          for (std::size_t k = 1; k <= 6; ++k)
            mismatches += check_identifiability(mr, mt, p, n, k).ok != brute_identifiable(mr, mt, p, n, k);
  CHECK(mismatches == 0);
}

TEST_CASE("build_F against slice concatenation") {
  Instance in = reference_instance(1);
  CMat f = build_F(in.scene.gamma, in.scene.a_t(), in.frame.c, in.frame.s_pilot);
  REQUIRE(f.rows() == 2);
  REQUIRE(f.cols() == 24);
  CMat y1 = unfold1_flat(in.y);
  CHECK((in.scene.a_r() * f - y1).norm() / y1.norm() < 1e-12);

  // Block n by its definition.
  for (Eigen::Index n = 0; n < 3; ++n) {
    CMat blk = row_diag(in.scene.gamma, std::size_t(n)) * in.scene.a_t().transpose() *
               row_diag(in.frame.c, std::size_t(n)) * in.frame.s_pilot.transpose();
    CHECK((f.middleCols(n * 8, 8) - blk).norm() < 1e-13);
  }

  CMat ones = build_F(CMat::Ones(2, 1), CMat::Ones(3, 1), CMat::Ones(2, 3), CMat::Ones(4, 3));
  CHECK((ones - CMat::Constant(1, 8, cdouble(3.0))).norm() == 0.0);
  CHECK(build_F(CMat::Ones(1, 2), CMat::Ones(2, 2), CMat::Ones(1, 2), CMat::Ones(5, 2)).cols() == 5);
}

TEST_CASE("estimate_AR") {
  Instance in = reference_instance(2);
  CMat f = build_F(in.scene.gamma, in.scene.a_t(), in.frame.c, in.frame.s_pilot);
  CHECK((estimate_AR(unfold1_flat(in.y), f) - in.scene.a_r()).norm() < 1e-10);

  std::mt19937_64 rng(3);
  CMat y = random_cmat(3, 4, rng);
  CHECK((estimate_AR(y, CMat::Identity(4, 4)) - y).norm() < 1e-12);

  CMat yo = random_cmat(3, 20, rng), fo = random_cmat(4, 20, rng);
  CMat ar = estimate_AR(yo, fo);
  CHECK(((yo - ar * fo) * fo.adjoint()).norm() < 1e-9);
}

TEST_CASE("estimate_AT") {
  Instance in = reference_instance(4);
  CMat m = build_M(in.scene.a_r(), in.scene.gamma, in.frame.c, in.frame.s_pilot);
  CHECK(m.rows() == 48);
  CHECK(m.cols() == 4);
  CMat lhs = m * vec(in.scene.a_t().transpose());
  CMat y = stack_slices(in.y);
  CHECK((lhs - y).norm() / y.norm() < 1e-12);
  CHECK((estimate_AT(in.y, in.scene.a_r(), in.scene.gamma, in.frame.c, in.frame.s_pilot) -
         in.scene.a_t()).norm() < 1e-10);

  // Scalar case: y_p = a_r g a_t c s_p.
  const cdouble ar(1.5, -0.5), g(0.3, 0.9), at(-0.7, 0.2), c(0.4, 0.4);
  CMat s(3, 1);
  s << 1.0, cdouble(0, 1), cdouble(-1, 1);
  Tensor3 t(1, 3, 1);
  for (std::size_t p = 0; p < 3; ++p) t(0, p, 0) = ar * g * at * c * s(Eigen::Index(p), 0);
  CMat est = estimate_AT(t, CMat::Constant(1, 1, ar), CMat::Constant(1, 1, g),
                         CMat::Constant(1, 1, c), s);
  CHECK(std::abs(est(0, 0) - at) < 1e-12);

  Tensor3 small(1, 2, 1);
  CHECK_THROWS_AS(estimate_AT(small, CMat::Ones(1, 1), CMat::Ones(1, 1), CMat::Ones(1, 4),
                              CMat::Ones(2, 4)),
                  IdentifiabilityError);
}

TEST_CASE("estimate_Gamma") {
  Instance in = reference_instance(5);
  CHECK((estimate_Gamma(in.y, in.scene.a_r(), in.scene.a_t(), in.frame.c, in.frame.s_pilot) -
         in.scene.gamma).norm() < 1e-10);
  for (std::size_t n = 0; n < 3; ++n) {
    CMat g = in.frame.s_pilot * row_diag(in.frame.c, n) * in.scene.a_t();
    CMat lhs = khatri_rao(g, in.scene.a_r()) * in.scene.gamma.row(Eigen::Index(n)).transpose();
    CMat rhs = vec(frontal_slice(in.y, n));
    CHECK((lhs - rhs).norm() / rhs.norm() < 1e-12);
  }

  // K = 1: the per-slot LS solution is the projection onto one basis vector.
  std::mt19937_64 rng(6);
  Tensor3 noisy = isac::testing::random_tensor(2, 4, 3, rng);
  CMat ar = random_cmat(2, 1, rng), at = random_cmat(2, 1, rng), c = random_cmat(3, 2, rng),
       s = random_cmat(4, 2, rng);
  CMat gh = estimate_Gamma(noisy, ar, at, c, s);
  for (std::size_t n = 0; n < 3; ++n) {
    CMat basis = khatri_rao(s * row_diag(c, n) * at, ar);
    cdouble ls = (basis.adjoint() * vec(frontal_slice(noisy, n)))(0, 0) / basis.squaredNorm();
    CHECK(std::abs(gh(Eigen::Index(n), 0) - ls) < 1e-12);
  }

  Tensor3 t(1, 1, 1);
  CHECK_THROWS_AS(estimate_Gamma(t, CMat::Ones(1, 2), CMat::Ones(1, 2), CMat::Ones(1, 1),
                                 CMat::Ones(1, 1)),
                  IdentifiabilityError);
}

TEST_CASE("paratuck_reconstruct equals the forward model") {
  Instance in = reference_instance(6);
  Tensor3 r = paratuck_reconstruct(in.scene.a_r(), in.scene.gamma, in.scene.a_t(), in.frame.c,
                                   in.frame.s_pilot);
  CHECK(tensor_rel_err(r, in.y) < 1e-12);
}

TEST_CASE("als_fit from the true factors is a fixed point") {
  Instance in = reference_instance(7);
  AlsInit init{in.scene.a_r(), in.scene.gamma, in.scene.a_t()};
  SensingEstimate est = als_fit_from(in.y, in.frame.c, in.frame.s_pilot, init);
  CHECK(est.converged);
  CHECK(est.iters <= 2);
  CHECK(est.nmse_trace.back() < 1e-20);
}

TEST_CASE("als_fit noiseless recovery with the algebraic start") {
  AlsConfig cfg;
  cfg.init = AlsInitMethod::Algebraic;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Instance in = reference_instance(100 + seed);
    cfg.init_seed = seed;
    SensingEstimate est =
        remove_sensing_ambiguity(als_fit(in.y, in.frame.c, in.frame.s_pilot, 2, cfg));
    CHECK(est.converged);
    CHECK(est.nmse_trace.back() < 1e-10);
    auto th = extract_angles(est.a_r_hat);
    auto ph = extract_angles(est.a_t_hat);
    CHECK(std::abs(th[0] - 15.0) < 0.1);
    CHECK(std::abs(th[1] - 27.0) < 0.1);
    CHECK(std::abs(ph[0] + 37.0) < 0.1);
    CHECK(std::abs(ph[1] - 65.0) < 0.1);
  }
}

TEST_CASE("als_fit trace is non-increasing with random starts") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Instance in = reference_instance(200 + seed);
    Tensor3 y = add_noise(in.y, 10.0, seed);
    AlsConfig cfg;
    cfg.init_seed = seed;
    cfg.max_iters = 200;
    SensingEstimate est = als_fit(y, in.frame.c, in.frame.s_pilot, 2, cfg);
    for (std::size_t i = 1; i < est.nmse_trace.size(); ++i)
      CHECK(est.nmse_trace[i] <= est.nmse_trace[i - 1] + 1e-9);
  }
}

TEST_CASE("als_fit restarts keep the best fit") {
  Instance in = reference_instance(300);
  Tensor3 y = add_noise(in.y, 5.0, 1);
  AlsConfig one;
  one.init_seed = 9;
  AlsConfig many = one;
  many.n_restarts = 4;
  auto a = als_fit(y, in.frame.c, in.frame.s_pilot, 2, one);
  auto b = als_fit(y, in.frame.c, in.frame.s_pilot, 2, many);
  CHECK(b.nmse_trace.back() <= a.nmse_trace.back());
}

TEST_CASE("als_fit rejects unidentifiable and invalid settings") {
  Instance in = reference_instance(8);
  CHECK_THROWS_AS(als_fit(in.y, in.frame.c, in.frame.s_pilot, 25), IdentifiabilityError);
  AlsConfig bad;
  bad.tol = 0.0;
  CHECK_THROWS(als_fit(in.y, in.frame.c, in.frame.s_pilot, 2, bad));
}

TEST_CASE("algebraic_init availability") {
  Instance in = reference_instance(9);
  CHECK(algebraic_init(in.y, in.frame.c, in.frame.s_pilot, 2, 1).has_value());
  CHECK(!algebraic_init(in.y, in.frame.c, in.frame.s_pilot, 3, 1).has_value());
}

TEST_CASE("remove_sensing_ambiguity") {
  Instance in = reference_instance(10);
  SensingEstimate truth;
  truth.a_r_hat = in.scene.a_r();
  truth.a_t_hat = in.scene.a_t();
  truth.gamma_hat = in.scene.gamma;
  SensingEstimate same = remove_sensing_ambiguity(truth);
  CHECK((same.a_r_hat - truth.a_r_hat).norm() < 1e-15);
  CHECK((same.gamma_hat - truth.gamma_hat).norm() < 1e-15);

  SensingEstimate scaled = truth;
  scaled.a_r_hat.col(1) *= 2.0;
  scaled.gamma_hat.col(1) *= 0.5;
  SensingEstimate back = remove_sensing_ambiguity(scaled);
  CHECK((back.a_r_hat - truth.a_r_hat).norm() < 1e-14);
  CHECK((back.gamma_hat - truth.gamma_hat).norm() < 1e-14);

  std::mt19937_64 rng(11);
  SensingEstimate rnd;
  rnd.a_r_hat = random_cmat(2, 2, rng);
  rnd.a_t_hat = random_cmat(2, 2, rng);
  rnd.gamma_hat = random_cmat(3, 2, rng);
  SensingEstimate norm = remove_sensing_ambiguity(rnd);
  CHECK((norm.a_r_hat.row(0) - CMat::Ones(1, 2)).norm() < 1e-12);
  Tensor3 before = paratuck_reconstruct(rnd.a_r_hat, rnd.gamma_hat, rnd.a_t_hat, in.frame.c, in.frame.s_pilot);
  Tensor3 after = paratuck_reconstruct(norm.a_r_hat, norm.gamma_hat, norm.a_t_hat, in.frame.c, in.frame.s_pilot);
  CHECK(tensor_rel_err(after, before) < 1e-12);

  rnd.a_r_hat(0, 0) = 0.0;
  CHECK_THROWS(remove_sensing_ambiguity(rnd));
}

TEST_CASE("align_permutation") {
  std::mt19937_64 rng(12);
  CMat a = random_cmat(4, 3, rng);
  CHECK(align_permutation(a, a) == std::vector<std::size_t>{0, 1, 2});

  CMat two = random_cmat(3, 2, rng);
  CHECK(align_permutation(permute_columns(two, {1, 0}), two) == std::vector<std::size_t>{1, 0});

  Eigen::HouseholderQR<CMat> qr(random_cmat(5, 3, rng));
  CMat q = qr.householderQ() * CMat::Identity(5, 3);
  std::vector<std::size_t> shuffle{2, 0, 1};
  CMat shuffled(5, 3);
  for (std::size_t k = 0; k < 3; ++k) shuffled.col(Eigen::Index(shuffle[k])) = q.col(Eigen::Index(k)) * cdouble(0.5, 2.0);
  CHECK(align_permutation(shuffled, q) == shuffle);

  CHECK_THROWS(align_permutation(random_cmat(2, 9, rng), random_cmat(2, 9, rng)));
}

TEST_CASE("extract_angles") {
  CHECK(std::abs(extract_angles(steering_vector(15.0, 2))[0] - 15.0) < 0.05);
  CMat scaled = steering_vector(27.0, 4) * std::polar(3.0, std::numbers::pi / 7);
  CHECK(std::abs(extract_angles(scaled)[0] - 27.0) < 0.05);
  auto both = extract_angles(build_steering_matrix({65.0, -37.0}, 2));
  CHECK(std::abs(both[0] + 37.0) < 0.05);
  CHECK(std::abs(both[1] - 65.0) < 0.05);

  std::mt19937_64 rng(13);
  CMat noisy = build_steering_matrix({-10.0, 40.0}, 3) + 0.2 * random_cmat(3, 2, rng);
  CMat rescaled = noisy;
  rescaled.col(0) *= cdouble(-2.0, 0.5);
  rescaled.col(1) *= cdouble(0.0, 7.0);
  auto x = extract_angles(noisy), y = extract_angles(rescaled);
  CHECK(std::abs(x[0] - y[0]) < 1e-6);
  CHECK(std::abs(x[1] - y[1]) < 1e-6);
}
