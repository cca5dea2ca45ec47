#include "sgpreg/exact_gp.hpp"

#include <cmath>
#include <random>

#include "doctest.h"
#include "support/oracles.hpp"

using namespace sgpreg;

namespace {

GprModel one_point_model(double y) {
  GprModel m;
  m.kernel = KernelSpec::se_ard(1.0, VectorXd::Ones(1));
  m.beta = 1.0;
  m.x = MatrixXd::Zero(1, 1);
  m.y = VectorXd::Constant(1, y);
  return m;
}

GprModel random_model(std::mt19937_64& gen, int n, int d, bool matern) {
  GprModel m;
  m.kernel = matern ? KernelSpec::matern32(1.4, 0.9)
                    : KernelSpec::se_ard(0.8, VectorXd::Constant(d, 1.2));
  m.beta = 2.3;
  m.x = 2.0 * oracles::random_matrix(gen, n, d);
  // Draw y from the model itself.
  MatrixXd cov = MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      cov(i, j) = (m.kernel.family == KernelFamily::Matern32
                       ? (1.0 + std::sqrt(3.0) * (m.x.row(i) - m.x.row(j)).norm() / 0.9) *
                             std::exp(-std::sqrt(3.0) * (m.x.row(i) - m.x.row(j)).norm() / 0.9) *
                             1.4
                       : 0.8 * std::exp(-(m.x.row(i) - m.x.row(j)).squaredNorm() / (2 * 1.44)));
  cov.diagonal().array() += 1.0 / m.beta;
  const Eigen::LLT<MatrixXd> llt(cov);
  m.y = llt.matrixL() * oracles::random_vector(gen, n);
  return m;
}

}  // namespace

TEST_CASE("one-point log marginal values") {
  CHECK(log_marginal_l0(one_point_model(0.0)) ==
        doctest::Approx(-0.5 * std::log(4.0 * M_PI)).epsilon(1e-6));
  CHECK(log_marginal_l0(one_point_model(std::sqrt(2.0))) ==
        doctest::Approx(-0.5 * std::log(4.0 * M_PI) - 0.5).epsilon(1e-6));
}

TEST_CASE("log marginal matches a dense gaussian-density oracle") {
  std::mt19937_64 gen(3);
  const GprModel m = random_model(gen, 50, 2, false);
  // Same covariance construction, independent density evaluation (LU).
  MatrixXd cov = gram_eff_self(m.kernel, m.x);
  cov.diagonal().array() += 1.0 / m.beta;
  const double expected = oracles::dense_mvn_logpdf(m.y, VectorXd::Zero(50), cov);
  const double got = log_marginal_l0(m);
  CHECK(std::abs(got - expected) <= 1e-10 * std::abs(expected));
}

TEST_CASE("log marginal is invariant under row permutation") {
  std::mt19937_64 gen(5);
  const GprModel m = random_model(gen, 20, 2, true);
  const double base = log_marginal_l0(m);
  GprModel p = m;
  std::vector<int> perm(20);
  for (int i = 0; i < 20; ++i) perm[i] = (i * 7 + 3) % 20;
  for (int i = 0; i < 20; ++i) {
    p.x.row(i) = m.x.row(perm[i]);
    p.y(i) = m.y(perm[i]);
  }
  CHECK(log_marginal_l0(p) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("gradient of the log marginal matches finite differences") {
  std::mt19937_64 gen(7);
  for (int rep = 0; rep < 3; ++rep) {
    const GprModel m = random_model(gen, 15, 2, rep % 2 == 0);
    const int n_ls = m.kernel.n_lengthscales();
    VectorXd theta(2 + n_ls);
    theta(0) = std::log(m.kernel.variance);
    for (int q = 0; q < n_ls; ++q) theta(1 + q) = std::log(m.kernel.lengthscales(q));
    theta(1 + n_ls) = std::log(m.beta);
    const auto eval = [&](const VectorXd& t) {
      GprModel mm = m;
      mm.kernel.variance = std::exp(t(0));
      for (int q = 0; q < n_ls; ++q) mm.kernel.lengthscales(q) = std::exp(t(1 + q));
      mm.beta = std::exp(t(1 + n_ls));
      return log_marginal_l0(mm);
    };
    const VectorXd fd = oracles::finite_difference(eval, theta, 1e-6);
    const VectorXd analytic = log_marginal_l0_grad(m);
    CHECK(oracles::max_rel_error(analytic, fd) < 1e-4);
  }
}

TEST_CASE("posterior interpolates in the noiseless limit") {
  // Well-separated inputs keep the kernel matrix far from singular, so the
  // beta -> inf limit is dominated by the data rather than the ridge.
  std::mt19937_64 gen(11);
  GprModel m;
  m.kernel = KernelSpec::matern32(1.0, 0.3);
  m.beta = 1e10;
  m.x = VectorXd::LinSpaced(6, 0.0, 5.0);
  m.y = oracles::random_vector(gen, 6);
  const auto pred = predict_full(m, m.x);
  CHECK((pred.mean - m.y).lpNorm<Eigen::Infinity>() < 1e-4);
}

TEST_CASE("posterior reverts to the prior far from data") {
  GprModel m;
  m.kernel = KernelSpec::se_ard(1.5, VectorXd::Constant(1, 0.3));
  m.beta = 10.0;
  m.x = MatrixXd::Zero(3, 1);
  m.x << 0.0, 0.1, 0.2;
  m.y = VectorXd::Ones(3);
  MatrixXd far(1, 1);
  far << 50.0;
  const auto pred = predict_full(m, far);
  CHECK(std::abs(pred.mean(0)) < 1e-10);
  CHECK(pred.var(0) == doctest::Approx(1.5).epsilon(1e-10));
}

TEST_CASE("predictive variance never exceeds the prior variance") {
  std::mt19937_64 gen(13);
  const GprModel m = random_model(gen, 25, 2, true);
  const MatrixXd xs = 3.0 * oracles::random_matrix(gen, 40, 2);
  const auto pred = predict_full(m, xs);
  CHECK((pred.var.array() <= m.kernel.variance + 1e-8).all());
  CHECK((pred.var.array() >= 0.0).all());
  const auto noisy = predict_full(m, xs, true);
  CHECK((noisy.var - pred.var).isApproxToConstant(1.0 / m.beta, 1e-12));
}

TEST_CASE("model validation rejects broken inputs") {
  GprModel m = one_point_model(0.0);
  m.beta = -1.0;
  CHECK_THROWS_AS(log_marginal_l0(m), std::invalid_argument);
  m = one_point_model(0.0);
  m.y.resize(2);
  CHECK_THROWS_AS(log_marginal_l0(m), std::invalid_argument);
}
