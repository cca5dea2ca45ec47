#include "sgpreg/optimizer.hpp"

#include <cmath>
#include <random>

#include "doctest.h"
#include "sgpreg/sparse.hpp"
#include "support/oracles.hpp"

using namespace sgpreg;

TEST_CASE("active-bound quadratic") {
  const ObjectiveFn f = [](const VectorXd& x, VectorXd& g) {
    g.resize(1);
    g(0) = -2.0 * (x(0) - 2.0);
    return -(x(0) - 2.0) * (x(0) - 2.0);
  };
  OptimizeConfig cfg;
  cfg.lower = VectorXd::Constant(1, -10.0);
  cfg.upper = VectorXd::Constant(1, 1.0);
  const auto res = maximize(f, VectorXd::Zero(1), cfg);
  CHECK(res.x(0) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(res.converged);
}

TEST_CASE("unconstrained quadratic in ten dimensions") {
  const ObjectiveFn f = [](const VectorXd& x, VectorXd& g) {
    g = -2.0 * x;
    return -x.squaredNorm();
  };
  std::mt19937_64 gen(3);
  const auto res = maximize(f, oracles::random_vector(gen, 10), {});
  CHECK(res.x.norm() < 1e-6);
  CHECK(res.converged);
}

TEST_CASE("negated rosenbrock reaches the optimum") {
  const ObjectiveFn f = [](const VectorXd& x, VectorXd& g) {
    const double a = 1.0 - x(0);
    const double b = x(1) - x(0) * x(0);
    g.resize(2);
    g(0) = -(-2.0 * a - 400.0 * x(0) * b);
    g(1) = -(200.0 * b);
    return -(a * a + 100.0 * b * b);
  };
  VectorXd x0(2);
  x0 << -1.2, 1.0;
  OptimizeConfig cfg;
  cfg.max_iter = 1000;
  cfg.grad_tol = 1e-8;
  const auto res = maximize(f, x0, cfg);
  CHECK(res.iterations <= 1000);
  CHECK(std::abs(res.x(0) - 1.0) < 1e-4);
  CHECK(std::abs(res.x(1) - 1.0) < 1e-4);
}

TEST_CASE("accepted trace is monotone and runs are deterministic") {
  const ObjectiveFn f = [](const VectorXd& x, VectorXd& g) {
    g.resize(2);
    g(0) = -2.0 * x(0) - std::cos(x(0));
    g(1) = -4.0 * x(1);
    return -(x(0) * x(0) + std::sin(x(0)) + 2.0 * x(1) * x(1));
  };
  VectorXd x0(2);
  x0 << 3.0, -2.0;
  const auto a = maximize(f, x0, {});
  const auto b = maximize(f, x0, {});
  for (size_t i = 1; i < a.trace.size(); ++i) CHECK(a.trace[i] >= a.trace[i - 1]);
  REQUIRE(a.trace.size() == b.trace.size());
  for (size_t i = 0; i < a.trace.size(); ++i) CHECK(a.trace[i] == b.trace[i]);
  CHECK((a.x - b.x).norm() == 0.0);
}

TEST_CASE("line-search collapse returns best-so-far with a warning") {
  // Piecewise-linear ridge: the derivative never satisfies the curvature
  // condition near the kink.
  const ObjectiveFn f = [](const VectorXd& x, VectorXd& g) {
    g.resize(1);
    g(0) = x(0) < 1.0 ? 1.0 : -1.0;
    return x(0) < 1.0 ? x(0) : 2.0 - x(0);
  };
  OptimizeConfig cfg;
  cfg.max_iter = 200;
  const auto res = maximize(f, VectorXd::Zero(1), cfg);
  CHECK(!res.warnings.empty());
  CHECK(res.value <= 1.0);
  CHECK(res.value >= 0.0);
}

TEST_CASE("non-finite start is rejected") {
  const ObjectiveFn f = [](const VectorXd& x, VectorXd& g) {
    g = VectorXd::Zero(x.size());
    return std::numeric_limits<double>::quiet_NaN();
  };
  CHECK_THROWS_AS(maximize(f, VectorXd::Zero(2), {}), std::invalid_argument);
}

TEST_CASE("grad_check on a quadratic is tiny") {
  const ObjectiveFn f = [](const VectorXd& x, VectorXd& g) {
    g.resize(2);
    g(0) = 2.0 * x(0) + x(1);
    g(1) = x(0) + 6.0 * x(1);
    return x(0) * x(0) + x(0) * x(1) + 3.0 * x(1) * x(1);
  };
  VectorXd x(2);
  x << 0.7, -0.3;
  CHECK(grad_check(f, x, 1e-5) < 1e-8);
}

TEST_CASE("grad_check flags a wrong gradient") {
  const ObjectiveFn f = [](const VectorXd& x, VectorXd& g) {
    g.resize(1);
    g(0) = 2.0 * x(0) + 0.05;   // off by 0.05
    return x(0) * x(0);
  };
  VectorXd x(1);
  x << 1.3;
  CHECK(grad_check(f, x, 1e-5) > 1e-3);
}

TEST_CASE("grad_check accepts the sparse objective gradients") {
  std::mt19937_64 gen(7);
  SgpState st;
  st.kind = SgpKind::Sgpr;
  st.kernel = KernelSpec::se_ard(1.0, VectorXd::Constant(2, 1.0));
  st.beta = 2.0;
  st.z = oracles::random_matrix(gen, 4, 2);
  const MatrixXd x = oracles::random_matrix(gen, 12, 2);
  const VectorXd y = oracles::random_vector(gen, 12);

  const ObjectiveFn f = [&](const VectorXd& t, VectorXd& g) {
    SgpState s = st;
    s.kernel.variance = std::exp(t(0));
    s.kernel.lengthscales = t.segment(1, 2).array().exp().matrix();
    s.beta = std::exp(t(3));
    s.z = Eigen::Map<const MatrixXd>(t.data() + 4, 4, 2);
    const auto grads = objective_grad(s, x, y);
    g.resize(t.size());
    g(0) = grads.dlog_variance;
    g.segment(1, 2) = grads.dlog_lengthscales;
    g(3) = grads.dlog_beta;
    g.segment(4, 8) = Eigen::Map<const VectorXd>(grads.dz.data(), 8);
    return objective_l1(s, x, y);
  };
  VectorXd t0 = VectorXd::Zero(12);
  t0(3) = std::log(2.0);
  t0.segment(4, 8) = Eigen::Map<const VectorXd>(st.z.data(), 8);
  CHECK(grad_check(f, t0, 1e-5) < 1e-4);
}
