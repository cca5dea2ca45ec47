#include "sgpreg/exact_gp.hpp"

#include <cmath>
#include <numbers>

namespace sgpreg {

namespace {

constexpr double kLog2Pi = 1.8378770664093454;

Eigen::LLT<MatrixXd> noise_cov_chol(const GprModel& model) {
  MatrixXd a = gram_eff_self(model.kernel, model.x);
  a.diagonal().array() += 1.0 / model.beta;
  return chol_spd(a, "log_marginal_l0: singular covariance");
}

}  // namespace

void GprModel::validate() const {
  require(x.rows() >= 1, "GprModel: need at least one observation");
  require(x.rows() == y.size(), "GprModel: inputs/observations size mismatch");
  require(beta > 0.0 && std::isfinite(beta), "GprModel: beta must be positive");
  kernel.validate(static_cast<int>(x.cols()));
  require_finite(x, "GprModel: inputs");
  require_finite(y, "GprModel: observations");
}

double log_marginal_l0(const GprModel& model) {
  model.validate();
  const auto llt = noise_cov_chol(model);
  const VectorXd alpha = llt.solve(model.y);
  const double n = static_cast<double>(model.y.size());
  return -0.5 * model.y.dot(alpha) - 0.5 * logdet_from_chol(llt) - 0.5 * n * kLog2Pi;
}

VectorXd log_marginal_l0_grad(const GprModel& model) {
  model.validate();
  const auto llt = noise_cov_chol(model);
  const VectorXd alpha = llt.solve(model.y);
  const int n = static_cast<int>(model.y.size());
  const MatrixXd ainv = llt.solve(MatrixXd::Identity(n, n));
  const MatrixXd g = 0.5 * (alpha * alpha.transpose() - ainv);

  const int n_ls = model.kernel.n_lengthscales();
  VectorXd grad(2 + n_ls);
  // The jittered kernel matrix scales linearly in sigma^2.
  grad(0) = (g.array() * gram_eff_self(model.kernel, model.x).array()).sum();
  for (int q = 0; q < n_ls; ++q) {
    const MatrixXd dk =
        gram_grad(model.kernel, model.x, model.x, GramGradSelector::log_lengthscale(q));
    grad(1 + q) = (g.array() * dk.array()).sum();
  }
  grad(1 + n_ls) = -g.trace() / model.beta;
  return grad;
}

GpPrediction predict_full(const GprModel& model, const MatrixXd& xstar, bool observation_noise) {
  model.validate();
  require(xstar.cols() == model.x.cols(), "predict_full: input dimension mismatch");
  require_finite(xstar, "predict_full: prediction inputs");
  const auto llt = noise_cov_chol(model);
  const VectorXd alpha = llt.solve(model.y);
  const MatrixXd kxs = gram(model.kernel, model.x, xstar);   // N x n*
  GpPrediction out;
  out.mean = kxs.transpose() * alpha;
  const MatrixXd v = llt.matrixL().solve(kxs);
  out.var = (model.kernel.variance - v.colwise().squaredNorm().transpose().array())
                .max(0.0)
                .matrix();
  if (observation_noise) out.var.array() += 1.0 / model.beta;
  return out;
}

}  // namespace sgpreg
