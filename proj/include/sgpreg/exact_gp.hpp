#pragma once

#include "sgpreg/kernel.hpp"

namespace sgpreg {

// Full GP regression model with Gaussian noise of precision beta.
struct GprModel {
  KernelSpec kernel;
  double beta = 1.0;
  MatrixXd x;   // N x d training inputs
  VectorXd y;   // N observations

  void validate() const;
};

// Exact log marginal likelihood log N(y | 0, K_nn + beta^-1 I).
double log_marginal_l0(const GprModel& model);

// Gradient of the log marginal over (log variance, log lengthscales..., log beta).
VectorXd log_marginal_l0_grad(const GprModel& model);

struct GpPrediction {
  VectorXd mean;
  VectorXd var;   // latent-function variance, clamped at zero
};

// Posterior mean/variance of the latent function at `xstar`.  When
// `observation_noise` is set, beta^-1 is added to the variances.
GpPrediction predict_full(const GprModel& model, const MatrixXd& xstar,
                          bool observation_noise = false);

}  // namespace sgpreg
