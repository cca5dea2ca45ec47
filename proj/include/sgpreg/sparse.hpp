#pragma once

#include "sgpreg/kernel.hpp"

namespace sgpreg {

enum class SgpKind { SorDtc, Fitc, Sgpr, Svgp };

const char* to_string(SgpKind kind);

// Inducing-point model state.  vu_mean / vu_chol (a lower-triangular factor
// of the variational covariance) are used by the Svgp kind only.
struct SgpState {
  SgpKind kind = SgpKind::SorDtc;
  KernelSpec kernel;
  double beta = 1.0;
  MatrixXd z;          // M x d inducing inputs
  VectorXd vu_mean;
  MatrixXd vu_chol;

  int m() const { return static_cast<int>(z.rows()); }
  void validate(int input_dim) const;
};

// Surrogate training objective for the given kind: the low-rank marginal
// likelihood for SorDtc/Fitc, the trace-corrected variational bound for Sgpr,
// and the full-batch uncollapsed evidence lower bound for Svgp.
double objective_l1(const SgpState& state, const MatrixXd& x, const VectorXd& y);

struct SgpGradients {
  double value = 0.0;   // objective value at the evaluation point
  double dlog_variance = 0.0;
  VectorXd dlog_lengthscales;
  double dlog_beta = 0.0;
  MatrixXd dz;
  VectorXd dvu_mean;   // Svgp
  MatrixXd dvu_chol;   // Svgp; lower triangle, raw entries
};
SgpGradients objective_grad(const SgpState& state, const MatrixXd& x, const VectorXd& y);

struct SgpPrediction {
  VectorXd mean;
  VectorXd var;        // latent variance, clamped at zero
  VectorXd weights;    // mean(x*) = k_z(x*) . weights
};

struct SgpPredictOptions {
  bool observation_noise = false;
  // SorDtc kind only: use the degenerate low-rank variance instead of the
  // prior-corrected one.
  bool degenerate_variance = false;
};

SgpPrediction predict_sgp(const SgpState& state, const MatrixXd& x, const VectorXd& y,
                          const MatrixXd& xstar, const SgpPredictOptions& options = {});

// Frobenius norm of K_nn - K_nm K_mm^-1 K_mn, computed in row blocks without
// materializing the dense N x N residual.
double nystrom_error(const KernelSpec& kernel, const MatrixXd& x, const MatrixXd& z);

// Sum of squared distances from each row of x to its nearest row of z.
double quantization_error(const MatrixXd& x, const MatrixXd& z);

}  // namespace sgpreg
