#pragma once

#include "sgpreg/kernel.hpp"

namespace sgpreg {

// Expectations of kernel matrices under an independent Gaussian distribution
// over the input rows with diagonal covariances:
//   psi0 = sum_n E[k(x_n, x_n)]
//   psi1(n, m) = E[k(x_n, z_m)]
//   psi2(m, m') = sum_n E[k(x_n, z_m) k(x_n, z_m')]
struct QStats {
  double psi0 = 0.0;
  MatrixXd psi1;
  MatrixXd psi2;
};

// Closed forms for the SqExpARD kernel.  `q_means` and `q_vars` are N x Q
// (diagonal variances, allowed to be zero); `z` is M x Q.
QStats psi_stats(const KernelSpec& kernel, const MatrixXd& q_means, const MatrixXd& q_vars,
                 const MatrixXd& z);

// Reverse-mode accumulation of
//   p0bar * psi0 + <p1bar, psi1> + <p2bar, psi2>
// over kernel hyperparameters, variational means/variances, and z.
// Variance gradients are w.r.t. the raw variances.
struct PsiBackward {
  double dlog_variance = 0.0;
  VectorXd dlog_lengthscales;
  MatrixXd dmeans;
  MatrixXd dvars;
  MatrixXd dz;
};
PsiBackward psi_backward(const KernelSpec& kernel, const MatrixXd& q_means,
                         const MatrixXd& q_vars, const MatrixXd& z, double p0bar,
                         const MatrixXd& p1bar, const MatrixXd& p2bar);

}  // namespace sgpreg
