#pragma once

#include "sgpreg/common.hpp"

namespace sgpreg {

enum class KernelFamily { Matern32, SqExpArd };

// Stationary kernel with positive hyperparameters.  Matern-3/2 is isotropic
// (one lengthscale for any input dimension); the squared exponential carries
// one lengthscale per dimension (ARD).
struct KernelSpec {
  KernelFamily family = KernelFamily::SqExpArd;
  double variance = 1.0;        // signal variance sigma^2, k(x,x) = variance
  VectorXd lengthscales;        // size 1 (Matern32) or input dim (SqExpArd)

  static KernelSpec matern32(double variance, double lengthscale);
  static KernelSpec se_ard(double variance, VectorXd lengthscales);

  int n_lengthscales() const { return static_cast<int>(lengthscales.size()); }
  // Throws unless hyperparameters are positive and the lengthscale count
  // matches `input_dim`.
  void validate(int input_dim) const;
};

// Cross-covariance matrix: entry (i, j) = k(a_i, b_j).  Rows are points.
MatrixXd gram(const KernelSpec& kernel, const MatrixXd& a, const MatrixXd& b);

struct GramGradSelector {
  enum class Kind { LogVariance, LogLengthscale, InputA, InputB };
  Kind kind = Kind::LogVariance;
  // Lengthscale index for LogLengthscale, coordinate index for InputA/InputB.
  int index = 0;

  static GramGradSelector log_variance() { return {Kind::LogVariance, 0}; }
  static GramGradSelector log_lengthscale(int q) { return {Kind::LogLengthscale, q}; }
  static GramGradSelector input_a(int q) { return {Kind::InputA, q}; }
  static GramGradSelector input_b(int q) { return {Kind::InputB, q}; }
};

// Entrywise partial derivatives of gram(kernel, a, b).  For InputA the entry
// (i, j) is dk(a_i, b_j)/da_{i,q}; for InputB it is dk(a_i, b_j)/db_{j,q}.
MatrixXd gram_grad(const KernelSpec& kernel, const MatrixXd& a, const MatrixXd& b,
                   const GramGradSelector& selector);

// Reverse-mode accumulation of d<G, K(A,B)> over hyperparameters and inputs.
// If `same_set` is true, A and B alias the same point set and dA collects both
// argument roles (dB is left empty).
struct GramBackward {
  double dlog_variance = 0.0;   // <G, K> (every entry is proportional to sigma^2)
  VectorXd dlog_lengthscales;
  MatrixXd dA;
  MatrixXd dB;
};
GramBackward gram_backward(const KernelSpec& kernel, const MatrixXd& a, const MatrixXd& b,
                           const MatrixXd& g, bool same_set);

// Model-facing effective kernel: the kernel plus a white-noise component of
// magnitude kJitterScale * variance on exactly coincident points.  Keeps
// factorizations stable and low-rank reconstruction identities exact when
// inducing inputs coincide with data inputs.
double kernel_jitter(const KernelSpec& kernel);
// gram(a, b) with the white-noise component on bitwise-equal rows.
MatrixXd gram_eff(const KernelSpec& kernel, const MatrixXd& a, const MatrixXd& b);
// gram(a, a) + jitter * I (rows of one set always coincide with themselves).
MatrixXd gram_eff_self(const KernelSpec& kernel, const MatrixXd& a);

}  // namespace sgpreg
