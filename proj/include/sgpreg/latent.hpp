#pragma once

#include <vector>

#include "sgpreg/psi.hpp"
#include "sgpreg/summary.hpp"

namespace sgpreg {

enum class LvmKind { Lsgpr, Lsvgp };

const char* to_string(LvmKind kind);

// Latent-variable sparse GP state.  The embedding prior is fixed at N(0, I).
// q(X) has diagonal covariances; q(u_d) (Lsvgp only) is Gaussian with a
// lower-triangular covariance factor per output dimension.
struct LvmState {
  KernelSpec kernel;              // SqExpArd with Q lengthscales
  double beta = 1.0;
  MatrixXd q_x_means;             // N x Q
  MatrixXd q_x_vars;              // N x Q, positive
  MatrixXd z;                     // M x Q
  std::vector<VectorXd> q_u_means;
  std::vector<MatrixXd> q_u_chols;

  int n() const { return static_cast<int>(q_x_means.rows()); }
  int q() const { return static_cast<int>(q_x_means.cols()); }
  int m() const { return static_cast<int>(z.rows()); }
  void validate(int d_out, bool need_qu) const;
};

// KL(q(X) || N(0, I)) for the diagonal variational embedding distribution.
double kl_qx_prior(const LvmState& state);

// Sum over output dimensions of KL(q(u_d) || p(u_d)).
double kl_qu_prior(const LvmState& state);

// Collapsed variational bound (optimal q(U) marginalized analytically).
double elbo_lsgpr(const LvmState& state, const MatrixXd& y);

// Uncollapsed bound with explicit q(U).
double elbo_lsvgp(const LvmState& state, const MatrixXd& y);

struct LvmGradients {
  double value = 0.0;   // objective value at the evaluation point
  double dlog_variance = 0.0;
  VectorXd dlog_lengthscales;
  double dlog_beta = 0.0;
  MatrixXd dq_x_means;
  MatrixXd dq_x_vars;             // raw variances
  MatrixXd dz;
  std::vector<VectorXd> dq_u_means;
  std::vector<MatrixXd> dq_u_chols;   // raw lower-triangular entries
};

LvmGradients elbo_lsgpr_grad(const LvmState& state, const MatrixXd& y);
LvmGradients elbo_lsvgp_grad(const LvmState& state, const MatrixXd& y);

// Divergence-regularized bound: chosen ELBO minus lambda times the KL between
// the Gaussian summaries of the variational means and the inducing inputs.
ObjectiveBreakdown melbo(const LvmState& state, LvmKind kind, const MatrixXd& y, double lambda,
                         KlDirection direction);
LvmGradients melbo_grad(const LvmState& state, LvmKind kind, const MatrixXd& y, double lambda,
                        KlDirection direction);

// Closed-form optimal q(U) for the current (kernel, beta, Z, q(X)).
void set_optimal_qu(LvmState& state, const MatrixXd& y);

// Posterior-mean reconstruction of all observations at the plugged-in
// variational means.  For Lsgpr the optimal q(U) is used.
MatrixXd lvm_reconstruct(const LvmState& state, LvmKind kind, const MatrixXd& y);

// Averaged symmetric KL between per-dimension Gaussian fits of the embedding
// estimate and the inducing inputs.
double askl(const MatrixXd& x_hat, const MatrixXd& z);

// Empirical-Bayes variant: a data-dependent Gaussian prior over the inducing
// inputs with an isotropic variational distribution q(z_m) = N(nu_m, eps I).
struct EbState {
  MatrixXd nu;          // M x Q variational means of q(Z)
  double epsilon = 1e-3;
  double k1 = 0.0;      // admissible band for det of the nu summary covariance
  double k2 = 0.0;
  void validate() const;
};

struct EbBounds {
  double elbo_eb = 0.0;    // bound with the exact KL(q(Z) || p(Z)) term
  double lelbo_eb = 0.0;   // looser bound via the A/B/C decomposition
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
};

// `mc_samples` > 0 replaces the plug-in likelihood term by an antithetic
// Monte Carlo average over q(Z); 0 keeps the deterministic plug-in Z = nu.
EbBounds eb_bounds(const LvmState& state, const EbState& eb, const MatrixXd& y,
                   int mc_samples = 0, std::uint64_t seed = 0);

LvmGradients elbo_eb_grad(const LvmState& state, const EbState& eb, const MatrixXd& y);
LvmGradients lelbo_eb_grad(const LvmState& state, const EbState& eb, const MatrixXd& y);

// |(LELBO_EB(eps) - eps-dependent offset) - MELBO(lambda = M, ZX)| at Z = nu,
// for each epsilon in the sequence.  Converges to zero as eps -> 0.
std::vector<double> theorem3_discrepancy(const LvmState& state, const EbState& eb,
                                         const MatrixXd& y,
                                         const std::vector<double>& eps_sequence,
                                         int mc_samples = 0, std::uint64_t seed = 0);

// Exactness check of the M-point telescoped KL identity: returns the
// relative gap between M * kl_gaussian(summary(z), summary(mu)) and its
// expanded per-point form.
double lemma2_identity_gap(const MatrixXd& z, const MatrixXd& mu);

}  // namespace sgpreg
