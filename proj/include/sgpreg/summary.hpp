#pragma once

#include "sgpreg/common.hpp"

namespace sgpreg {

// Gaussian fitted to a point set by sample mean and maximum-likelihood
// covariance (divide by n), with a diagonal ridge keeping it invertible.
struct GaussianSummary {
  VectorXd mean;
  MatrixXd cov;            // includes the ridge
  int count = 0;
  double jitter_applied = 0.0;

  int dim() const { return static_cast<int>(mean.size()); }
};

GaussianSummary fit_gaussian_summary(const MatrixXd& points);

// Closed-form KL(p || q) between multivariate Gaussians.
double kl_gaussian(const GaussianSummary& p, const GaussianSummary& q);

// Partial derivatives of kl_gaussian w.r.t. the distribution parameters.
struct KlGrads {
  VectorXd dmean_p, dmean_q;
  MatrixXd dcov_p, dcov_q;   // symmetric
};
KlGrads kl_gaussian_grads(const GaussianSummary& p, const GaussianSummary& q);

// Chains a gradient w.r.t. a summary's (mean, cov) back to the points the
// summary was fitted to.  Includes the ridge's dependence on the covariance
// trace.  `points` must be the set the summary came from.
MatrixXd summary_chain_to_points(const MatrixXd& points, const GaussianSummary& summary,
                                 const VectorXd& dmean, const MatrixXd& dcov);

enum class KlDirection { XZ, ZX };   // XZ: KL(q_x || q_z); ZX: KL(q_z || q_x)

struct ObjectiveBreakdown {
  double recon = 0.0;
  double divergence = 0.0;
  double lambda = 0.0;
  double total = 0.0;
};

// total = recon - lambda * KL between the summaries of xref and z, in the
// requested direction.
ObjectiveBreakdown regularized_objective(double recon, const MatrixXd& xref, const MatrixXd& z,
                                         double lambda, KlDirection direction);

// Divergence value and its gradient w.r.t. the z points (xref held fixed).
struct DivergenceResult {
  double value = 0.0;
  MatrixXd dz;
};
DivergenceResult divergence_and_grad_z(const MatrixXd& xref, const MatrixXd& z,
                                       KlDirection direction);

// Same, but with both sides free (used when the reference set is trainable).
struct DivergenceResult2 {
  double value = 0.0;
  MatrixXd dx;
  MatrixXd dz;
};
DivergenceResult2 divergence_and_grad_xz(const MatrixXd& x, const MatrixXd& z,
                                         KlDirection direction);

// --- natural-parameter convexity probe ---

// Gaussian natural parameters: eta1 = Sigma^-1 mu, eta2 = -1/2 Sigma^-1.
struct NaturalParams {
  VectorXd eta1;
  MatrixXd eta2;   // symmetric negative definite
};
NaturalParams to_natural(const VectorXd& mean, const MatrixXd& cov);
// Throws PreconditionError if eta2 is not negative definite.
void from_natural(const NaturalParams& eta, VectorXd& mean, MatrixXd& cov);

// KL(p || q(eta)) as a function of q's natural parameters.
double kl_vs_natural(const GaussianSummary& p, const NaturalParams& eta);

// Directional second central differences of eta -> KL(p || q(eta)) along
// random directions.  A nonnegative minimum certifies local convexity.
struct ConvexityProbeResult {
  double min_second_difference = 0.0;
  int shrink_events = 0;   // times the step had to shrink to stay feasible
};
ConvexityProbeResult kl_convexity_probe(const GaussianSummary& p_fixed,
                                        const NaturalParams& eta_z, int n_directions,
                                        std::uint64_t seed, double step = 0.05);

// Midpoint convexity along the segment [eta_a, eta_b]:
// returns KL(mid) - (KL(a) + KL(b)) / 2, which convexity keeps <= 0.
double kl_midpoint_convexity_gap(const GaussianSummary& p_fixed, const NaturalParams& eta_a,
                                 const NaturalParams& eta_b);

}  // namespace sgpreg
