#include "sgpreg/summary.hpp"

#include <cmath>

#include "sgpreg/rng.hpp"

namespace sgpreg {

GaussianSummary fit_gaussian_summary(const MatrixXd& points) {
  require(points.rows() >= 1 && points.cols() >= 1, "fit_gaussian_summary: empty input");
  require_finite(points, "fit_gaussian_summary: points");
  const int n = static_cast<int>(points.rows());
  const int d = static_cast<int>(points.cols());

  GaussianSummary s;
  s.count = n;
  s.mean = points.colwise().mean();
  MatrixXd centered = points.rowwise() - s.mean.transpose();
  MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n);
  s.jitter_applied = 1e-6 * std::max(cov.trace() / d, 1.0);
  cov.diagonal().array() += s.jitter_applied;
  s.cov = symmetrized(cov);
  return s;
}

double kl_gaussian(const GaussianSummary& p, const GaussianSummary& q) {
  require(p.dim() == q.dim(), "kl_gaussian: dimension mismatch");
  const int d = p.dim();
  const auto llt_q = chol_spd(q.cov, "kl_gaussian: q covariance");
  const auto llt_p = chol_spd(p.cov, "kl_gaussian: p covariance");
  const VectorXd m = p.mean - q.mean;
  const double trace_term = llt_q.solve(p.cov).trace();
  const double quad = m.dot(llt_q.solve(m));
  return 0.5 * (logdet_from_chol(llt_q) - logdet_from_chol(llt_p) - d + trace_term + quad);
}

KlGrads kl_gaussian_grads(const GaussianSummary& p, const GaussianSummary& q) {
  require(p.dim() == q.dim(), "kl_gaussian_grads: dimension mismatch");
  const int d = p.dim();
  const auto llt_q = chol_spd(q.cov, "kl_gaussian_grads: q covariance");
  const auto llt_p = chol_spd(p.cov, "kl_gaussian_grads: p covariance");
  const MatrixXd qi = llt_q.solve(MatrixXd::Identity(d, d));
  const MatrixXd pi = llt_p.solve(MatrixXd::Identity(d, d));
  const VectorXd m = p.mean - q.mean;
  const VectorXd qim = qi * m;

  KlGrads g;
  g.dmean_p = qim;
  g.dmean_q = -qim;
  g.dcov_p = 0.5 * (qi - pi);
  g.dcov_q = 0.5 * (qi - qi * p.cov * qi - qim * qim.transpose());
  g.dcov_p = symmetrized(g.dcov_p);
  g.dcov_q = symmetrized(g.dcov_q);
  return g;
}

MatrixXd summary_chain_to_points(const MatrixXd& points, const GaussianSummary& summary,
                                 const VectorXd& dmean, const MatrixXd& dcov) {
  const int n = static_cast<int>(points.rows());
  const int d = static_cast<int>(points.cols());
  MatrixXd g_cov = symmetrized(dcov);
  // Ridge magnitude follows the covariance trace once it exceeds the floor.
  const double trace_ml = summary.cov.trace() - d * summary.jitter_applied;
  if (trace_ml / d > 1.0) {
    g_cov.diagonal().array() += 1e-6 / d * dcov.trace();
  }
  MatrixXd centered = points.rowwise() - summary.mean.transpose();
  MatrixXd grad = (2.0 / n) * centered * g_cov;
  grad.rowwise() += (dmean / n).transpose();
  return grad;
}

ObjectiveBreakdown regularized_objective(double recon, const MatrixXd& xref, const MatrixXd& z,
                                         double lambda, KlDirection direction) {
  require(lambda >= 0.0 && std::isfinite(lambda), "regularized_objective: lambda must be >= 0");
  require(z.rows() >= 1, "regularized_objective: need at least one inducing input");
  const GaussianSummary qx = fit_gaussian_summary(xref);
  const GaussianSummary qz = fit_gaussian_summary(z);
  ObjectiveBreakdown b;
  b.recon = recon;
  b.lambda = lambda;
  b.divergence = direction == KlDirection::XZ ? kl_gaussian(qx, qz) : kl_gaussian(qz, qx);
  b.total = b.recon - b.lambda * b.divergence;
  return b;
}

DivergenceResult divergence_and_grad_z(const MatrixXd& xref, const MatrixXd& z,
                                       KlDirection direction) {
  const GaussianSummary qx = fit_gaussian_summary(xref);
  const GaussianSummary qz = fit_gaussian_summary(z);
  DivergenceResult out;
  if (direction == KlDirection::XZ) {
    out.value = kl_gaussian(qx, qz);
    const KlGrads g = kl_gaussian_grads(qx, qz);
    out.dz = summary_chain_to_points(z, qz, g.dmean_q, g.dcov_q);
  } else {
    out.value = kl_gaussian(qz, qx);
    const KlGrads g = kl_gaussian_grads(qz, qx);
    out.dz = summary_chain_to_points(z, qz, g.dmean_p, g.dcov_p);
  }
  return out;
}

DivergenceResult2 divergence_and_grad_xz(const MatrixXd& x, const MatrixXd& z,
                                         KlDirection direction) {
  const GaussianSummary qx = fit_gaussian_summary(x);
  const GaussianSummary qz = fit_gaussian_summary(z);
  DivergenceResult2 out;
  if (direction == KlDirection::XZ) {
    out.value = kl_gaussian(qx, qz);
    const KlGrads g = kl_gaussian_grads(qx, qz);
    out.dx = summary_chain_to_points(x, qx, g.dmean_p, g.dcov_p);
    out.dz = summary_chain_to_points(z, qz, g.dmean_q, g.dcov_q);
  } else {
    out.value = kl_gaussian(qz, qx);
    const KlGrads g = kl_gaussian_grads(qz, qx);
    out.dx = summary_chain_to_points(x, qx, g.dmean_q, g.dcov_q);
    out.dz = summary_chain_to_points(z, qz, g.dmean_p, g.dcov_p);
  }
  return out;
}

NaturalParams to_natural(const VectorXd& mean, const MatrixXd& cov) {
  const int d = static_cast<int>(mean.size());
  const auto llt = chol_spd(cov, "to_natural: covariance");
  NaturalParams eta;
  eta.eta2 = -0.5 * llt.solve(MatrixXd::Identity(d, d));
  eta.eta1 = llt.solve(mean);
  eta.eta2 = symmetrized(eta.eta2);
  return eta;
}

void from_natural(const NaturalParams& eta, VectorXd& mean, MatrixXd& cov) {
  const int d = static_cast<int>(eta.eta1.size());
  const MatrixXd prec = -2.0 * eta.eta2;
  Eigen::LLT<MatrixXd> llt(prec);
  if (llt.info() != Eigen::Success) {
    throw PreconditionError("from_natural: second natural parameter is not negative definite");
  }
  cov = symmetrized(llt.solve(MatrixXd::Identity(d, d)));
  mean = cov * eta.eta1;
}

double kl_vs_natural(const GaussianSummary& p, const NaturalParams& eta) {
  GaussianSummary q;
  from_natural(eta, q.mean, q.cov);
  q.count = 1;
  return kl_gaussian(p, q);
}

namespace {

bool natural_feasible(const NaturalParams& eta) {
  Eigen::LLT<MatrixXd> llt(MatrixXd(-2.0 * eta.eta2));
  return llt.info() == Eigen::Success;
}

NaturalParams perturbed(const NaturalParams& eta, const VectorXd& d1, const MatrixXd& d2,
                        double t) {
  NaturalParams out;
  out.eta1 = eta.eta1 + t * d1;
  out.eta2 = eta.eta2 + t * d2;
  return out;
}

}  // namespace

ConvexityProbeResult kl_convexity_probe(const GaussianSummary& p_fixed,
                                        const NaturalParams& eta_z, int n_directions,
                                        std::uint64_t seed, double step) {
  require(n_directions >= 1, "kl_convexity_probe: need at least one direction");
  if (!natural_feasible(eta_z)) {
    throw PreconditionError("kl_convexity_probe: eta_z is not a valid Gaussian");
  }
  const int d = static_cast<int>(eta_z.eta1.size());
  Rng rng(seed);
  const double f0 = kl_vs_natural(p_fixed, eta_z);
  const double scale = 1.0 + eta_z.eta1.norm() + eta_z.eta2.norm();

  ConvexityProbeResult out;
  out.min_second_difference = std::numeric_limits<double>::infinity();
  for (int k = 0; k < n_directions; ++k) {
    VectorXd d1 = rng.normal_vector(d);
    MatrixXd d2 = symmetrized(rng.normal_matrix(d, d));
    const double norm = std::sqrt(d1.squaredNorm() + d2.squaredNorm());
    d1 /= norm;
    d2 /= norm;
    double h = step * scale;
    // Shrink until both endpoints stay inside the natural-parameter cone.
    int guard = 0;
    while ((!natural_feasible(perturbed(eta_z, d1, d2, h)) ||
            !natural_feasible(perturbed(eta_z, d1, d2, -h))) &&
           guard < 60) {
      h *= 0.5;
      ++guard;
      ++out.shrink_events;
    }
    if (guard >= 60) continue;
    const double fp = kl_vs_natural(p_fixed, perturbed(eta_z, d1, d2, h));
    const double fm = kl_vs_natural(p_fixed, perturbed(eta_z, d1, d2, -h));
    const double second = (fp - 2.0 * f0 + fm) / (h * h);
    out.min_second_difference = std::min(out.min_second_difference, second);
  }
  return out;
}

double kl_midpoint_convexity_gap(const GaussianSummary& p_fixed, const NaturalParams& eta_a,
                                 const NaturalParams& eta_b) {
  NaturalParams mid;
  mid.eta1 = 0.5 * (eta_a.eta1 + eta_b.eta1);
  mid.eta2 = 0.5 * (eta_a.eta2 + eta_b.eta2);
  const double fa = kl_vs_natural(p_fixed, eta_a);
  const double fb = kl_vs_natural(p_fixed, eta_b);
  const double fm = kl_vs_natural(p_fixed, mid);
  return fm - 0.5 * (fa + fb);
}

}  // namespace sgpreg
