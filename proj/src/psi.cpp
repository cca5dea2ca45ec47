#include "sgpreg/psi.hpp"

#include <cmath>

namespace sgpreg {

namespace {

void validate_psi_inputs(const KernelSpec& kernel, const MatrixXd& mu, const MatrixXd& s,
                         const MatrixXd& z) {
  require(kernel.family == KernelFamily::SqExpArd,
          "psi_stats: kernel expectations are implemented for SqExpARD only");
  kernel.validate(static_cast<int>(mu.cols()));
  require(mu.rows() == s.rows() && mu.cols() == s.cols(),
          "psi_stats: means/variances shape mismatch");
  require(z.cols() == mu.cols(), "psi_stats: latent dimension mismatch");
  require(mu.rows() >= 1 && z.rows() >= 1, "psi_stats: empty inputs");
  require_finite(mu, "psi_stats: means");
  require_finite(s, "psi_stats: variances");
  require_finite(z, "psi_stats: z");
  require((s.array() >= 0.0).all(), "psi_stats: variances must be nonnegative");
}

}  // namespace

QStats psi_stats(const KernelSpec& kernel, const MatrixXd& mu, const MatrixXd& s,
                 const MatrixXd& z) {
  validate_psi_inputs(kernel, mu, s, z);
  const int n = static_cast<int>(mu.rows());
  const int m = static_cast<int>(z.rows());
  const int q_dim = static_cast<int>(mu.cols());
  const double sigma2 = kernel.variance;

  QStats out;
  out.psi0 = n * sigma2;

  // psi1: log-accumulate over latent dimensions.
  MatrixXd log_psi1 = MatrixXd::Constant(n, m, std::log(sigma2));
  for (int q = 0; q < q_dim; ++q) {
    const double l2 = kernel.lengthscales(q) * kernel.lengthscales(q);
    const VectorXd d = s.col(q).array() + l2;                       // n
    MatrixXd e = mu.col(q).replicate(1, m);
    e.rowwise() -= z.col(q).transpose();                            // mu_nq - z_mq
    const VectorXd log_scale = (0.5 * (std::log(l2) - d.array().log())).matrix();
    log_psi1.colwise() += log_scale;
    log_psi1 -= ((e.array().square().colwise() / d.array()) * 0.5).matrix();
  }
  out.psi1 = log_psi1.array().exp().matrix();

  // psi2: accumulate M x M blocks over n.
  MatrixXd cross = MatrixXd::Zero(m, m);   // sum_q Delta^2 / (4 l_q^2)
  std::vector<MatrixXd> zbar(q_dim);
  for (int q = 0; q < q_dim; ++q) {
    const double l2 = kernel.lengthscales(q) * kernel.lengthscales(q);
    MatrixXd delta = z.col(q).replicate(1, m);
    delta.rowwise() -= z.col(q).transpose();
    cross += delta.array().square().matrix() / (4.0 * l2);
    zbar[q] = 0.5 * (z.col(q).replicate(1, m) + z.col(q).transpose().replicate(m, 1));
  }

  out.psi2 = MatrixXd::Zero(m, m);
  MatrixXd log_t(m, m);
  for (int i = 0; i < n; ++i) {
    log_t = MatrixXd::Constant(m, m, 2.0 * std::log(sigma2)) - cross;
    for (int q = 0; q < q_dim; ++q) {
      const double l2 = kernel.lengthscales(q) * kernel.lengthscales(q);
      const double dq = l2 + 2.0 * s(i, q);
      log_t.array() += 0.5 * (std::log(l2) - std::log(dq));
      log_t.array() -= (zbar[q].array() - mu(i, q)).square() / dq;
    }
    out.psi2 += log_t.array().exp().matrix();
  }
  out.psi2 = symmetrized(out.psi2);
  return out;
}

PsiBackward psi_backward(const KernelSpec& kernel, const MatrixXd& mu, const MatrixXd& s,
                         const MatrixXd& z, double p0bar, const MatrixXd& p1bar,
                         const MatrixXd& p2bar) {
  validate_psi_inputs(kernel, mu, s, z);
  const int n = static_cast<int>(mu.rows());
  const int m = static_cast<int>(z.rows());
  const int q_dim = static_cast<int>(mu.cols());
  const double sigma2 = kernel.variance;

  PsiBackward out;
  out.dlog_lengthscales = VectorXd::Zero(q_dim);
  out.dmeans = MatrixXd::Zero(n, q_dim);
  out.dvars = MatrixXd::Zero(n, q_dim);
  out.dz = MatrixXd::Zero(m, q_dim);

  out.dlog_variance = p0bar * n * sigma2;

  // --- psi1 chain ---
  const QStats stats = psi_stats(kernel, mu, s, z);
  const MatrixXd w1 = p1bar.cwiseProduct(stats.psi1);  // n x m weights
  out.dlog_variance += w1.sum();
  for (int q = 0; q < q_dim; ++q) {
    const double l2 = kernel.lengthscales(q) * kernel.lengthscales(q);
    const VectorXd d = s.col(q).array() + l2;
    MatrixXd e = mu.col(q).replicate(1, m);
    e.rowwise() -= z.col(q).transpose();
    const MatrixXd e_over_d = (e.array().colwise() / d.array()).matrix();
    const MatrixXd e2_over_d2 = e_over_d.cwiseProduct(e_over_d);
    // d log psi1 / d log l_q = 1 - l^2/d + l^2 e^2/d^2
    MatrixXd dll = MatrixXd::Constant(n, m, 1.0);
    dll.array() -= (l2 / d.array()).replicate(1, m);
    dll += l2 * e2_over_d2;
    out.dlog_lengthscales(q) += w1.cwiseProduct(dll).sum();
    out.dmeans.col(q) -= w1.cwiseProduct(e_over_d).rowwise().sum();
    out.dz.col(q) += w1.cwiseProduct(e_over_d).colwise().sum().transpose();
    // d log psi1 / d s = -1/(2d) + e^2/(2d^2)
    MatrixXd dvs = 0.5 * e2_over_d2;
    dvs.array() -= (0.5 / d.array()).replicate(1, m);
    out.dvars.col(q) += w1.cwiseProduct(dvs).rowwise().sum();
  }

  // --- psi2 chain ---
  const MatrixXd p2sym = symmetrized(p2bar);
  MatrixXd cross = MatrixXd::Zero(m, m);
  std::vector<MatrixXd> zbar(q_dim), half_delta(q_dim), delta2(q_dim);
  for (int q = 0; q < q_dim; ++q) {
    const double l2 = kernel.lengthscales(q) * kernel.lengthscales(q);
    MatrixXd delta = z.col(q).replicate(1, m);
    delta.rowwise() -= z.col(q).transpose();
    delta2[q] = delta.array().square().matrix();
    cross += delta2[q] / (4.0 * l2);
    half_delta[q] = delta / (2.0 * l2);
    zbar[q] = 0.5 * (z.col(q).replicate(1, m) + z.col(q).transpose().replicate(m, 1));
  }

  MatrixXd log_t(m, m), w2(m, m), ebar(m, m);
  for (int i = 0; i < n; ++i) {
    log_t = MatrixXd::Constant(m, m, 2.0 * std::log(sigma2)) - cross;
    for (int q = 0; q < q_dim; ++q) {
      const double l2 = kernel.lengthscales(q) * kernel.lengthscales(q);
      const double dq = l2 + 2.0 * s(i, q);
      log_t.array() += 0.5 * (std::log(l2) - std::log(dq));
      log_t.array() -= (zbar[q].array() - mu(i, q)).square() / dq;
    }
    w2 = p2sym.cwiseProduct(log_t.array().exp().matrix());
    out.dlog_variance += 2.0 * w2.sum();
    for (int q = 0; q < q_dim; ++q) {
      const double l2 = kernel.lengthscales(q) * kernel.lengthscales(q);
      const double dq = l2 + 2.0 * s(i, q);
      ebar = (mu(i, q) - zbar[q].array()).matrix();
      const MatrixXd e_over = ebar / dq;
      // d log t / d log l_q = 1 - l^2/D + Delta^2/(2 l^2) + 2 l^2 ebar^2 / D^2
      out.dlog_lengthscales(q) +=
          (w2.array() * (1.0 - l2 / dq + delta2[q].array() / (2.0 * l2) +
                         2.0 * l2 * e_over.array().square()))
              .sum();
      out.dmeans(i, q) -= 2.0 * w2.cwiseProduct(e_over).sum();
      out.dvars(i, q) += (w2.array() * (-1.0 / dq + 2.0 * e_over.array().square())).sum();
      // Row-role and column-role contributions coincide for symmetric weights.
      out.dz.col(q) += 2.0 * (w2.array() * (e_over.array() - half_delta[q].array()))
                                 .matrix()
                                 .rowwise()
                                 .sum();
    }
  }
  return out;
}

}  // namespace sgpreg
