#include "sgpreg/sparse.hpp"

#include <cmath>

namespace sgpreg {

namespace {

constexpr double kLog2Pi = 1.8378770664093454;

// Shared factorization workspace for the low-rank objectives.
struct Factors {
  MatrixXd kmm;                  // effective M x M (with ridge)
  Eigen::LLT<MatrixXd> llt_kmm;
  MatrixXd knm;                  // effective N x M
  MatrixXd w;                    // L^-1 K_mn, M x N
  VectorXd kdiag;                // effective k(x_i, x_i)
  VectorXd ktilde;               // clamped diag(K_nn - Q)
  VectorXd umask;                // 1 where ktilde was not clamped
};

Factors make_factors(const SgpState& state, const MatrixXd& x) {
  Factors f;
  f.kmm = gram_eff_self(state.kernel, state.z);
  f.llt_kmm = [&] {
    Eigen::LLT<MatrixXd> llt(f.kmm);
    if (llt.info() != Eigen::Success) {
      throw FactorizationError("sparse objective: degenerate inducing set (duplicate inducing points)");
    }
    return llt;
  }();
  f.knm = gram_eff(state.kernel, x, state.z);
  f.w = f.llt_kmm.matrixL().solve(f.knm.transpose());
  const double kd = state.kernel.variance + kernel_jitter(state.kernel);
  f.kdiag = VectorXd::Constant(x.rows(), kd);
  const VectorXd qdiag = f.w.colwise().squaredNorm();
  f.ktilde = f.kdiag - qdiag;
  f.umask = VectorXd::Ones(x.rows());
  for (Eigen::Index i = 0; i < f.ktilde.size(); ++i) {
    if (f.ktilde(i) < 0.0) {
      f.ktilde(i) = 0.0;
      f.umask(i) = 0.0;
    }
  }
  return f;
}

// Factorization pieces for the Gaussian log density with covariance
// diag(d) + W^T W, via the M x M capacitance matrix.
struct WoodburyParts {
  VectorXd dinv;
  MatrixXd b;                    // I + W D^-1 W^T
  Eigen::LLT<MatrixXd> llt_b;
  VectorXd alpha;                // (D + W^T W)^-1 y
  double logdet = 0.0;
  double quad = 0.0;             // y^T alpha
};

WoodburyParts woodbury(const Factors& f, const VectorXd& d, const VectorXd& y) {
  WoodburyParts p;
  p.dinv = d.cwiseInverse();
  const MatrixXd wd = f.w * p.dinv.asDiagonal();          // M x N
  p.b = MatrixXd::Identity(f.w.rows(), f.w.rows()) + wd * f.w.transpose();
  p.llt_b = chol_spd(p.b, "sparse objective: capacitance matrix");
  const VectorXd dy = p.dinv.cwiseProduct(y);
  const VectorXd wy = f.w * dy;
  p.alpha = dy - p.dinv.cwiseProduct(f.w.transpose() * p.llt_b.solve(wy));
  p.logdet = d.array().log().sum() + logdet_from_chol(p.llt_b);
  p.quad = y.dot(p.alpha);
  return p;
}

double gaussian_loglik(const WoodburyParts& p, Eigen::Index n) {
  return -0.5 * p.quad - 0.5 * p.logdet - 0.5 * static_cast<double>(n) * kLog2Pi;
}

// --- SVGP pieces ---

struct SvgpParts {
  VectorXd mtilde;       // K_mm^-1 m
  VectorXd r;            // y - K_nm mtilde
  MatrixXd s;            // vu_chol vu_chol^T
  MatrixXd amat;         // K_mm^-1 K_mn (M x N)
  double tr_sp = 0.0;    // tr(S K_mm^-1 K_mn K_nm K_mm^-1)
  double kl = 0.0;       // KL(q(u) || p(u))
};

SvgpParts svgp_parts(const SgpState& state, const Factors& f, const VectorXd& y) {
  SvgpParts p;
  const auto& llt = f.llt_kmm;
  p.mtilde = llt.solve(state.vu_mean);
  p.r = y - f.knm * p.mtilde;
  p.s = state.vu_chol * state.vu_chol.transpose();
  p.amat = llt.matrixU().solve(f.w);   // K_mm^-1 K_mn
  const MatrixXd lam_t_a = state.vu_chol.transpose() * p.amat;   // M x N
  p.tr_sp = lam_t_a.squaredNorm();
  const MatrixXd linv_lam = llt.matrixL().solve(state.vu_chol);
  const double tr_kinv_s = linv_lam.squaredNorm();
  const double logdet_s = 2.0 * state.vu_chol.diagonal().array().log().sum();
  p.kl = 0.5 * (tr_kinv_s + state.vu_mean.dot(p.mtilde) - state.z.rows() +
                logdet_from_chol(llt) - logdet_s);
  return p;
}

double svgp_elbo(const SgpState& state, const Factors& f, const SvgpParts& p,
                 const VectorXd& y) {
  const double n = static_cast<double>(y.size());
  const double beta = state.beta;
  return 0.5 * n * std::log(beta) - 0.5 * n * kLog2Pi -
         0.5 * beta * (p.r.squaredNorm() + f.ktilde.sum() + p.tr_sp) - p.kl;
}

}  // namespace

const char* to_string(SgpKind kind) {
  switch (kind) {
    case SgpKind::SorDtc: return "dtc";
    case SgpKind::Fitc: return "fitc";
    case SgpKind::Sgpr: return "sgpr";
    case SgpKind::Svgp: return "svgp";
  }
  return "?";
}

void SgpState::validate(int input_dim) const {
  require(z.rows() >= 1, "SgpState: need at least one inducing input");
  require(beta > 0.0 && std::isfinite(beta), "SgpState: beta must be positive");
  kernel.validate(input_dim);
  require(z.cols() == input_dim, "SgpState: inducing input dimension mismatch");
  require_finite(z, "SgpState: inducing inputs");
  if (kind == SgpKind::Svgp) {
    require(vu_mean.size() == z.rows(), "SgpState: vu_mean size mismatch");
    require(vu_chol.rows() == z.rows() && vu_chol.cols() == z.rows(),
            "SgpState: vu_chol shape mismatch");
    require((vu_chol.diagonal().array() > 0.0).all(),
            "SgpState: vu_chol diagonal must be positive");
    require_finite(vu_mean, "SgpState: vu_mean");
    require_finite(vu_chol, "SgpState: vu_chol");
  }
}

double objective_l1(const SgpState& state, const MatrixXd& x, const VectorXd& y) {
  state.validate(static_cast<int>(x.cols()));
  require(x.rows() == y.size(), "objective_l1: inputs/observations size mismatch");
  require_finite(x, "objective_l1: inputs");
  require_finite(y, "objective_l1: observations");
  const Factors f = make_factors(state, x);
  const double beta_inv = 1.0 / state.beta;

  switch (state.kind) {
    case SgpKind::SorDtc: {
      const auto p = woodbury(f, VectorXd::Constant(y.size(), beta_inv), y);
      return gaussian_loglik(p, y.size());
    }
    case SgpKind::Fitc: {
      const auto p = woodbury(f, (f.ktilde.array() + beta_inv).matrix(), y);
      return gaussian_loglik(p, y.size());
    }
    case SgpKind::Sgpr: {
      const auto p = woodbury(f, VectorXd::Constant(y.size(), beta_inv), y);
      return gaussian_loglik(p, y.size()) - 0.5 * state.beta * f.ktilde.sum();
    }
    case SgpKind::Svgp: {
      const auto p = svgp_parts(state, f, y);
      return svgp_elbo(state, f, p, y);
    }
  }
  throw std::logic_error("objective_l1: unknown kind");
}

SgpGradients objective_grad(const SgpState& state, const MatrixXd& x, const VectorXd& y) {
  state.validate(static_cast<int>(x.cols()));
  require(x.rows() == y.size(), "objective_grad: inputs/observations size mismatch");
  const Factors f = make_factors(state, x);
  const int n = static_cast<int>(y.size());
  const int m = state.m();
  const double beta = state.beta;
  const double beta_inv = 1.0 / beta;

  MatrixXd g_nm = MatrixXd::Zero(n, m);   // d objective / d K_nm (effective)
  MatrixXd g_mm = MatrixXd::Zero(m, m);   // d objective / d K_mm (effective)
  VectorXd g_diag = VectorXd::Zero(n);    // d objective / d kdiag (effective)
  double g_logbeta = 0.0;

  SgpGradients out;
  out.dlog_lengthscales = VectorXd::Zero(state.kernel.n_lengthscales());

  if (state.kind != SgpKind::Svgp) {
    const bool fitc = state.kind == SgpKind::Fitc;
    const VectorXd d = fitc ? VectorXd((f.ktilde.array() + beta_inv).matrix())
                            : VectorXd::Constant(n, beta_inv);
    const auto p = woodbury(f, d, y);
    out.value = gaussian_loglik(p, n);
    if (state.kind == SgpKind::Sgpr) out.value -= 0.5 * beta * f.ktilde.sum();

    // gbar = 1/2 (alpha alpha^T - A^-1); needed only through its products.
    const VectorXd kma = f.knm.transpose() * p.alpha;                  // K_mn alpha
    const MatrixXd l_t = MatrixXd(f.llt_kmm.matrixL()).transpose();
    const MatrixXd ainv_knm =
        p.dinv.asDiagonal() * (f.w.transpose() * p.llt_b.solve(l_t));  // A^-1 K_nm
    const MatrixXd gbar_knm = 0.5 * (p.alpha * kma.transpose() - ainv_knm);   // N x M
    const MatrixXd r_b = p.llt_b.matrixL().solve(f.w);                 // L_B^-1 W
    const VectorXd ainv_diag =
        p.dinv - p.dinv.cwiseProduct(p.dinv).cwiseProduct(r_b.colwise().squaredNorm().transpose());
    const VectorXd gbar_diag = 0.5 * (p.alpha.array().square() - ainv_diag.array()).matrix();

    // Weight on dQ entries: gbar, minus its diagonal where the diagonal
    // correction is active (Fitc), plus the trace-term diagonal (Sgpr).
    VectorXd c_diag = VectorXd::Zero(n);
    if (fitc) c_diag -= f.umask.cwiseProduct(gbar_diag);
    if (state.kind == SgpKind::Sgpr) c_diag += 0.5 * beta * f.umask;
    const MatrixXd qbar_knm = gbar_knm + c_diag.asDiagonal() * f.knm;  // (gbar + diag(c)) K_nm

    const MatrixXd kinv = f.llt_kmm.solve(MatrixXd::Identity(m, m));
    g_nm = 2.0 * qbar_knm * kinv;
    g_mm = -kinv * (f.knm.transpose() * qbar_knm) * kinv;

    if (fitc) g_diag = f.umask.cwiseProduct(gbar_diag);
    if (state.kind == SgpKind::Sgpr) g_diag = -0.5 * beta * f.umask;

    const double tr_ainv = ainv_diag.sum();
    g_logbeta = -0.5 * beta_inv * (p.alpha.squaredNorm() - tr_ainv);
    if (state.kind == SgpKind::Sgpr) g_logbeta += -0.5 * beta * f.ktilde.sum();
  } else {
    const auto p = svgp_parts(state, f, y);
    out.value = svgp_elbo(state, f, p, y);
    const MatrixXd kinv = f.llt_kmm.solve(MatrixXd::Identity(m, m));
    const VectorXd ar = p.amat * p.r;                                  // K_mm^-1 K_mn r
    const MatrixXd pmat = p.amat * p.amat.transpose();                 // K^-1 Kmn Knm K^-1
    const MatrixXd ks = kinv * p.s;

    // K_nm channel.
    g_nm = beta * p.r * p.mtilde.transpose();
    g_nm += beta * f.umask.asDiagonal() * (f.knm * kinv);
    g_nm -= beta * f.knm * (ks * kinv);

    // K_mm channel.
    g_mm = -0.5 * beta * (ar * p.mtilde.transpose() + p.mtilde * ar.transpose());
    g_mm -= 0.5 * beta * kinv * (f.knm.transpose() * (f.umask.asDiagonal() * f.knm)) * kinv;
    g_mm += 0.5 * beta * (ks * pmat + pmat * ks.transpose());
    g_mm += 0.5 * (ks * kinv + p.mtilde * p.mtilde.transpose() - kinv);

    g_diag = -0.5 * beta * f.umask;
    g_logbeta = 0.5 * n - 0.5 * beta * (p.r.squaredNorm() + f.ktilde.sum() + p.tr_sp);

    out.dvu_mean = beta * ar - p.mtilde;
    const MatrixXd lam_inv =
        state.vu_chol.triangularView<Eigen::Lower>().solve(MatrixXd::Identity(m, m));
    const MatrixXd s_inv = lam_inv.transpose() * lam_inv;
    const MatrixXd g_s = -0.5 * beta * pmat - 0.5 * kinv + 0.5 * s_inv;
    const MatrixXd dchol_full = 2.0 * symmetrized(g_s) * state.vu_chol;
    out.dvu_chol = dchol_full.triangularView<Eigen::Lower>();
  }

  // Chain the effective-matrix gradients to hyperparameters and z.
  // Every effective entry is proportional to sigma^2.
  out.dlog_variance = (g_mm.array() * f.kmm.array()).sum() +
                      (g_nm.array() * f.knm.array()).sum() + g_diag.dot(f.kdiag);
  const MatrixXd g_mm_sym = symmetrized(g_mm);
  const GramBackward bw_mm = gram_backward(state.kernel, state.z, state.z, g_mm_sym, true);
  const GramBackward bw_nm = gram_backward(state.kernel, x, state.z, g_nm, false);
  out.dlog_lengthscales = bw_mm.dlog_lengthscales + bw_nm.dlog_lengthscales;
  out.dz = bw_mm.dA + bw_nm.dB;
  out.dlog_beta = g_logbeta;
  return out;
}

SgpPrediction predict_sgp(const SgpState& state, const MatrixXd& x, const VectorXd& y,
                          const MatrixXd& xstar, const SgpPredictOptions& options) {
  state.validate(static_cast<int>(x.cols()));
  require(xstar.cols() == x.cols(), "predict_sgp: prediction input dimension mismatch");
  require(x.rows() == y.size(), "predict_sgp: inputs/observations size mismatch");
  require_finite(xstar, "predict_sgp: prediction inputs");
  const Factors f = make_factors(state, x);
  const int m = state.m();
  const double beta = state.beta;
  const double beta_inv = 1.0 / beta;

  SgpPrediction out;
  const MatrixXd kzs = gram(state.kernel, state.z, xstar);   // M x n*
  const MatrixXd v = f.llt_kmm.matrixL().solve(kzs);         // L^-1 k_*

  // Posterior covariance factor over the inducing outputs, per kind.
  MatrixXd sig;   // such that var correction = k_*^T sig k_*
  switch (state.kind) {
    case SgpKind::SorDtc: {
      const auto p = woodbury(f, VectorXd::Constant(y.size(), beta_inv), y);
      const VectorXd wy = f.w * (beta * y);
      out.weights = f.llt_kmm.matrixU().solve(p.llt_b.solve(wy));
      const MatrixXd gm = f.kmm + beta * f.knm.transpose() * f.knm;
      sig = chol_spd(gm, "predict_sgp: collapsed covariance").solve(MatrixXd::Identity(m, m));
      break;
    }
    case SgpKind::Sgpr: {
      // Direct dense route, deliberately different from the SorDtc path.
      const MatrixXd gm = f.kmm + beta * f.knm.transpose() * f.knm;
      const auto llt = chol_spd(gm, "predict_sgp: collapsed covariance");
      out.weights = beta * llt.solve(f.knm.transpose() * y);
      sig = llt.solve(MatrixXd::Identity(m, m));
      break;
    }
    case SgpKind::Fitc: {
      const VectorXd d = (f.ktilde.array() + beta_inv).matrix();
      const auto p = woodbury(f, d, y);
      const VectorXd wy = f.w * p.dinv.cwiseProduct(y);
      out.weights = f.llt_kmm.matrixU().solve(p.llt_b.solve(wy));
      const MatrixXd gm = f.kmm + f.knm.transpose() * p.dinv.asDiagonal() * f.knm;
      sig = chol_spd(gm, "predict_sgp: collapsed covariance").solve(MatrixXd::Identity(m, m));
      break;
    }
    case SgpKind::Svgp: {
      out.weights = f.llt_kmm.solve(state.vu_mean);
      const MatrixXd kis = f.llt_kmm.solve(state.vu_chol);
      sig = kis * kis.transpose();
      break;
    }
  }

  out.mean = kzs.transpose() * out.weights;
  VectorXd corr(xstar.rows());
  for (Eigen::Index j = 0; j < xstar.rows(); ++j) {
    corr(j) = kzs.col(j).dot(sig * kzs.col(j));
  }
  if (state.kind == SgpKind::SorDtc && options.degenerate_variance) {
    out.var = corr.cwiseMax(0.0);
  } else {
    out.var = (state.kernel.variance - v.colwise().squaredNorm().transpose().array() +
               corr.transpose().array())
                  .max(0.0)
                  .matrix();
  }
  if (options.observation_noise) out.var.array() += beta_inv;
  return out;
}

double nystrom_error(const KernelSpec& kernel, const MatrixXd& x, const MatrixXd& z) {
  require(z.rows() >= 1, "nystrom_error: need at least one inducing input");
  require(x.rows() >= 1, "nystrom_error: empty inputs");
  kernel.validate(static_cast<int>(x.cols()));
  require(z.cols() == x.cols(), "nystrom_error: dimension mismatch");
  const MatrixXd kmm = gram_eff_self(kernel, z);
  const auto llt = [&] {
    Eigen::LLT<MatrixXd> l(kmm);
    if (l.info() != Eigen::Success) {
      throw FactorizationError("nystrom_error: degenerate inducing set");
    }
    return l;
  }();
  const MatrixXd knm = gram_eff(kernel, x, z);
  const MatrixXd w = llt.matrixL().solve(knm.transpose());   // M x N

  const int n = static_cast<int>(x.rows());
  const int block = 512;
  double sum_k2 = 0.0;
  MatrixXd wk = MatrixXd::Zero(w.rows(), n);
  for (int i0 = 0; i0 < n; i0 += block) {
    const int b = std::min(block, n - i0);
    const MatrixXd kb = gram_eff(kernel, x.middleRows(i0, b), x);   // b x N
    sum_k2 += kb.squaredNorm();
    wk += w.middleCols(i0, b) * kb;
  }
  const double cross = (wk.array() * w.array()).sum();          // tr(W K W^T)
  const double q2 = (w * w.transpose()).squaredNorm();          // ||Q||_F^2
  return std::sqrt(std::max(sum_k2 - 2.0 * cross + q2, 0.0));
}

double quantization_error(const MatrixXd& x, const MatrixXd& z) {
  require(z.rows() >= 1, "quantization_error: need at least one inducing input");
  require(x.cols() == z.cols(), "quantization_error: dimension mismatch");
  double total = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < z.rows(); ++j) {
      best = std::min(best, (x.row(i) - z.row(j)).squaredNorm());
    }
    total += best;
  }
  return total;
}

}  // namespace sgpreg
