#include "sgpreg/kernel.hpp"

#include <cmath>

namespace sgpreg {

namespace {

constexpr double kSqrt3 = 1.7320508075688772;

// Squared distances with per-dimension inverse scales: D2(i,j) = sum_q
// ((a_iq - b_jq) * inv_scale_q)^2, clamped at zero.  Same-set calls produce
// an exactly symmetric matrix with an exactly zero diagonal.
MatrixXd scaled_sqdist(const MatrixXd& a, const MatrixXd& b, const VectorXd& inv_scale) {
  const bool same = &a == &b;
  const MatrixXd as = a * inv_scale.asDiagonal();
  const MatrixXd bs = same ? as : b * inv_scale.asDiagonal();
  const VectorXd a2 = as.rowwise().squaredNorm();
  const VectorXd b2 = same ? a2 : VectorXd(bs.rowwise().squaredNorm());
  MatrixXd d2 = (-2.0 * as * bs.transpose());
  d2.colwise() += a2;
  d2.rowwise() += b2.transpose();
  d2 = d2.cwiseMax(0.0);
  if (same) {
    d2.diagonal().setZero();
    d2.triangularView<Eigen::StrictlyUpper>() = d2.transpose();
  }
  return d2;
}

VectorXd inv_scales(const KernelSpec& k, int dim) {
  if (k.family == KernelFamily::Matern32) {
    return VectorXd::Constant(dim, 1.0 / k.lengthscales(0));
  }
  return k.lengthscales.cwiseInverse();
}

void validate_pair(const KernelSpec& k, const MatrixXd& a, const MatrixXd& b) {
  require(a.cols() == b.cols(), "gram: input dimension mismatch between point sets");
  k.validate(static_cast<int>(a.cols()));
  require_finite(a, "gram: first input set");
  require_finite(b, "gram: second input set");
}

}  // namespace

KernelSpec KernelSpec::matern32(double variance, double lengthscale) {
  KernelSpec k;
  k.family = KernelFamily::Matern32;
  k.variance = variance;
  k.lengthscales = VectorXd::Constant(1, lengthscale);
  return k;
}

KernelSpec KernelSpec::se_ard(double variance, VectorXd lengthscales) {
  KernelSpec k;
  k.family = KernelFamily::SqExpArd;
  k.variance = variance;
  k.lengthscales = std::move(lengthscales);
  return k;
}

void KernelSpec::validate(int input_dim) const {
  require(variance > 0.0 && std::isfinite(variance), "kernel: variance must be positive");
  require(lengthscales.size() > 0 && (lengthscales.array() > 0.0).all() &&
              lengthscales.allFinite(),
          "kernel: lengthscales must be positive");
  if (family == KernelFamily::Matern32) {
    require(lengthscales.size() == 1, "kernel: Matern32 uses a single isotropic lengthscale");
  } else {
    require(lengthscales.size() == input_dim,
            "kernel: SqExpArd needs one lengthscale per input dimension");
  }
}

MatrixXd gram(const KernelSpec& kernel, const MatrixXd& a, const MatrixXd& b) {
  validate_pair(kernel, a, b);
  const MatrixXd d2 = scaled_sqdist(a, b, inv_scales(kernel, static_cast<int>(a.cols())));
  if (kernel.family == KernelFamily::SqExpArd) {
    return kernel.variance * (-0.5 * d2.array()).exp().matrix();
  }
  const MatrixXd s = kSqrt3 * d2.cwiseSqrt();
  return kernel.variance * ((1.0 + s.array()) * (-s.array()).exp()).matrix();
}

MatrixXd gram_grad(const KernelSpec& kernel, const MatrixXd& a, const MatrixXd& b,
                   const GramGradSelector& sel) {
  validate_pair(kernel, a, b);
  const int dim = static_cast<int>(a.cols());
  using Kind = GramGradSelector::Kind;

  if (sel.kind == Kind::LogVariance) return gram(kernel, a, b);

  if (sel.kind == Kind::LogLengthscale) {
    require(sel.index >= 0 && sel.index < kernel.n_lengthscales(),
            "gram_grad: unknown lengthscale selector");
    if (kernel.family == KernelFamily::Matern32) {
      const MatrixXd d2 = scaled_sqdist(a, b, inv_scales(kernel, dim));
      const MatrixXd s = kSqrt3 * d2.cwiseSqrt();
      return kernel.variance * (s.array().square() * (-s.array()).exp()).matrix();
    }
    const int q = sel.index;
    const MatrixXd k = gram(kernel, a, b);
    const double inv_l2 = 1.0 / (kernel.lengthscales(q) * kernel.lengthscales(q));
    MatrixXd dq = a.col(q).replicate(1, b.rows());
    dq.rowwise() -= b.col(q).transpose();
    return (k.array() * dq.array().square() * inv_l2).matrix();
  }

  // Input-coordinate selectors.
  require(sel.index >= 0 && sel.index < dim, "gram_grad: unknown input-coordinate selector");
  const int q = sel.index;
  MatrixXd dq = a.col(q).replicate(1, b.rows());
  dq.rowwise() -= b.col(q).transpose();
  MatrixXd w;
  if (kernel.family == KernelFamily::SqExpArd) {
    const double inv_l2 = 1.0 / (kernel.lengthscales(q) * kernel.lengthscales(q));
    w = -inv_l2 * gram(kernel, a, b);
  } else {
    const double l = kernel.lengthscales(0);
    const MatrixXd d2 = scaled_sqdist(a, b, inv_scales(kernel, dim));
    const MatrixXd s = kSqrt3 * d2.cwiseSqrt();
    w = (-3.0 * kernel.variance / (l * l)) * (-s.array()).exp().matrix();
  }
  MatrixXd grad = w.cwiseProduct(dq);
  if (sel.kind == Kind::InputB) grad = -grad;
  return grad;
}

GramBackward gram_backward(const KernelSpec& kernel, const MatrixXd& a, const MatrixXd& b,
                           const MatrixXd& g, bool same_set) {
  validate_pair(kernel, a, b);
  const int dim = static_cast<int>(a.cols());
  GramBackward out;
  out.dlog_lengthscales = VectorXd::Zero(kernel.n_lengthscales());
  out.dA = MatrixXd::Zero(a.rows(), dim);
  if (!same_set) out.dB = MatrixXd::Zero(b.rows(), dim);

  const MatrixXd k = gram(kernel, a, b);
  out.dlog_variance = (g.array() * k.array()).sum();

  // w(i,j) * (a_iq - b_jq) = dk/da_iq; for SE-ARD w depends on q.
  MatrixXd w_m32;
  MatrixXd s_m32;
  if (kernel.family == KernelFamily::Matern32) {
    const double l = kernel.lengthscales(0);
    const MatrixXd d2 = scaled_sqdist(a, b, inv_scales(kernel, dim));
    s_m32 = kSqrt3 * d2.cwiseSqrt();
    w_m32 = (-3.0 * kernel.variance / (l * l)) * (-s_m32.array()).exp().matrix();
    out.dlog_lengthscales(0) =
        (g.array() * kernel.variance * s_m32.array().square() * (-s_m32.array()).exp()).sum();
  }

  const MatrixXd g_eff = same_set ? MatrixXd(g + g.transpose()) : g;
  for (int q = 0; q < dim; ++q) {
    MatrixXd dq = a.col(q).replicate(1, b.rows());
    dq.rowwise() -= b.col(q).transpose();
    MatrixXd w;
    if (kernel.family == KernelFamily::SqExpArd) {
      const double inv_l2 = 1.0 / (kernel.lengthscales(q) * kernel.lengthscales(q));
      w = -inv_l2 * k;
      out.dlog_lengthscales(q) = (g.array() * k.array() * dq.array().square()).sum() * inv_l2;
    } else {
      w = w_m32;
    }
    const MatrixXd p = w.cwiseProduct(dq);
    if (same_set) {
      out.dA.col(q) = g_eff.cwiseProduct(p).rowwise().sum();
    } else {
      out.dA.col(q) = g.cwiseProduct(p).rowwise().sum();
      out.dB.col(q) = -g.cwiseProduct(p).colwise().sum().transpose();
    }
  }
  return out;
}

double kernel_jitter(const KernelSpec& kernel) { return kJitterScale * kernel.variance; }

MatrixXd gram_eff(const KernelSpec& kernel, const MatrixXd& a, const MatrixXd& b) {
  MatrixXd k = gram(kernel, a, b);
  const double delta = kernel_jitter(kernel);
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      if (a.row(i) == b.row(j)) k(i, j) += delta;
    }
  }
  return k;
}

MatrixXd gram_eff_self(const KernelSpec& kernel, const MatrixXd& a) {
  // Ridge on the self-diagonal only: distinct points at one location stay
  // factorizable, which is what the ridge is for.
  MatrixXd k = gram(kernel, a, a);
  k.diagonal().array() += kernel_jitter(kernel);
  return k;
}

}  // namespace sgpreg
