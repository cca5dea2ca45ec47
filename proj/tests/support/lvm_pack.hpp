#pragma once

// Test-side flattening of an LvmState into a parameter vector, used to drive
// finite-difference checks of the latent bounds.

#include <cmath>

#include "sgpreg/latent.hpp"

namespace lvm_pack {

using sgpreg::LvmGradients;
using sgpreg::LvmState;
using sgpreg::MatrixXd;
using sgpreg::VectorXd;

struct Packer {
  int n = 0, q = 0, m = 0, d_out = 0;
  bool with_qu = false;

  int size() const {
    int s = 2 + q + 2 * n * q + m * q;
    if (with_qu) s += d_out * (m + m * (m + 1) / 2);
    return s;
  }

  VectorXd pack(const LvmState& st) const {
    VectorXd t(size());
    int k = 0;
    t(k++) = std::log(st.kernel.variance);
    for (int i = 0; i < q; ++i) t(k++) = std::log(st.kernel.lengthscales(i));
    t(k++) = std::log(st.beta);
    for (int j = 0; j < q; ++j)
      for (int i = 0; i < n; ++i) t(k++) = st.q_x_means(i, j);
    for (int j = 0; j < q; ++j)
      for (int i = 0; i < n; ++i) t(k++) = std::log(st.q_x_vars(i, j));
    for (int j = 0; j < q; ++j)
      for (int i = 0; i < m; ++i) t(k++) = st.z(i, j);
    if (with_qu) {
      for (int dd = 0; dd < d_out; ++dd) {
        for (int i = 0; i < m; ++i) t(k++) = st.q_u_means[dd](i);
        for (int j = 0; j < m; ++j)
          for (int i = j; i < m; ++i) t(k++) = st.q_u_chols[dd](i, j);
      }
    }
    return t;
  }

  LvmState unpack(const LvmState& proto, const VectorXd& t) const {
    LvmState st = proto;
    int k = 0;
    st.kernel.variance = std::exp(t(k++));
    for (int i = 0; i < q; ++i) st.kernel.lengthscales(i) = std::exp(t(k++));
    st.beta = std::exp(t(k++));
    for (int j = 0; j < q; ++j)
      for (int i = 0; i < n; ++i) st.q_x_means(i, j) = t(k++);
    for (int j = 0; j < q; ++j)
      for (int i = 0; i < n; ++i) st.q_x_vars(i, j) = std::exp(t(k++));
    for (int j = 0; j < q; ++j)
      for (int i = 0; i < m; ++i) st.z(i, j) = t(k++);
    if (with_qu) {
      for (int dd = 0; dd < d_out; ++dd) {
        for (int i = 0; i < m; ++i) st.q_u_means[dd](i) = t(k++);
        for (int j = 0; j < m; ++j)
          for (int i = j; i < m; ++i) st.q_u_chols[dd](i, j) = t(k++);
      }
    }
    return st;
  }

  // Gradients over the packed coordinates (log-variance chain applied here).
  VectorXd pack_grad(const LvmState& st, const LvmGradients& g) const {
    VectorXd t(size());
    int k = 0;
    t(k++) = g.dlog_variance;
    for (int i = 0; i < q; ++i) t(k++) = g.dlog_lengthscales(i);
    t(k++) = g.dlog_beta;
    for (int j = 0; j < q; ++j)
      for (int i = 0; i < n; ++i) t(k++) = g.dq_x_means(i, j);
    for (int j = 0; j < q; ++j)
      for (int i = 0; i < n; ++i) t(k++) = g.dq_x_vars(i, j) * st.q_x_vars(i, j);
    for (int j = 0; j < q; ++j)
      for (int i = 0; i < m; ++i) t(k++) = g.dz(i, j);
    if (with_qu) {
      for (int dd = 0; dd < d_out; ++dd) {
        for (int i = 0; i < m; ++i) t(k++) = g.dq_u_means[dd](i);
        for (int j = 0; j < m; ++j)
          for (int i = j; i < m; ++i) t(k++) = g.dq_u_chols[dd](i, j);
      }
    }
    return t;
  }
};

}  // namespace lvm_pack
