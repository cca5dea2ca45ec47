#include "sgpreg/latent.hpp"

#include <cmath>
#include <random>

#include "doctest.h"
#include "sgpreg/exact_gp.hpp"
#include "support/lvm_pack.hpp"
#include "support/oracles.hpp"

using namespace sgpreg;

namespace {

struct Instance {
  LvmState state;
  MatrixXd y;
};

Instance random_instance(std::mt19937_64& gen, int n, int d_out, int q, int m,
                         bool with_qu = true) {
  Instance inst;
  inst.state.kernel = KernelSpec::se_ard(1.2, VectorXd::Constant(q, 1.1));
  inst.state.beta = 1.8;
  inst.state.q_x_means = oracles::random_matrix(gen, n, q);
  inst.state.q_x_vars = (oracles::random_matrix(gen, n, q).array().square() + 0.05).matrix();
  inst.state.z = oracles::random_matrix(gen, m, q);
  inst.y = oracles::random_matrix(gen, n, d_out);
  if (with_qu) {
    for (int j = 0; j < d_out; ++j) {
      inst.state.q_u_means.push_back(oracles::random_vector(gen, m));
      MatrixXd lam = 0.3 * oracles::random_matrix(gen, m, m);
      lam.diagonal() = lam.diagonal().array().abs() + 0.8;
      inst.state.q_u_chols.push_back(lam.triangularView<Eigen::Lower>());
    }
  }
  return inst;
}

}  // namespace

TEST_CASE("collapsed bound reduces to per-dimension exact marginals at degenerate q(X)") {
  std::mt19937_64 gen(3);
  const int n = 8, d_out = 2, q = 2;
  Instance inst = random_instance(gen, n, d_out, q, n, false);
  inst.state.q_x_vars.setConstant(1e-14);
  inst.state.z = inst.state.q_x_means;

  double sum_l0 = 0.0;
  for (int j = 0; j < d_out; ++j) {
    GprModel gm;
    gm.kernel = inst.state.kernel;
    gm.beta = inst.state.beta;
    gm.x = inst.state.q_x_means;
    gm.y = inst.y.col(j);
    sum_l0 += log_marginal_l0(gm);
  }
  const double expected = sum_l0 - kl_qx_prior(inst.state);
  CHECK(elbo_lsgpr(inst.state, inst.y) == doctest::Approx(expected).epsilon(1e-4));
}

TEST_CASE("collapsed bound never exceeds the plug-in marginal at degenerate q(X)") {
  std::mt19937_64 gen(5);
  Instance inst = random_instance(gen, 10, 3, 2, 4, false);
  inst.state.q_x_vars.setConstant(1e-12);
  double plug_in = 0.0;
  for (int j = 0; j < 3; ++j) {
    GprModel gm;
    gm.kernel = inst.state.kernel;
    gm.beta = inst.state.beta;
    gm.x = inst.state.q_x_means;
    gm.y = inst.y.col(j);
    plug_in += log_marginal_l0(gm);
  }
  CHECK(elbo_lsgpr(inst.state, inst.y) <= plug_in + 1e-6);
}

TEST_CASE("prior variational q(U) has exactly zero divergence") {
  std::mt19937_64 gen(7);
  Instance inst = random_instance(gen, 9, 2, 2, 4, false);
  const MatrixXd kmm = gram_eff_self(inst.state.kernel, inst.state.z);
  const MatrixXd l = MatrixXd(kmm.llt().matrixL());
  for (int j = 0; j < 2; ++j) {
    inst.state.q_u_means.push_back(VectorXd::Zero(4));
    inst.state.q_u_chols.push_back(l);
  }
  CHECK(std::abs(kl_qu_prior(inst.state)) < 1e-10);
}

TEST_CASE("uncollapsed bound meets the collapsed bound at the optimal q(U)") {
  std::mt19937_64 gen(11);
  Instance inst = random_instance(gen, 12, 3, 2, 4, false);
  const double collapsed = elbo_lsgpr(inst.state, inst.y);
  set_optimal_qu(inst.state, inst.y);
  const double uncollapsed = elbo_lsvgp(inst.state, inst.y);
  CHECK(std::abs(uncollapsed - collapsed) <= 1e-6 * std::max(1.0, std::abs(collapsed)));
}

TEST_CASE("collapsed bound dominates any q(U)") {
  std::mt19937_64 gen(13);
  for (int rep = 0; rep < 6; ++rep) {
    const Instance inst = random_instance(gen, 10, 2, 2, 3);
    CHECK(elbo_lsvgp(inst.state, inst.y) <= elbo_lsgpr(inst.state, inst.y) + 1e-8);
  }
}

TEST_CASE("both bounds are invariant under joint row permutation") {
  std::mt19937_64 gen(17);
  Instance inst = random_instance(gen, 11, 2, 2, 3);
  const double a1 = elbo_lsgpr(inst.state, inst.y);
  const double a2 = elbo_lsvgp(inst.state, inst.y);
  Instance perm = inst;
  for (int i = 0; i < 11; ++i) {
    const int src = (i * 5 + 2) % 11;
    perm.state.q_x_means.row(i) = inst.state.q_x_means.row(src);
    perm.state.q_x_vars.row(i) = inst.state.q_x_vars.row(src);
    perm.y.row(i) = inst.y.row(src);
  }
  CHECK(elbo_lsgpr(perm.state, perm.y) == doctest::Approx(a1).epsilon(1e-10));
  CHECK(elbo_lsvgp(perm.state, perm.y) == doctest::Approx(a2).epsilon(1e-10));
}

TEST_CASE("melbo decomposition is exact and degenerates correctly") {
  std::mt19937_64 gen(19);
  const Instance inst = random_instance(gen, 10, 2, 2, 4);
  const double elbo = elbo_lsvgp(inst.state, inst.y);
  const auto b0 = melbo(inst.state, LvmKind::Lsvgp, inst.y, 0.0, KlDirection::ZX);
  CHECK(b0.total == elbo);
  const auto b = melbo(inst.state, LvmKind::Lsvgp, inst.y, 7.0, KlDirection::XZ);
  CHECK(b.total == b.recon - b.lambda * b.divergence);
  CHECK(b.divergence >= 0.0);

  // Inducing inputs whose summary matches the variational means.
  Instance matched = inst;
  const int n = 10;
  matched.state.z = MatrixXd(2 * n, 2);
  matched.state.z.topRows(n) = inst.state.q_x_means;
  matched.state.z.bottomRows(n) = inst.state.q_x_means;
  MatrixXd y2 = inst.y;
  const auto bm = melbo(matched.state, LvmKind::Lsgpr, y2, 5.0, KlDirection::XZ);
  CHECK(bm.divergence < 1e-10);
  CHECK(bm.total == doctest::Approx(bm.recon).epsilon(1e-9));
}

TEST_CASE("collapsed-bound gradients match finite differences") {
  std::mt19937_64 gen(23);
  const Instance inst = random_instance(gen, 7, 2, 2, 3, false);
  lvm_pack::Packer p{7, 2, 3, 2, false};
  const VectorXd t0 = p.pack(inst.state);
  const auto eval = [&](const VectorXd& t) {
    return elbo_lsgpr(p.unpack(inst.state, t), inst.y);
  };
  const VectorXd fd = oracles::finite_difference(eval, t0, 1e-6);
  const VectorXd analytic = p.pack_grad(inst.state, elbo_lsgpr_grad(inst.state, inst.y));
  CHECK(oracles::max_rel_error(analytic, fd, 1e-7) < 1e-4);
}

TEST_CASE("uncollapsed-bound gradients match finite differences") {
  std::mt19937_64 gen(29);
  const Instance inst = random_instance(gen, 6, 2, 2, 3);
  lvm_pack::Packer p{6, 2, 3, 2, true};
  const VectorXd t0 = p.pack(inst.state);
  const auto eval = [&](const VectorXd& t) {
    return elbo_lsvgp(p.unpack(inst.state, t), inst.y);
  };
  const VectorXd fd = oracles::finite_difference(eval, t0, 1e-6);
  const VectorXd analytic = p.pack_grad(inst.state, elbo_lsvgp_grad(inst.state, inst.y));
  CHECK(oracles::max_rel_error(analytic, fd, 1e-7) < 1e-4);
}

TEST_CASE("melbo gradients match finite differences in both directions") {
  std::mt19937_64 gen(31);
  const Instance inst = random_instance(gen, 6, 2, 2, 3);
  lvm_pack::Packer p{6, 2, 3, 2, true};
  const VectorXd t0 = p.pack(inst.state);
  for (KlDirection dir : {KlDirection::XZ, KlDirection::ZX}) {
    const auto eval = [&](const VectorXd& t) {
      return melbo(p.unpack(inst.state, t), LvmKind::Lsvgp, inst.y, 3.0, dir).total;
    };
    const VectorXd fd = oracles::finite_difference(eval, t0, 1e-6);
    const VectorXd analytic =
        p.pack_grad(inst.state, melbo_grad(inst.state, LvmKind::Lsvgp, inst.y, 3.0, dir));
    CHECK(oracles::max_rel_error(analytic, fd, 1e-7) < 1e-4);
  }
}

TEST_CASE("reconstruction shape and optimal-q(U) route") {
  std::mt19937_64 gen(37);
  const Instance inst = random_instance(gen, 10, 3, 2, 4);
  const MatrixXd ra = lvm_reconstruct(inst.state, LvmKind::Lsvgp, inst.y);
  const MatrixXd rb = lvm_reconstruct(inst.state, LvmKind::Lsgpr, inst.y);
  CHECK(ra.rows() == 10);
  CHECK(ra.cols() == 3);
  CHECK(rb.rows() == 10);
  CHECK((ra - rb).norm() > 0.0);   // different q(U) routes
}

TEST_CASE("askl basics") {
  std::mt19937_64 gen(41);
  const MatrixXd x = oracles::random_matrix(gen, 50, 3);
  CHECK(askl(x, x) <= 1e-12);

  MatrixXd a(2, 1), b(2, 1);
  a << -1.0, 1.0;   // mean 0, ml variance 1
  b << -2.0, 2.0;   // mean 0, ml variance 4
  const double expected = 0.5 * (0.8069 + 0.3181);
  CHECK(askl(a, b) == doctest::Approx(expected).epsilon(1e-3));
  CHECK(askl(a, b) == doctest::Approx(askl(b, a)).epsilon(1e-12));
  CHECK_THROWS_AS(askl(a, MatrixXd::Zero(2, 2)), std::invalid_argument);
}

namespace {

EbState make_eb(std::mt19937_64& gen, const LvmState& state, double eps) {
  EbState eb;
  eb.nu = state.z + 0.1 * oracles::random_matrix(gen, state.m(), state.q());
  eb.epsilon = eps;
  const auto s = fit_gaussian_summary(eb.nu);
  const double det = s.cov.determinant();
  eb.k1 = det / 2.0;
  eb.k2 = det * 2.0;
  return eb;
}

}  // namespace

TEST_CASE("epsilon-only terms of the empirical-bayes decomposition") {
  std::mt19937_64 gen(43);
  Instance inst = random_instance(gen, 10, 2, 2, 3);
  EbState eb = make_eb(gen, inst.state, std::exp(1.0));
  eb.k2 = 1.0;
  eb.k1 = 1e-6;
  // Shrink nu so its summary determinant falls inside (k1, 1).
  eb.nu *= 0.3;
  const auto b = eb_bounds(inst.state, eb, inst.y);
  CHECK(b.b == doctest::Approx(3.0).epsilon(1e-12));

  // C is linear in epsilon and vanishes.
  Instance wide = random_instance(gen, 12, 2, 2, 3);
  wide.state.q_x_means *= 8.0;   // large embedding spread -> small precision trace
  double prev = std::numeric_limits<double>::infinity();
  for (double eps : {1e-1, 1e-2, 1e-3}) {
    EbState e2 = make_eb(gen, wide.state, eps);
    const auto bb = eb_bounds(wide.state, e2, wide.y);
    CHECK(bb.c < prev);
    prev = bb.c;
  }
  CHECK(prev < 1e-4);
}

TEST_CASE("gap between the two empirical-bayes bounds respects the band bound") {
  std::mt19937_64 gen(47);
  for (int rep = 0; rep < 10; ++rep) {
    const Instance inst = random_instance(gen, 8 + rep, 2, 2, 3);
    EbState eb = make_eb(gen, inst.state, 1e-2);
    const auto b = eb_bounds(inst.state, eb, inst.y);
    const double cap = 0.5 * inst.state.m() * (std::log(eb.k2) - std::log(eb.k1));
    CHECK(b.elbo_eb - b.lelbo_eb <= cap + 1e-8);
    CHECK(b.elbo_eb - b.lelbo_eb >= -1e-8);
  }
}

TEST_CASE("empirical-bayes precondition violations are reported") {
  std::mt19937_64 gen(53);
  const Instance inst = random_instance(gen, 8, 2, 2, 3);
  EbState eb = make_eb(gen, inst.state, 1e-2);
  eb.k1 = eb.k2 * 2.0;
  CHECK_THROWS_AS(eb_bounds(inst.state, eb, inst.y), std::invalid_argument);
  eb = make_eb(gen, inst.state, 1e-2);
  eb.k2 = eb.k1 * 1.0000001;   // band excludes the actual determinant
  CHECK_THROWS_AS(eb_bounds(inst.state, eb, inst.y), PreconditionError);
}

TEST_CASE("telescoped kl identity holds after the sign resolution") {
  std::mt19937_64 gen(59);
  for (int rep = 0; rep < 10; ++rep) {
    const MatrixXd z = oracles::random_matrix(gen, 5 + rep, 2);
    const MatrixXd mu = oracles::random_matrix(gen, 12, 2);
    CHECK(lemma2_identity_gap(z, mu) < 1e-8);
  }
  // Matching summaries make the divergence itself vanish.
  const MatrixXd mu = oracles::random_matrix(gen, 6, 2);
  const auto s = fit_gaussian_summary(mu);
  CHECK(kl_gaussian(s, s) <= 1e-12);
  CHECK(lemma2_identity_gap(mu, mu) < 1e-10);
}

TEST_CASE("vanishing-epsilon discrepancy shrinks toward the regularized bound") {
  std::mt19937_64 gen(61);
  const Instance inst = random_instance(gen, 10, 3, 2, 3);
  EbState eb = make_eb(gen, inst.state, 1e-1);
  const std::vector<double> eps_seq{1e-1, 1e-2, 1e-3};

  const auto disc = theorem3_discrepancy(inst.state, eb, inst.y, eps_seq);
  CHECK(disc[0] > disc[1]);
  CHECK(disc[1] > disc[2]);
  LvmState at_nu = inst.state;
  at_nu.z = eb.nu;
  const double melbo_total =
      melbo(at_nu, LvmKind::Lsvgp, inst.y, inst.state.m(), KlDirection::ZX).total;
  CHECK(disc[2] < 1e-3 * std::abs(melbo_total));

  // Monte Carlo variant agrees with the plug-in path as epsilon shrinks.
  const auto disc_mc = theorem3_discrepancy(inst.state, eb, inst.y, {1e-2, 1e-3, 1e-4}, 8, 99);
  CHECK(disc_mc[0] > disc_mc[2]);
  CHECK(disc_mc[2] < 1e-2 * std::abs(melbo_total));
}

TEST_CASE("empirical-bayes gradients match finite differences") {
  std::mt19937_64 gen(67);
  const Instance inst = random_instance(gen, 6, 2, 2, 3);
  EbState eb = make_eb(gen, inst.state, 1e-3);
  lvm_pack::Packer p{6, 2, 3, 2, true};

  // nu occupies the z slot of the packed vector.
  LvmState proto = inst.state;
  proto.z = eb.nu;
  const VectorXd t0 = p.pack(proto);
  const auto unpack_eb = [&](const VectorXd& t, LvmState& st, EbState& e2) {
    st = p.unpack(proto, t);
    e2 = eb;
    e2.nu = st.z;
  };

  const auto eval_lelbo = [&](const VectorXd& t) {
    LvmState st;
    EbState e2;
    unpack_eb(t, st, e2);
    return eb_bounds(st, e2, inst.y).lelbo_eb;
  };
  const VectorXd fd_l = oracles::finite_difference(eval_lelbo, t0, 1e-6);
  const VectorXd an_l = p.pack_grad(proto, lelbo_eb_grad(inst.state, eb, inst.y));
  CHECK(oracles::max_rel_error(an_l, fd_l, 1e-7) < 1e-4);

  const auto eval_elbo = [&](const VectorXd& t) {
    LvmState st;
    EbState e2;
    unpack_eb(t, st, e2);
    return eb_bounds(st, e2, inst.y).elbo_eb;
  };
  const VectorXd fd_e = oracles::finite_difference(eval_elbo, t0, 1e-6);
  const VectorXd an_e = p.pack_grad(proto, elbo_eb_grad(inst.state, eb, inst.y));
  CHECK(oracles::max_rel_error(an_e, fd_e, 1e-7) < 1e-4);
}

TEST_CASE("regularized bound and loose empirical-bayes bound share gradients as eps -> 0") {
  std::mt19937_64 gen(71);
  const Instance inst = random_instance(gen, 6, 2, 2, 3);
  EbState eb = make_eb(gen, inst.state, 1e-6);
  lvm_pack::Packer p{6, 2, 3, 2, true};
  LvmState proto = inst.state;
  proto.z = eb.nu;
  const VectorXd t0 = p.pack(proto);

  const auto eval_lelbo = [&](const VectorXd& t) {
    LvmState st = p.unpack(proto, t);
    EbState e2 = eb;
    e2.nu = st.z;
    return eb_bounds(st, e2, inst.y).lelbo_eb;
  };
  const auto eval_melbo = [&](const VectorXd& t) {
    LvmState st = p.unpack(proto, t);
    return melbo(st, LvmKind::Lsvgp, inst.y, st.m(), KlDirection::ZX).total;
  };
  const VectorXd fd_l = oracles::finite_difference(eval_lelbo, t0, 1e-6);
  const VectorXd fd_m = oracles::finite_difference(eval_melbo, t0, 1e-6);
  CHECK(oracles::max_rel_error(fd_l, fd_m, 1e-6) < 1e-3);
}
