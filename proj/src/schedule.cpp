#include "sgpreg/schedule.hpp"

#include <chrono>
#include <cmath>

#include "sgpreg/init.hpp"
#include "sgpreg/rng.hpp"

namespace sgpreg {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kLogBound = 10.0;   // box for log hyperparameters

double ml_variance(const VectorXd& v) {
  const double mean = v.mean();
  return (v.array() - mean).square().sum() / static_cast<double>(v.size());
}

// --- flat parameter layout helpers ---

struct Layout {
  int n_ls = 0;
  int z_rows = 0, z_cols = 0;        // 0 rows = fixed inducing inputs
  int svgp_m = 0;                    // > 0 adds (mean, factor) blocks
  int lvm_n = 0, lvm_q = 0;          // > 0 adds (means, log-vars) blocks
  int lsvgp_d = 0, lsvgp_m = 0;      // > 0 adds per-dimension q(U) blocks

  int tril(int m) const { return m * (m + 1) / 2; }
  int size() const {
    int s = 2 + n_ls + z_rows * z_cols + lvm_n * lvm_q * 2;
    if (svgp_m > 0) s += svgp_m + tril(svgp_m);
    if (lsvgp_d > 0) s += lsvgp_d * (lsvgp_m + tril(lsvgp_m));
    return s;
  }
};

void push_tril(const MatrixXd& lam, VectorXd& t, int& k, VectorXd* lo, VectorXd* hi) {
  const int m = static_cast<int>(lam.rows());
  for (int j = 0; j < m; ++j) {
    for (int i = j; i < m; ++i) {
      if (i == j) {
        t(k) = std::log(lam(i, j));
        if (lo) (*lo)(k) = -kLogBound;
        if (hi) (*hi)(k) = kLogBound;
      } else {
        t(k) = lam(i, j);
      }
      ++k;
    }
  }
}

MatrixXd pop_tril(const VectorXd& t, int& k, int m) {
  MatrixXd lam = MatrixXd::Zero(m, m);
  for (int j = 0; j < m; ++j) {
    for (int i = j; i < m; ++i) {
      lam(i, j) = i == j ? std::exp(t(k)) : t(k);
      ++k;
    }
  }
  return lam;
}

void push_tril_grad(const MatrixXd& dlam, const MatrixXd& lam, VectorXd& g, int& k) {
  const int m = static_cast<int>(lam.rows());
  for (int j = 0; j < m; ++j) {
    for (int i = j; i < m; ++i) {
      g(k++) = i == j ? dlam(i, j) * lam(i, j) : dlam(i, j);
    }
  }
}

// --- initialization ---

KernelSpec init_kernel(KernelFamily family, const MatrixXd& x, double variance) {
  const int d = static_cast<int>(x.cols());
  VectorXd span(d);
  for (int j = 0; j < d; ++j) {
    span(j) = std::max(x.col(j).maxCoeff() - x.col(j).minCoeff(), 1e-3);
  }
  if (family == KernelFamily::Matern32) {
    return KernelSpec::matern32(variance, 0.2 * span.mean());
  }
  return KernelSpec::se_ard(variance, 0.2 * span);
}

MatrixXd even_grid(const RegressionData& data, int m) {
  require(data.x.cols() == 1,
          "schedule S1: the evenly spaced inducing grid is defined for 1-D inputs");
  double lo = data.domain_lo, hi = data.domain_hi;
  if (!(hi > lo)) {
    lo = data.x.minCoeff();
    hi = data.x.maxCoeff();
  }
  return VectorXd::LinSpaced(m, lo, hi);
}

}  // namespace

const char* to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Gpr: return "gpr";
    case ModelKind::Dtc: return "dtc";
    case ModelKind::Fitc: return "fitc";
    case ModelKind::Sgpr: return "sgpr";
    case ModelKind::Svgp: return "svgp";
    case ModelKind::Lsgpr: return "lsgpr";
    case ModelKind::Lsvgp: return "lsvgp";
  }
  return "?";
}

std::optional<ModelKind> model_kind_from_string(std::string_view name) {
  for (ModelKind k : {ModelKind::Gpr, ModelKind::Dtc, ModelKind::Fitc, ModelKind::Sgpr,
                      ModelKind::Svgp, ModelKind::Lsgpr, ModelKind::Lsvgp}) {
    if (name == to_string(k)) return k;
  }
  return std::nullopt;
}

bool is_latent_kind(ModelKind kind) {
  return kind == ModelKind::Lsgpr || kind == ModelKind::Lsvgp;
}

const char* to_string(Schedule s) {
  switch (s) {
    case Schedule::S1: return "s1";
    case Schedule::S2: return "s2";
    case Schedule::S3: return "s3";
    case Schedule::S4: return "s4";
  }
  return "?";
}

std::optional<Schedule> schedule_from_string(std::string_view name) {
  for (Schedule s : {Schedule::S1, Schedule::S2, Schedule::S3, Schedule::S4}) {
    if (name == to_string(s)) return s;
  }
  return std::nullopt;
}

KlDirection schedule_direction(Schedule s) {
  return s == Schedule::S4 ? KlDirection::ZX : KlDirection::XZ;
}

void ScheduleConfig::validate() const {
  const bool regularized = schedule == Schedule::S3 || schedule == Schedule::S4;
  if (regularized) {
    require(lambda >= 0.0 && std::isfinite(lambda), "ScheduleConfig: lambda must be >= 0");
  } else {
    require(lambda == 0.0, "ScheduleConfig: lambda applies to schedules s3/s4 only");
  }
}

static SgpKind sgp_kind_of(ModelKind kind) {
  switch (kind) {
    case ModelKind::Dtc: return SgpKind::SorDtc;
    case ModelKind::Fitc: return SgpKind::Fitc;
    case ModelKind::Sgpr: return SgpKind::Sgpr;
    case ModelKind::Svgp: return SgpKind::Svgp;
    default: throw std::invalid_argument("not an inducing-point regression kind");
  }
}

PreparedProblem prepare_regression(ModelKind kind, const RegressionData& data,
                                   const ScheduleConfig& schedule, const TrainControl& control) {
  require(!is_latent_kind(kind), "prepare_regression: latent kinds use prepare_lvm");
  schedule.validate();
  require(data.x.rows() >= 1 && data.x.rows() == data.y.size(),
          "prepare_regression: bad training data");
  const double var_y = std::max(ml_variance(data.y), 1e-8);
  const KernelSpec kernel0 = init_kernel(control.kernel_family, data.x, var_y);
  const double beta0 = 10.0 / var_y;
  const int n_ls = kernel0.n_lengthscales();
  const int d = static_cast<int>(data.x.cols());

  PreparedProblem prob;

  if (kind == ModelKind::Gpr) {
    GprModel proto;
    proto.kernel = kernel0;
    proto.beta = beta0;
    proto.x = data.x;
    proto.y = data.y;
    const int size = 2 + n_ls;
    VectorXd x0(size);
    x0(0) = std::log(kernel0.variance);
    for (int q = 0; q < n_ls; ++q) x0(1 + q) = std::log(kernel0.lengthscales(q));
    x0(1 + n_ls) = std::log(beta0);
    const auto decode = [proto, n_ls](const VectorXd& t) {
      GprModel m = proto;
      m.kernel.variance = std::exp(t(0));
      for (int q = 0; q < n_ls; ++q) m.kernel.lengthscales(q) = std::exp(t(1 + q));
      m.beta = std::exp(t(1 + n_ls));
      return m;
    };
    prob.objective = [decode](const VectorXd& t, VectorXd& g) {
      const GprModel m = decode(t);
      g = log_marginal_l0_grad(m);
      return log_marginal_l0(m);
    };
    prob.x0 = x0;
    prob.lower = VectorXd::Constant(size, -kLogBound);
    prob.upper = VectorXd::Constant(size, kLogBound);
    prob.finalize = [decode, data, schedule](const OptimizeResult& opt) {
      TrainResult res;
      res.kind = ModelKind::Gpr;
      res.schedule = schedule.schedule;
      res.lambda = schedule.lambda;
      res.trace = opt.trace;
      res.metrics.iterations = opt.iterations;
      res.metrics.warnings = opt.warnings;
      const GprModel m = decode(opt.x);
      res.gpr = m;
      res.metrics.rmse_train = rmse(predict_full(m, data.x).mean, data.y);
      if (data.has_validation()) {
        res.metrics.rmse_val = rmse(predict_full(m, data.x_val).mean, data.y_val);
      }
      if (data.has_test()) {
        res.metrics.rmse_test = rmse(predict_full(m, data.x_test).mean, data.f_test);
      }
      res.metrics.breakdown.recon = opt.value;
      res.metrics.breakdown.total = opt.value;
      res.metrics.breakdown.divergence = kNaN;
      res.metrics.nystrom = kNaN;
      return res;
    };
    return prob;
  }

  // Inducing-point kinds.
  SgpState proto;
  proto.kind = sgp_kind_of(kind);
  proto.kernel = kernel0;
  proto.beta = beta0;
  const bool fixed_z = schedule.schedule == Schedule::S1;
  proto.z = fixed_z ? even_grid(data, control.m)
                    : kmeans_init(data.x, control.m, derive_seed(control.seed, "kmeans"));
  if (kind == ModelKind::Svgp) {
    proto.vu_mean = VectorXd::Zero(control.m);
    proto.vu_chol = MatrixXd(chol_spd(gram_eff_self(kernel0, proto.z), "svgp init").matrixL());
  }

  Layout lay;
  lay.n_ls = n_ls;
  if (!fixed_z) {
    lay.z_rows = control.m;
    lay.z_cols = d;
  }
  if (kind == ModelKind::Svgp) lay.svgp_m = control.m;
  const int size = lay.size();

  VectorXd x0(size), lo = VectorXd::Constant(size, -kInf), hi = VectorXd::Constant(size, kInf);
  int k = 0;
  x0(k) = std::log(proto.kernel.variance);
  lo(k) = -kLogBound;
  hi(k) = kLogBound;
  ++k;
  for (int q = 0; q < n_ls; ++q, ++k) {
    x0(k) = std::log(proto.kernel.lengthscales(q));
    lo(k) = -kLogBound;
    hi(k) = kLogBound;
  }
  x0(k) = std::log(proto.beta);
  lo(k) = -kLogBound;
  hi(k) = kLogBound;
  ++k;
  if (!fixed_z) {
    for (int j = 0; j < d; ++j)
      for (int i = 0; i < control.m; ++i) x0(k++) = proto.z(i, j);
  }
  if (kind == ModelKind::Svgp) {
    for (int i = 0; i < control.m; ++i) x0(k++) = proto.vu_mean(i);
    push_tril(proto.vu_chol, x0, k, &lo, &hi);
  }

  const int m_count = control.m;
  const auto decode = [proto, lay, n_ls, d, m_count, fixed_z, kind](const VectorXd& t) {
    SgpState st = proto;
    int kk = 0;
    st.kernel.variance = std::exp(t(kk++));
    for (int q = 0; q < n_ls; ++q) st.kernel.lengthscales(q) = std::exp(t(kk++));
    st.beta = std::exp(t(kk++));
    if (!fixed_z) {
      for (int j = 0; j < d; ++j)
        for (int i = 0; i < m_count; ++i) st.z(i, j) = t(kk++);
    }
    if (kind == ModelKind::Svgp) {
      for (int i = 0; i < m_count; ++i) st.vu_mean(i) = t(kk++);
      st.vu_chol = pop_tril(t, kk, m_count);
    }
    return st;
  };

  const Schedule sched = schedule.schedule;
  const double lambda = schedule.lambda;
  const KlDirection dir = schedule_direction(sched);
  const MatrixXd x_train = data.x;
  const VectorXd y_train = data.y;

  prob.objective = [decode, lay, n_ls, d, m_count, fixed_z, kind, sched, lambda, dir, x_train,
                    y_train](const VectorXd& t, VectorXd& g) {
    const SgpState st = decode(t);
    SgpGradients grads = objective_grad(st, x_train, y_train);
    double value = grads.value;
    if ((sched == Schedule::S3 || sched == Schedule::S4) && lambda != 0.0) {
      const auto div = divergence_and_grad_z(x_train, st.z, dir);
      value -= lambda * div.value;
      grads.dz -= lambda * div.dz;
    }
    g.resize(t.size());
    int kk = 0;
    g(kk++) = grads.dlog_variance;
    for (int q = 0; q < n_ls; ++q) g(kk++) = grads.dlog_lengthscales(q);
    g(kk++) = grads.dlog_beta;
    if (!fixed_z) {
      for (int j = 0; j < d; ++j)
        for (int i = 0; i < m_count; ++i) g(kk++) = grads.dz(i, j);
    }
    if (kind == ModelKind::Svgp) {
      for (int i = 0; i < m_count; ++i) g(kk++) = grads.dvu_mean(i);
      push_tril_grad(grads.dvu_chol, st.vu_chol, g, kk);
    }
    return value;
  };
  prob.x0 = x0;
  prob.lower = lo;
  prob.upper = hi;

  prob.finalize = [decode, data, schedule, kind](const OptimizeResult& opt) {
    TrainResult res;
    res.kind = kind;
    res.schedule = schedule.schedule;
    res.lambda = schedule.lambda;
    res.trace = opt.trace;
    res.metrics.iterations = opt.iterations;
    res.metrics.warnings = opt.warnings;
    const SgpState st = decode(opt.x);
    res.sgp = st;
    res.metrics.rmse_train = rmse(predict_sgp(st, data.x, data.y, data.x).mean, data.y);
    if (data.has_validation()) {
      res.metrics.rmse_val = rmse(predict_sgp(st, data.x, data.y, data.x_val).mean, data.y_val);
    }
    if (data.has_test()) {
      res.metrics.rmse_test =
          rmse(predict_sgp(st, data.x, data.y, data.x_test).mean, data.f_test);
    }
    res.metrics.nystrom = nystrom_error(st.kernel, data.x, st.z);
    const double recon = objective_l1(st, data.x, data.y);
    res.metrics.breakdown = regularized_objective(
        recon, data.x, st.z, schedule.lambda, schedule_direction(schedule.schedule));
    return res;
  };
  return prob;
}

TrainResult run_schedule(ModelKind kind, const RegressionData& data,
                         const ScheduleConfig& schedule, const TrainControl& control) {
  const auto t0 = std::chrono::steady_clock::now();
  const PreparedProblem prob = prepare_regression(kind, data, schedule, control);
  OptimizeConfig cfg;
  cfg.max_iter = control.max_iter;
  cfg.grad_tol = control.grad_tol;
  cfg.memory = control.memory;
  cfg.lower = prob.lower;
  cfg.upper = prob.upper;
  const OptimizeResult opt = maximize(prob.objective, prob.x0, cfg);
  TrainResult res = prob.finalize(opt);
  res.metrics.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

PreparedProblem prepare_lvm(ModelKind kind, const MatrixXd& y, const ScheduleConfig& schedule,
                            const TrainControl& control) {
  require(is_latent_kind(kind), "prepare_lvm: regression kinds use prepare_regression");
  schedule.validate();
  const int n = static_cast<int>(y.rows());
  const int d_out = static_cast<int>(y.cols());
  const int q = control.q;
  const int m = control.m;
  require(n >= 2 && d_out >= 1, "prepare_lvm: need at least two rows");
  require(m >= 1 && m <= n, "prepare_lvm: need 1 <= m <= n");

  LvmState proto;
  proto.q_x_means = pca_init(y, q);
  proto.q_x_vars = MatrixXd::Constant(n, q, 0.1);
  proto.z = kmeans_init(proto.q_x_means, m, derive_seed(control.seed, "kmeans"));
  double var_y = 0.0;
  for (int j = 0; j < d_out; ++j) var_y += ml_variance(y.col(j));
  var_y = std::max(var_y / d_out, 1e-8);
  VectorXd ls0(q);
  for (int j = 0; j < q; ++j) {
    ls0(j) = std::max(std::sqrt(ml_variance(proto.q_x_means.col(j))), 1e-3);
  }
  proto.kernel = KernelSpec::se_ard(var_y, ls0);
  const bool lsvgp = kind == ModelKind::Lsvgp;
  // The uncollapsed model starts from a zero-mean q(U); a noise level near
  // the data variance keeps that start coherent.  The collapsed bound works
  // with the optimal q(U) and can start confident.
  proto.beta = lsvgp ? 1.0 / var_y : 100.0 / var_y;
  if (lsvgp) {
    // Prior-matched variational start: zero mean, covariance factor from the
    // prior over the inducing outputs.
    const MatrixXd l0 =
        MatrixXd(chol_spd(gram_eff_self(proto.kernel, proto.z), "lsvgp init").matrixL());
    proto.q_u_means.assign(d_out, VectorXd::Zero(m));
    proto.q_u_chols.assign(d_out, l0);
  }

  const bool fixed_z = schedule.schedule == Schedule::S1;

  Layout lay;
  lay.n_ls = q;
  lay.lvm_n = n;
  lay.lvm_q = q;
  if (!fixed_z) {
    lay.z_rows = m;
    lay.z_cols = q;
  }
  if (lsvgp) {
    lay.lsvgp_d = d_out;
    lay.lsvgp_m = m;
  }
  const int size = lay.size();
  VectorXd x0(size), lo = VectorXd::Constant(size, -kInf), hi = VectorXd::Constant(size, kInf);
  int k = 0;
  x0(k) = std::log(proto.kernel.variance);
  lo(k) = -kLogBound;
  hi(k) = kLogBound;
  ++k;
  for (int j = 0; j < q; ++j, ++k) {
    x0(k) = std::log(proto.kernel.lengthscales(j));
    lo(k) = -kLogBound;
    hi(k) = kLogBound;
  }
  x0(k) = std::log(proto.beta);
  lo(k) = -kLogBound;
  hi(k) = kLogBound;
  ++k;
  for (int j = 0; j < q; ++j)
    for (int i = 0; i < n; ++i) x0(k++) = proto.q_x_means(i, j);
  for (int j = 0; j < q; ++j)
    for (int i = 0; i < n; ++i) {
      x0(k) = std::log(proto.q_x_vars(i, j));
      lo(k) = -kLogBound;
      hi(k) = kLogBound;
      ++k;
    }
  if (!fixed_z) {
    for (int j = 0; j < q; ++j)
      for (int i = 0; i < m; ++i) x0(k++) = proto.z(i, j);
  }
  if (lsvgp) {
    for (int dd = 0; dd < d_out; ++dd) {
      for (int i = 0; i < m; ++i) x0(k++) = proto.q_u_means[dd](i);
      push_tril(proto.q_u_chols[dd], x0, k, &lo, &hi);
    }
  }

  const auto decode = [proto, n, q, m, d_out, fixed_z, lsvgp](const VectorXd& t) {
    LvmState st = proto;
    int kk = 0;
    st.kernel.variance = std::exp(t(kk++));
    for (int j = 0; j < q; ++j) st.kernel.lengthscales(j) = std::exp(t(kk++));
    st.beta = std::exp(t(kk++));
    for (int j = 0; j < q; ++j)
      for (int i = 0; i < n; ++i) st.q_x_means(i, j) = t(kk++);
    for (int j = 0; j < q; ++j)
      for (int i = 0; i < n; ++i) st.q_x_vars(i, j) = std::exp(t(kk++));
    if (!fixed_z) {
      for (int j = 0; j < q; ++j)
        for (int i = 0; i < m; ++i) st.z(i, j) = t(kk++);
    }
    if (lsvgp) {
      for (int dd = 0; dd < d_out; ++dd) {
        for (int i = 0; i < m; ++i) st.q_u_means[dd](i) = t(kk++);
        st.q_u_chols[dd] = pop_tril(t, kk, m);
      }
    }
    return st;
  };

  const LvmKind lkind = lsvgp ? LvmKind::Lsvgp : LvmKind::Lsgpr;
  const double lambda =
      (schedule.schedule == Schedule::S3 || schedule.schedule == Schedule::S4) ? schedule.lambda
                                                                               : 0.0;
  const KlDirection dir = schedule_direction(schedule.schedule);
  const MatrixXd y_copy = y;

  PreparedProblem prob;
  prob.objective = [decode, n, q, m, d_out, fixed_z, lsvgp, lkind, lambda, dir, y_copy](
                       const VectorXd& t, VectorXd& g) {
    const LvmState st = decode(t);
    const LvmGradients grads = melbo_grad(st, lkind, y_copy, lambda, dir);
    g.resize(t.size());
    int kk = 0;
    g(kk++) = grads.dlog_variance;
    for (int j = 0; j < q; ++j) g(kk++) = grads.dlog_lengthscales(j);
    g(kk++) = grads.dlog_beta;
    for (int j = 0; j < q; ++j)
      for (int i = 0; i < n; ++i) g(kk++) = grads.dq_x_means(i, j);
    for (int j = 0; j < q; ++j)
      for (int i = 0; i < n; ++i) g(kk++) = grads.dq_x_vars(i, j) * st.q_x_vars(i, j);
    if (!fixed_z) {
      for (int j = 0; j < q; ++j)
        for (int i = 0; i < m; ++i) g(kk++) = grads.dz(i, j);
    }
    if (lsvgp) {
      for (int dd = 0; dd < d_out; ++dd) {
        for (int i = 0; i < m; ++i) g(kk++) = grads.dq_u_means[dd](i);
        push_tril_grad(grads.dq_u_chols[dd], st.q_u_chols[dd], g, kk);
      }
    }
    return grads.value;
  };
  prob.x0 = x0;
  prob.lower = lo;
  prob.upper = hi;

  prob.finalize = [decode, y_copy, schedule, kind, lkind, d_out, q](const OptimizeResult& opt) {
    TrainResult res;
    res.kind = kind;
    res.schedule = schedule.schedule;
    res.lambda = schedule.lambda;
    res.trace = opt.trace;
    res.metrics.iterations = opt.iterations;
    res.metrics.warnings = opt.warnings;
    if (q > d_out) res.metrics.warnings.emplace_back("latent_dim_exceeds_output_dim");
    const LvmState st = decode(opt.x);
    res.lvm = st;
    res.metrics.rmse_train = rmse(lvm_reconstruct(st, lkind, y_copy), y_copy);
    res.metrics.askl_value = askl(st.q_x_means, st.z);
    if (st.n() <= 5000) {
      res.metrics.nystrom = nystrom_error(st.kernel, st.q_x_means, st.z);
    }
    const double recon =
        lkind == LvmKind::Lsgpr ? elbo_lsgpr(st, y_copy) : elbo_lsvgp(st, y_copy);
    res.metrics.breakdown = regularized_objective(
        recon, st.q_x_means, st.z, schedule.lambda, schedule_direction(schedule.schedule));
    return res;
  };
  return prob;
}

TrainResult run_schedule_lvm(ModelKind kind, const MatrixXd& y, const ScheduleConfig& schedule,
                             const TrainControl& control) {
  const auto t0 = std::chrono::steady_clock::now();
  const PreparedProblem prob = prepare_lvm(kind, y, schedule, control);
  OptimizeConfig cfg;
  cfg.max_iter = control.max_iter;
  cfg.grad_tol = control.grad_tol;
  cfg.memory = control.memory;
  cfg.lower = prob.lower;
  cfg.upper = prob.upper;
  const OptimizeResult opt = maximize(prob.objective, prob.x0, cfg);
  TrainResult res = prob.finalize(opt);
  res.metrics.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

namespace {

LambdaSelection select_lambda_impl(const std::vector<double>& grid,
                                   const std::function<TrainResult(double)>& run,
                                   bool use_validation) {
  require(!grid.empty(), "select_lambda: empty grid");
  for (double v : grid) require(v >= 0.0 && std::isfinite(v), "select_lambda: bad grid value");

  LambdaSelection sel;
  double best = kInf;
  bool found = false;
  for (double lambda : grid) {
    TrainResult res;
    try {
      res = run(lambda);
    } catch (const std::exception& e) {
      sel.failures.push_back("lambda=" + std::to_string(lambda) + ": " + e.what());
      continue;
    }
    const double crit = use_validation ? res.metrics.rmse_val : res.metrics.rmse_train;
    sel.per_lambda.push_back(res);
    if (std::isfinite(crit) && crit < best) {
      best = crit;
      sel.best_lambda = lambda;
      sel.best = std::move(res);
      found = true;
    }
  }
  if (!found) {
    std::string msg = "select_lambda: every run failed";
    for (const auto& f : sel.failures) msg += "; " + f;
    throw std::runtime_error(msg);
  }
  return sel;
}

}  // namespace

LambdaSelection select_lambda(ModelKind kind, const RegressionData& data, Schedule schedule,
                              const std::vector<double>& grid, const TrainControl& control) {
  require(schedule == Schedule::S3 || schedule == Schedule::S4,
          "select_lambda: schedule must be s3 or s4");
  require(data.has_validation(), "select_lambda: validation split required");
  return select_lambda_impl(
      grid,
      [&](double lambda) {
        return run_schedule(kind, data, ScheduleConfig{schedule, lambda}, control);
      },
      true);
}

LambdaSelection select_lambda_lvm(ModelKind kind, const MatrixXd& y, Schedule schedule,
                                  const std::vector<double>& grid,
                                  const TrainControl& control) {
  require(schedule == Schedule::S3 || schedule == Schedule::S4,
          "select_lambda_lvm: schedule must be s3 or s4");
  return select_lambda_impl(
      grid,
      [&](double lambda) {
        return run_schedule_lvm(kind, y, ScheduleConfig{schedule, lambda}, control);
      },
      false);
}

std::vector<double> log_lambda_grid(double lo, double hi, int count) {
  require(lo > 0.0 && hi > lo && count >= 2, "log_lambda_grid: bad range");
  std::vector<double> grid(count);
  const double llo = std::log10(lo), lhi = std::log10(hi);
  for (int i = 0; i < count; ++i) {
    grid[i] = std::pow(10.0, llo + (lhi - llo) * i / (count - 1));
  }
  grid.front() = lo;
  grid.back() = hi;
  return grid;
}

std::vector<double> lvm_lambda_grid() { return {1.0, 10.0, 100.0, 1000.0}; }

}  // namespace sgpreg
