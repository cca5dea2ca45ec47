#include "sgpreg/optimizer.hpp"

#include <cmath>
#include <deque>
#include <limits>

namespace sgpreg {

namespace {

constexpr double kC1 = 1e-4;     // Armijo
constexpr double kC2 = 0.9;      // curvature
constexpr double kInf = std::numeric_limits<double>::infinity();

struct Bounds {
  VectorXd lo, hi;
};

Bounds resolve_bounds(const OptimizeConfig& cfg, int n) {
  Bounds b;
  b.lo = cfg.lower.size() ? cfg.lower : VectorXd::Constant(n, -kInf);
  b.hi = cfg.upper.size() ? cfg.upper : VectorXd::Constant(n, kInf);
  require(b.lo.size() == n && b.hi.size() == n, "maximize: bounds size mismatch");
  require((b.lo.array() <= b.hi.array()).all(), "maximize: lower bound exceeds upper bound");
  return b;
}

VectorXd project(const VectorXd& x, const Bounds& b) {
  return x.cwiseMax(b.lo).cwiseMin(b.hi);
}

// Cubic minimizer of a Hermite interpolant on [a, b] given values and slopes,
// with a bisection safeguard.
double cubic_step(double a, double fa, double ga, double b, double fb, double gb) {
  const double d1 = ga + gb - 3.0 * (fa - fb) / (a - b);
  const double disc = d1 * d1 - ga * gb;
  if (disc >= 0.0) {
    const double d2 = std::copysign(std::sqrt(disc), b - a);
    double t = b - (b - a) * ((gb + d2 - d1) / (gb - ga + 2.0 * d2));
    const double lo = std::min(a, b), hi = std::max(a, b);
    const double margin = 0.1 * (hi - lo);
    if (std::isfinite(t) && t > lo + margin && t < hi - margin) return t;
  }
  return 0.5 * (a + b);
}

struct LineSearchResult {
  double alpha = 0.0;
  double f = 0.0;
  VectorXd g;
  bool ok = false;
  int evals = 0;
};

// Strong-Wolfe search for the minimization problem along d (descent
// direction), restricted to (0, alpha_max].  A step landing exactly on
// alpha_max is accepted on sufficient decrease alone (bound hit).
LineSearchResult wolfe_search(const ObjectiveFn& fmin, const VectorXd& x, const VectorXd& d,
                              double f0, const VectorXd& g0, double alpha_max) {
  LineSearchResult best;
  const double dphi0 = g0.dot(d);
  if (!(dphi0 < 0.0)) return best;

  VectorXd g(x.size());
  const auto eval = [&](double a, double& f, double& dphi) {
    f = fmin(x + a * d, g);
    dphi = g.dot(d);
    ++best.evals;
  };

  const auto accept = [&](double a, double f) {
    best.alpha = a;
    best.f = f;
    best.g = g;
    best.ok = true;
  };

  // zoom phase on a bracket [alo, ahi] with f(alo) the lower value.
  const auto zoom = [&](double alo, double flo, double glo, double ahi, double fhi,
                        double ghi) {
    for (int it = 0; it < 50; ++it) {
      const double a = cubic_step(alo, flo, glo, ahi, fhi, ghi);
      double f, dphi;
      eval(a, f, dphi);
      if (f > f0 + kC1 * a * dphi0 || f >= flo) {
        ahi = a;
        fhi = f;
        ghi = dphi;
      } else {
        if (std::abs(dphi) <= -kC2 * dphi0) {
          accept(a, f);
          return;
        }
        if (dphi * (ahi - alo) >= 0.0) {
          ahi = alo;
          fhi = flo;
          ghi = glo;
        }
        alo = a;
        flo = f;
        glo = dphi;
      }
      if (std::abs(ahi - alo) < 1e-14 * std::max(1.0, std::abs(alo))) break;
    }
    // Interval collapsed: fall back to the sufficient-decrease end.
    if (flo < f0 + kC1 * alo * dphi0 && alo > 0.0) {
      double f, dphi;
      eval(alo, f, dphi);
      if (f < f0) accept(alo, f);
    }
  };

  double a_prev = 0.0, f_prev = f0, g_prev = dphi0;
  double a = std::min(1.0, alpha_max);
  for (int it = 0; it < 30; ++it) {
    double f, dphi;
    eval(a, f, dphi);
    if (f > f0 + kC1 * a * dphi0 || (it > 0 && f >= f_prev)) {
      zoom(a_prev, f_prev, g_prev, a, f, dphi);
      return best;
    }
    if (std::abs(dphi) <= -kC2 * dphi0) {
      accept(a, f);
      return best;
    }
    if (dphi >= 0.0) {
      zoom(a, f, dphi, a_prev, f_prev, g_prev);
      return best;
    }
    if (a >= alpha_max * (1.0 - 1e-12)) {
      // Ran into the box; sufficient decrease already holds.
      accept(a, f);
      return best;
    }
    a_prev = a;
    f_prev = f;
    g_prev = dphi;
    a = std::min(2.0 * a, alpha_max);
  }
  return best;
}

}  // namespace

OptimizeResult maximize(const ObjectiveFn& objective, const VectorXd& x0,
                        const OptimizeConfig& config) {
  require(config.max_iter >= 1, "maximize: max_iter must be >= 1");
  require(config.memory >= 1, "maximize: memory must be >= 1");
  const int n = static_cast<int>(x0.size());
  const Bounds bounds = resolve_bounds(config, n);

  // Internally minimize the negated objective.
  const ObjectiveFn fmin = [&objective](const VectorXd& x, VectorXd& grad) {
    const double v = objective(x, grad);
    grad = -grad;
    return -v;
  };

  OptimizeResult res;
  VectorXd x = project(x0, bounds);
  VectorXd g(n);
  double f = fmin(x, g);
  if (!std::isfinite(f) || !g.allFinite()) {
    throw std::invalid_argument("maximize: objective is not finite at the start point");
  }
  res.trace.push_back(-f);

  std::deque<VectorXd> s_hist, y_hist;
  std::deque<double> rho_hist;

  const auto active_mask = [&](const VectorXd& xx, const VectorXd& gg) {
    Eigen::ArrayXd mask = Eigen::ArrayXd::Ones(n);
    for (int i = 0; i < n; ++i) {
      const bool at_lo = xx(i) <= bounds.lo(i) && gg(i) > 0.0;
      const bool at_hi = xx(i) >= bounds.hi(i) && gg(i) < 0.0;
      if (at_lo || at_hi) mask(i) = 0.0;
    }
    return mask;
  };

  for (int iter = 0; iter < config.max_iter; ++iter) {
    res.iterations = iter;
    const VectorXd pg = project(x - g, bounds) - x;
    if (pg.lpNorm<Eigen::Infinity>() <= config.grad_tol) {
      res.converged = true;
      break;
    }

    const Eigen::ArrayXd mask = active_mask(x, g);
    VectorXd gm = (g.array() * mask).matrix();

    // Two-loop recursion on the free subspace.
    VectorXd d = -gm;
    if (!s_hist.empty()) {
      const int k = static_cast<int>(s_hist.size());
      std::vector<double> a_coef(k);
      VectorXd q = gm;
      for (int i = k - 1; i >= 0; --i) {
        a_coef[i] = rho_hist[i] * s_hist[i].dot(q);
        q -= a_coef[i] * y_hist[i];
      }
      const double gamma = s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
      VectorXd r = gamma * q;
      for (int i = 0; i < k; ++i) {
        const double b = rho_hist[i] * y_hist[i].dot(r);
        r += (a_coef[i] - b) * s_hist[i];
      }
      d = -r;
    }
    d = (d.array() * mask).matrix();
    // Project the direction onto the feasible cone: components pointing out
    // of an already-binding box face would collapse the step interval.
    for (int i = 0; i < n; ++i) {
      if ((x(i) <= bounds.lo(i) && d(i) < 0.0) || (x(i) >= bounds.hi(i) && d(i) > 0.0)) {
        d(i) = 0.0;
      }
    }
    if (d.dot(gm) >= -1e-12 * d.norm() * gm.norm()) {
      d = -gm;   // quasi-Newton direction unusable, restart
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
    }

    double alpha_max = kInf;
    for (int i = 0; i < n; ++i) {
      if (d(i) > 0.0 && std::isfinite(bounds.hi(i))) {
        alpha_max = std::min(alpha_max, (bounds.hi(i) - x(i)) / d(i));
      } else if (d(i) < 0.0 && std::isfinite(bounds.lo(i))) {
        alpha_max = std::min(alpha_max, (bounds.lo(i) - x(i)) / d(i));
      }
    }
    if (!std::isfinite(alpha_max)) alpha_max = 1e12;
    if (alpha_max <= 0.0) {
      res.warnings.emplace_back("line_search_failure");
      break;
    }

    LineSearchResult ls = wolfe_search(fmin, x, d, f, g, alpha_max);
    if ((!ls.ok || ls.f >= f) && !s_hist.empty()) {
      // Retry along steepest descent with fresh curvature memory.
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      d = -gm;
      alpha_max = kInf;
      for (int i = 0; i < n; ++i) {
        if (d(i) > 0.0 && std::isfinite(bounds.hi(i))) {
          alpha_max = std::min(alpha_max, (bounds.hi(i) - x(i)) / d(i));
        } else if (d(i) < 0.0 && std::isfinite(bounds.lo(i))) {
          alpha_max = std::min(alpha_max, (bounds.lo(i) - x(i)) / d(i));
        }
      }
      if (!std::isfinite(alpha_max)) alpha_max = 1e12;
      ls = wolfe_search(fmin, x, d, f, g, alpha_max);
    }
    if (!ls.ok || ls.f >= f) {
      // Last resort: plain backtracking on sufficient decrease alone.
      double a = std::min(1.0, alpha_max);
      VectorXd g_try(n);
      for (int shrink = 0; shrink < 60 && a > 0.0; ++shrink, a *= 0.5) {
        const VectorXd x_try = project(x + a * d, bounds);
        const double f_try = fmin(x_try, g_try);
        if (std::isfinite(f_try) && f_try < f + kC1 * a * g.dot(d) && g_try.allFinite()) {
          ls.ok = true;
          ls.alpha = a;
          ls.f = f_try;
          ls.g = g_try;
          break;
        }
      }
    }
    if (!ls.ok || ls.f >= f) {
      res.warnings.emplace_back("line_search_failure");
      break;
    }

    VectorXd x_new = project(x + ls.alpha * d, bounds);
    if (ls.alpha >= alpha_max * (1.0 - 1e-12)) {
      // Snap coordinates that reached their bound.
      for (int i = 0; i < n; ++i) {
        if (d(i) > 0.0 && (bounds.hi(i) - x(i)) / d(i) <= alpha_max * (1.0 + 1e-12)) {
          if (std::isfinite(bounds.hi(i)) && x_new(i) >= bounds.hi(i) - 1e-14) {
            x_new(i) = bounds.hi(i);
          }
        }
        if (d(i) < 0.0 && std::isfinite(bounds.lo(i)) && x_new(i) <= bounds.lo(i) + 1e-14) {
          x_new(i) = bounds.lo(i);
        }
      }
    }

    const VectorXd s = x_new - x;
    const VectorXd yv = ls.g - g;
    const double sy = s.dot(yv);
    if (sy > 1e-10 * s.norm() * yv.norm()) {
      s_hist.push_back(s);
      y_hist.push_back(yv);
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > config.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }

    x = x_new;
    f = ls.f;
    g = ls.g;
    res.trace.push_back(-f);
    res.iterations = iter + 1;
  }

  if (!res.converged && res.iterations >= config.max_iter) {
    res.warnings.emplace_back("max_iter_reached");
  }
  res.x = x;
  res.value = -f;
  return res;
}

double grad_check(const ObjectiveFn& objective, const VectorXd& x, double step) {
  require(step > 0.0, "grad_check: step must be positive");
  const int n = static_cast<int>(x.size());
  VectorXd g(n);
  objective(x, g);
  VectorXd scratch(n);
  double worst = 0.0;
  for (int i = 0; i < n; ++i) {
    const double h = step * std::max(1.0, std::abs(x(i)));
    VectorXd xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    const double fd = (objective(xp, scratch) - objective(xm, scratch)) / (2.0 * h);
    const double diff = std::abs(fd - g(i));
    if (diff <= 1e-8) continue;   // absolute floor
    worst = std::max(worst, diff / std::max(std::abs(fd), std::abs(g(i))));
  }
  return worst;
}

}  // namespace sgpreg
