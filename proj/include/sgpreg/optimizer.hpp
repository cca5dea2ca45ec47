#pragma once

#include <functional>
#include <string>
#include <vector>

#include "sgpreg/common.hpp"

namespace sgpreg {

// Objective contract: returns the value at x and fills `grad` (same size as x).
using ObjectiveFn = std::function<double(const VectorXd& x, VectorXd& grad)>;

struct OptimizeConfig {
  int max_iter = 1000;
  double grad_tol = 1e-5;      // inf-norm of the projected gradient
  int memory = 10;             // correction pairs
  VectorXd lower;              // empty = unbounded
  VectorXd upper;
};

struct OptimizeResult {
  VectorXd x;
  double value = 0.0;
  std::vector<double> trace;   // accepted objective values, non-decreasing
  int iterations = 0;
  bool converged = false;
  std::vector<std::string> warnings;
};

// Limited-memory quasi-Newton ascent with box constraints: projected-gradient
// convergence test, bound-aware search directions, strong-Wolfe cubic line
// search.  On a line-search collapse the best point so far is returned with a
// warning flag.
OptimizeResult maximize(const ObjectiveFn& objective, const VectorXd& x0,
                        const OptimizeConfig& config);

// Componentwise central-difference check of the objective's gradient.
// Returns the max relative error; absolute discrepancies below 1e-8 are
// treated as zero.
double grad_check(const ObjectiveFn& objective, const VectorXd& x, double step);

}  // namespace sgpreg
