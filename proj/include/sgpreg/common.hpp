#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace sgpreg {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr const char* kVersion = "0.1.0";

// Relative scale of the diagonal ridge added to kernel matrices before
// factorization.  Applied as jitter = kJitterScale * variance.
inline constexpr double kJitterScale = 1e-6;

// A positive-(semi)definite factorization failed even after jitter.
class FactorizationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A stated precondition of a bound or theorem does not hold for the inputs.
class PreconditionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

void require_finite(const Eigen::Ref<const MatrixXd>& m, const std::string& what);

// Cholesky of an SPD matrix; throws FactorizationError naming `context`.
Eigen::LLT<MatrixXd> chol_spd(const MatrixXd& a, const std::string& context);

inline double logdet_from_chol(const Eigen::LLT<MatrixXd>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

inline MatrixXd symmetrized(const MatrixXd& a) { return 0.5 * (a + a.transpose()); }

}  // namespace sgpreg
