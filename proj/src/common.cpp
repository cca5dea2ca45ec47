#include "sgpreg/common.hpp"

namespace sgpreg {

void require_finite(const Eigen::Ref<const MatrixXd>& m, const std::string& what) {
  if (!m.allFinite()) throw std::invalid_argument(what + ": non-finite entries");
}

Eigen::LLT<MatrixXd> chol_spd(const MatrixXd& a, const std::string& context) {
  Eigen::LLT<MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) {
    throw FactorizationError(context + ": Cholesky factorization failed");
  }
  return llt;
}

}  // namespace sgpreg
