#include "sgpreg/init.hpp"

#include <limits>

#include "sgpreg/rng.hpp"

namespace sgpreg {

MatrixXd pca_init(const MatrixXd& y, int q) {
  const int n = static_cast<int>(y.rows());
  const int d = static_cast<int>(y.cols());
  require(n >= 1 && d >= 1, "pca_init: empty data");
  require(q >= 1 && q <= d, "pca_init: need 1 <= q <= feature count");
  MatrixXd centered = y.rowwise() - y.colwise().mean();
  Eigen::BDCSVD<MatrixXd> svd(centered, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const VectorXd sv = svd.singularValues();
  if (sv.size() < q || sv(q - 1) <= 1e-12 * std::max(1.0, sv(0))) {
    throw std::invalid_argument("pca_init: requested dimension exceeds the data rank");
  }
  return centered * svd.matrixV().leftCols(q);
}

MatrixXd kmeans_init(const MatrixXd& points, int m, std::uint64_t seed) {
  const int n = static_cast<int>(points.rows());
  require(m >= 1 && m <= n, "kmeans_init: need 1 <= m <= point count");
  if (m == n) return points;

  Rng rng = derive_rng(seed, "kmeans");
  MatrixXd centers(m, points.cols());

  // k-means++ seeding.
  centers.row(0) = points.row(rng.uniform_int(n));
  VectorXd d2 = (points.rowwise() - centers.row(0)).rowwise().squaredNorm();
  for (int k = 1; k < m; ++k) {
    const double total = d2.sum();
    int pick = 0;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      pick = n - 1;
      for (int i = 0; i < n; ++i) {
        acc += d2(i);
        if (acc >= target) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<int>(rng.uniform_int(n));
    }
    centers.row(k) = points.row(pick);
    d2 = d2.cwiseMin((points.rowwise() - centers.row(k)).rowwise().squaredNorm());
  }

  std::vector<int> assign(n, -1);
  for (int sweep = 0; sweep < 100; ++sweep) {
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int k = 0; k < m; ++k) {
        const double dist = (points.row(i) - centers.row(k)).squaredNorm();
        if (dist < best_d) {
          best_d = dist;
          best = k;
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
    }
    if (!changed && sweep > 0) break;

    MatrixXd sums = MatrixXd::Zero(m, points.cols());
    std::vector<int> counts(m, 0);
    for (int i = 0; i < n; ++i) {
      sums.row(assign[i]) += points.row(i);
      ++counts[assign[i]];
    }
    for (int k = 0; k < m; ++k) {
      if (counts[k] > 0) {
        centers.row(k) = sums.row(k) / counts[k];
      } else {
        // Reassign an empty cluster to the point farthest from its center.
        int far = 0;
        double far_d = -1.0;
        for (int i = 0; i < n; ++i) {
          const double dist = (points.row(i) - centers.row(assign[i])).squaredNorm();
          if (dist > far_d) {
            far_d = dist;
            far = i;
          }
        }
        centers.row(k) = points.row(far);
        assign[far] = k;
      }
    }
  }
  return centers;
}

}  // namespace sgpreg
