#pragma once

#include "sgpreg/common.hpp"

namespace sgpreg {

// Leading-q principal-component scores of the column-centered data.
// Throws if q exceeds the numerical rank.
MatrixXd pca_init(const MatrixXd& y, int q);

// Lloyd's algorithm with k-means++ seeding, at most 100 sweeps.
MatrixXd kmeans_init(const MatrixXd& points, int m, std::uint64_t seed);

}  // namespace sgpreg
