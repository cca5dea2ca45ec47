#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sgpreg/common.hpp"

namespace sgpreg {

// --- synthetic 1-D regression system ---

struct SyntheticSpec {
  int n_train = 100;
  int n_val = 100;
  int n_test = 100;      // evenly spaced over the domain
  double noise_sd = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct RegressionData {
  MatrixXd x, x_val, x_test;   // column inputs
  VectorXd y, y_val, f_test;   // f_test is noise-free
  double domain_lo = 0.0, domain_hi = 1.0;

  bool has_validation() const { return x_val.rows() > 0; }
  bool has_test() const { return x_test.rows() > 0; }
};

double synthetic_f(double x);
RegressionData generate_synthetic(const SyntheticSpec& spec);

// --- delimited numeric tables ---

struct TableOptions {
  std::optional<bool> header;            // unset = auto-detect
  char delimiter = '\0';                 // 0 = auto
  std::vector<std::string> drop_columns;
};

struct Table {
  MatrixXd values;
  std::vector<std::string> column_names;
};

Table load_table(const std::string& path, const TableOptions& options = {});

// --- feature standardization (zero mean, unit ML standard deviation) ---

struct Standardization {
  VectorXd mean;
  VectorXd sd;
};

Standardization standardize_in_place(MatrixXd& data,
                                     const std::vector<std::string>& column_names = {});
MatrixXd destandardize(const MatrixXd& data, const Standardization& transform);

// --- row-wise single-feature noise injection ---

struct NoiseInjectionSpec {
  int n_noisy_rows = 0;
  double noise_sd = 1.0;
  std::uint64_t seed = 0;
};

struct NoiseMask {
  std::vector<std::pair<int, int>> entries;   // (row, feature)
};

NoiseMask inject_noise(MatrixXd& data, const NoiseInjectionSpec& spec);

double rmse(const MatrixXd& a, const MatrixXd& b);
double rmse(const VectorXd& a, const VectorXd& b);
// Restricted to the rows listed (or excluded) by a mask.
double rmse_rows(const MatrixXd& a, const MatrixXd& b, const std::vector<int>& rows);

// --- multivariate reconstruction benchmark (nonlinear 2-D latent generator) ---

struct MultivariateSpec {
  int n_rows = 80000;
  std::uint64_t seed = 0;
};

// 8 deterministic nonlinear features of a 2-D standard-normal latent.
MatrixXd generate_multivariate(const MultivariateSpec& spec);

}  // namespace sgpreg
