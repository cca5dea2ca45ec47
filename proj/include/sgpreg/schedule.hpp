#pragma once

#include <optional>
#include <string_view>

#include "sgpreg/data.hpp"
#include "sgpreg/exact_gp.hpp"
#include "sgpreg/latent.hpp"
#include "sgpreg/optimizer.hpp"
#include "sgpreg/sparse.hpp"

namespace sgpreg {

enum class ModelKind { Gpr, Dtc, Fitc, Sgpr, Svgp, Lsgpr, Lsvgp };

const char* to_string(ModelKind kind);
std::optional<ModelKind> model_kind_from_string(std::string_view name);
bool is_latent_kind(ModelKind kind);

// Inducing-input handling during training:
//   S1 fixes them at their initialization (even grid for 1-D regression,
//   k-means centroids for latent models) and trains the remaining parameters.
//   S2 trains them jointly.  S3/S4 add the divergence penalty with the
//   forward/reverse KL direction respectively.
enum class Schedule { S1, S2, S3, S4 };

const char* to_string(Schedule s);
std::optional<Schedule> schedule_from_string(std::string_view name);
KlDirection schedule_direction(Schedule s);

struct ScheduleConfig {
  Schedule schedule = Schedule::S2;
  double lambda = 0.0;   // meaningful for S3/S4 only
  void validate() const;
};

struct TrainControl {
  KernelFamily kernel_family = KernelFamily::Matern32;
  int m = 10;            // inducing inputs
  int q = 2;             // latent dimension (latent kinds)
  int max_iter = 1000;
  double grad_tol = 1e-5;
  int memory = 10;
  std::uint64_t seed = 0;
};

struct RunMetrics {
  double rmse_train = std::numeric_limits<double>::quiet_NaN();
  double rmse_val = std::numeric_limits<double>::quiet_NaN();
  double rmse_test = std::numeric_limits<double>::quiet_NaN();
  double nystrom = std::numeric_limits<double>::quiet_NaN();
  double askl_value = std::numeric_limits<double>::quiet_NaN();
  ObjectiveBreakdown breakdown;
  int iterations = 0;
  double wall_time_s = 0.0;
  std::vector<std::string> warnings;
};

struct TrainResult {
  ModelKind kind = ModelKind::Gpr;
  Schedule schedule = Schedule::S1;
  double lambda = 0.0;
  RunMetrics metrics;
  std::vector<double> trace;
  std::optional<GprModel> gpr;
  std::optional<SgpState> sgp;
  std::optional<LvmState> lvm;
};

// A packed, bounded maximization problem and the decoding of its solution.
struct PreparedProblem {
  ObjectiveFn objective;
  VectorXd x0;
  VectorXd lower, upper;
  std::function<TrainResult(const OptimizeResult&)> finalize;
};

PreparedProblem prepare_regression(ModelKind kind, const RegressionData& data,
                                   const ScheduleConfig& schedule, const TrainControl& control);
TrainResult run_schedule(ModelKind kind, const RegressionData& data,
                         const ScheduleConfig& schedule, const TrainControl& control);

PreparedProblem prepare_lvm(ModelKind kind, const MatrixXd& y, const ScheduleConfig& schedule,
                            const TrainControl& control);
TrainResult run_schedule_lvm(ModelKind kind, const MatrixXd& y, const ScheduleConfig& schedule,
                             const TrainControl& control);

struct LambdaSelection {
  double best_lambda = 0.0;
  TrainResult best;
  std::vector<TrainResult> per_lambda;        // successful runs, grid order
  std::vector<std::string> failures;
};

// Trains once per grid value and keeps the run with the smallest selection
// RMSE (validation RMSE for regression, reconstruction RMSE for latent
// models); ties resolve toward the smaller lambda.
LambdaSelection select_lambda(ModelKind kind, const RegressionData& data, Schedule schedule,
                              const std::vector<double>& grid, const TrainControl& control);
LambdaSelection select_lambda_lvm(ModelKind kind, const MatrixXd& y, Schedule schedule,
                                  const std::vector<double>& grid, const TrainControl& control);

// Logarithmically evenly spaced grid, endpoints included.
std::vector<double> log_lambda_grid(double lo = 1e-2, double hi = 1e2, int count = 20);
// Default grid for latent models.
std::vector<double> lvm_lambda_grid();

}  // namespace sgpreg
