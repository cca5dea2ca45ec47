#pragma once

#include <map>
#include <string>

#include "sgpreg/schedule.hpp"

namespace sgpreg {

// Dataset source for an experiment batch.
struct DatasetConfig {
  std::string type;              // "synthetic-eq4" | "table" | "multivariate"
  SyntheticSpec synthetic;       // synthetic-eq4 (seed comes from the run)
  std::string path;              // table
  TableOptions table_options;
  bool standardize = false;
  MultivariateSpec multivariate;
  int subset_rows = 0;           // latent runs: per-seed subset without replacement
};

struct ExperimentConfig {
  std::vector<ModelKind> models;
  std::vector<Schedule> schedules;
  std::vector<std::uint64_t> seeds;
  TrainControl control;              // per-run seed is overridden
  std::vector<double> lambda_grid;   // S3/S4; empty = family default
  std::optional<double> lambda_fixed;
  DatasetConfig dataset;
  std::string out_dir;               // empty = no files written
  int workers = 0;                   // 0 = hardware concurrency

  void validate() const;
};

struct ReportRow {
  std::string model;
  std::string schedule;
  double lambda = 0.0;
  std::uint64_t seed = 0;
  std::string note;          // "run", "grid", or "selected"
  RunMetrics metrics;
  std::string error;         // non-empty when the run failed
};

struct AggregateRow {
  std::string model;
  std::string schedule;
  int count = 0;
  // metric name -> (mean, sample sd)
  std::map<std::string, std::pair<double, double>> stats;
};

struct ExperimentReportSet {
  std::vector<ReportRow> rows;
  std::vector<AggregateRow> aggregates;
  std::string config_hash;
  bool any_failed = false;
};

// Hash of the canonical serialized config, embedded in every report row.
std::string config_hash(const ExperimentConfig& config);

// Runs the batch (models x schedules x seeds, with lambda selection on the
// regularized schedules), optionally writing runs.jsonl / runs.tsv /
// aggregates.jsonl / config.json under out_dir.
ExperimentReportSet run_experiment(const ExperimentConfig& config);

// Parses the JSON config document (same keys as the CLI flags).
ExperimentConfig parse_experiment_config(const std::string& json_text);

// One report row as a JSON line; wall_time_s is skippable so reruns can be
// compared byte for byte.
std::string report_row_json(const ReportRow& row, const std::string& config_hash,
                            bool include_wall_time = true);
std::string aggregate_row_json(const AggregateRow& row, const std::string& config_hash);

std::vector<AggregateRow> aggregate_rows(const std::vector<ReportRow>& rows);

// Rendered mean(sd) table for terminal output.
std::string format_aggregate_table(const std::vector<AggregateRow>& aggregates,
                                   const std::string& metric);

// --- multivariate reconstruction protocol (standardize, inject, refit) ---

struct ReconstructionProtocolConfig {
  int n_rows = 80000;
  int n_noisy_rows = 10000;
  double noise_sd = 1.0;
  std::vector<int> m_values = {10, 20, 50};
  int q = 2;
  std::vector<double> lambda_grid = {100.0};   // singleton = fixed weight
  std::uint64_t seed = 0;
  int max_iter = 1000;
  std::string data_path;     // optional table instead of the synthetic source
};

struct ReconstructionRow {
  int m = 0;
  bool regularized = false;
  double lambda = 0.0;
  double rmse_noisy_rows = 0.0;     // reconstruction error on injected rows
  double rmse_clean_rows = 0.0;     // and on untouched rows
  RunMetrics metrics;
};

std::vector<ReconstructionRow> run_reconstruction_protocol(
    const ReconstructionProtocolConfig& config);

// Path resolution against SGPREG_DATA_DIR for non-absolute inputs.
std::string resolve_data_path(const std::string& path);

// Seeded subset of rows without replacement.
MatrixXd sample_rows(const MatrixXd& data, int count, std::uint64_t seed);

}  // namespace sgpreg
