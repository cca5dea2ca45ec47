#include "sgpreg/experiment.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "doctest.h"

using namespace sgpreg;

namespace {

ExperimentConfig tiny_config() {
  ExperimentConfig cfg;
  cfg.models = {ModelKind::Dtc};
  cfg.schedules = {Schedule::S1, Schedule::S3};
  cfg.seeds = {1, 2};
  cfg.control.kernel_family = KernelFamily::Matern32;
  cfg.control.m = 5;
  cfg.control.max_iter = 60;
  cfg.lambda_grid = {0.5, 2.0};
  cfg.dataset.type = "synthetic-eq4";
  cfg.dataset.synthetic.n_train = 30;
  cfg.dataset.synthetic.n_val = 30;
  cfg.dataset.synthetic.n_test = 40;
  cfg.workers = 2;
  return cfg;
}

std::string rows_fingerprint(const ExperimentReportSet& set) {
  std::string s;
  for (const auto& row : set.rows) {
    s += report_row_json(row, set.config_hash, /*include_wall_time=*/false);
    s += '\n';
  }
  return s;
}

}  // namespace

TEST_CASE("config validation rejects empty and inconsistent setups") {
  ExperimentConfig cfg = tiny_config();
  cfg.models.clear();
  CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("empty model list"),
                       std::invalid_argument);
  cfg = tiny_config();
  cfg.models = {ModelKind::Lsvgp};
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);   // latent on synthetic-eq4
  cfg = tiny_config();
  cfg.dataset.type = "nope";
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("json config parsing mirrors the flag surface") {
  const std::string text = R"({
    "models": ["dtc", "sgpr"],
    "schedules": ["s2", "s3"],
    "seed_range": [3, 5],
    "kernel": "matern32",
    "m": 7,
    "max_iter": 200,
    "lambda_grid": [1.0, 10.0],
    "dataset": {"type": "synthetic-eq4", "n_train": 50}
  })";
  const auto cfg = parse_experiment_config(text);
  CHECK(cfg.models.size() == 2);
  CHECK(cfg.schedules.size() == 2);
  CHECK(cfg.seeds == std::vector<std::uint64_t>{3, 4, 5});
  CHECK(cfg.control.m == 7);
  CHECK(cfg.dataset.synthetic.n_train == 50);

  CHECK_THROWS_AS(parse_experiment_config("{nope"), std::invalid_argument);
  CHECK_THROWS_AS(parse_experiment_config(R"({"models":["bogus"],"schedules":["s1"],
    "seeds":[1],"dataset":{"type":"synthetic-eq4"}})"),
                  std::invalid_argument);
}

TEST_CASE("sweep emits the documented row structure") {
  const auto set = run_experiment(tiny_config());
  CHECK(!set.any_failed);
  int s1_rows = 0, grid_rows = 0, selected_rows = 0;
  for (const auto& row : set.rows) {
    CHECK(row.model == "dtc");
    if (row.schedule == "s1") {
      ++s1_rows;
      CHECK(row.note == "run");
    } else {
      if (row.note == "grid") ++grid_rows;
      if (row.note == "selected") ++selected_rows;
    }
  }
  CHECK(s1_rows == 2);                  // one per seed
  CHECK(grid_rows == 2 * 2);            // grid size x seeds
  CHECK(selected_rows == 2);            // one per seed
  CHECK(set.rows.size() == 8);

  // Aggregates group final rows only.
  REQUIRE(set.aggregates.size() == 2);
  for (const auto& a : set.aggregates) {
    CHECK(a.count == 2);
    CHECK(a.stats.count("rmse_test") == 1);
  }
}

TEST_CASE("selected lambda minimizes the validation rmse within its grid") {
  const auto set = run_experiment(tiny_config());
  for (std::uint64_t seed : {1, 2}) {
    double best = std::numeric_limits<double>::infinity();
    double best_lambda = -1.0;
    double selected_lambda = -2.0, selected_val = -1.0;
    for (const auto& row : set.rows) {
      if (row.schedule != "s3" || row.seed != seed) continue;
      if (row.note == "grid" && row.metrics.rmse_val < best) {
        best = row.metrics.rmse_val;
        best_lambda = row.lambda;
      }
      if (row.note == "selected") {
        selected_lambda = row.lambda;
        selected_val = row.metrics.rmse_val;
      }
    }
    CHECK(selected_lambda == best_lambda);
    CHECK(selected_val == best);
  }
}

TEST_CASE("reruns with one master seed produce byte-identical records") {
  const auto a = run_experiment(tiny_config());
  const auto b = run_experiment(tiny_config());
  CHECK(rows_fingerprint(a) == rows_fingerprint(b));
  CHECK(a.config_hash == b.config_hash);
}

TEST_CASE("per-run failures are recorded without aborting the batch") {
  ExperimentConfig cfg;
  cfg.models = {ModelKind::Lsgpr};
  cfg.schedules = {Schedule::S2};
  cfg.seeds = {1};
  cfg.control.q = 9;   // exceeds the 8 available features
  cfg.control.m = 4;
  cfg.control.max_iter = 10;
  cfg.dataset.type = "multivariate";
  cfg.dataset.multivariate.n_rows = 60;
  const auto set = run_experiment(cfg);
  CHECK(set.any_failed);
  REQUIRE(set.rows.size() == 1);
  CHECK(!set.rows[0].error.empty());
}

TEST_CASE("report files land on disk and carry the config hash") {
  namespace fs = std::filesystem;
  ExperimentConfig cfg = tiny_config();
  cfg.schedules = {Schedule::S1};
  cfg.seeds = {1};
  cfg.out_dir = (fs::temp_directory_path() / "sgpreg_exp_test").string();
  fs::remove_all(cfg.out_dir);
  const auto set = run_experiment(cfg);
  CHECK(fs::exists(fs::path(cfg.out_dir) / "runs.jsonl"));
  CHECK(fs::exists(fs::path(cfg.out_dir) / "runs.tsv"));
  CHECK(fs::exists(fs::path(cfg.out_dir) / "aggregates.jsonl"));
  CHECK(fs::exists(fs::path(cfg.out_dir) / "config.json"));
  std::ifstream runs(fs::path(cfg.out_dir) / "runs.jsonl");
  std::string line;
  REQUIRE(std::getline(runs, line));
  CHECK(line.find(set.config_hash) != std::string::npos);
  CHECK(line.find("wall_time_s") != std::string::npos);
}

TEST_CASE("nan metrics serialize as null and wall time is strippable") {
  ReportRow row;
  row.model = "gpr";
  row.schedule = "s1";
  row.metrics.rmse_train = 0.5;
  const std::string with_time = report_row_json(row, "h");
  const std::string without = report_row_json(row, "h", false);
  CHECK(with_time.find("wall_time_s") != std::string::npos);
  CHECK(without.find("wall_time_s") == std::string::npos);
  CHECK(without.find("\"rmse_test\":null") != std::string::npos);
  CHECK(without.find("\"rmse_train\":0.5") != std::string::npos);
}

TEST_CASE("row sampling is seeded and shape-correct") {
  MatrixXd data(10, 2);
  for (int i = 0; i < 10; ++i) {
    data(i, 0) = i;
    data(i, 1) = -i;
  }
  const MatrixXd a = sample_rows(data, 4, 7);
  const MatrixXd b = sample_rows(data, 4, 7);
  CHECK(a.rows() == 4);
  CHECK((a - b).norm() == 0.0);
  const MatrixXd c = sample_rows(data, 4, 8);
  CHECK((a - c).norm() != 0.0);
}

TEST_CASE("data paths resolve against the dataset root") {
  namespace fs = std::filesystem;
  const auto root = fs::temp_directory_path() / "sgpreg_dataroot";
  fs::create_directories(root);
  std::ofstream(root / "probe.csv") << "1,2\n";
  setenv("SGPREG_DATA_DIR", root.string().c_str(), 1);
  CHECK(resolve_data_path("probe.csv") == (root / "probe.csv").string());
  CHECK(resolve_data_path("missing_thing.csv") == "missing_thing.csv");
  unsetenv("SGPREG_DATA_DIR");
}

TEST_CASE("reconstruction protocol produces paired baseline and regularized rows") {
  ReconstructionProtocolConfig cfg;
  cfg.n_rows = 150;
  cfg.n_noisy_rows = 25;
  cfg.noise_sd = 1.0;
  cfg.m_values = {5};
  cfg.q = 2;
  cfg.lambda_grid = {10.0};
  cfg.seed = 3;
  cfg.max_iter = 40;
  const auto rows = run_reconstruction_protocol(cfg);
  REQUIRE(rows.size() == 2);
  CHECK(!rows[0].regularized);
  CHECK(rows[1].regularized);
  CHECK(rows[1].lambda == 10.0);
  for (const auto& r : rows) {
    CHECK(std::isfinite(r.rmse_noisy_rows));
    CHECK(std::isfinite(r.rmse_clean_rows));
    CHECK(r.rmse_noisy_rows > r.rmse_clean_rows * 0.1);
  }
}
