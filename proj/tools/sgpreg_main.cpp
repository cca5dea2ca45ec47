// Command-line front end: dataset synthesis, single fits, sweep batches,
// latent-variable runs, and report aggregation.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "sgpreg/experiment.hpp"
#include "sgpreg/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sgpreg;

namespace {

std::vector<double> parse_lambda_grid(const std::string& spec) {
  if (spec.rfind("log:", 0) == 0) {
    double lo, hi;
    int count;
    if (std::sscanf(spec.c_str(), "log:%lf:%lf:%d", &lo, &hi, &count) != 3) {
      throw CLI::ValidationError("--lambda-grid", "expected log:<lo>:<hi>:<count>");
    }
    return log_lambda_grid(lo, hi, count);
  }
  std::vector<double> grid;
  std::stringstream ss(spec);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) grid.push_back(std::stod(tok));
  }
  if (grid.empty()) throw CLI::ValidationError("--lambda-grid", "empty grid");
  return grid;
}

std::vector<std::uint64_t> parse_seeds(const std::string& spec) {
  const auto dots = spec.find("..");
  std::vector<std::uint64_t> seeds;
  if (dots != std::string::npos) {
    const std::uint64_t a = std::stoull(spec.substr(0, dots));
    const std::uint64_t b = std::stoull(spec.substr(dots + 2));
    if (b < a) throw CLI::ValidationError("--seeds", "descending range");
    for (std::uint64_t s = a; s <= b; ++s) seeds.push_back(s);
    return seeds;
  }
  std::stringstream ss(spec);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) seeds.push_back(std::stoull(tok));
  }
  if (seeds.empty()) throw CLI::ValidationError("--seeds", "empty seed list");
  return seeds;
}

ModelKind require_model(const std::string& name) {
  const auto m = model_kind_from_string(name);
  if (!m) throw CLI::ValidationError("--model", "unknown model '" + name + "'");
  return *m;
}

Schedule require_schedule(const std::string& name) {
  const auto s = schedule_from_string(name);
  if (!s) throw CLI::ValidationError("--schedule", "unknown schedule '" + name + "'");
  return *s;
}

KernelFamily require_kernel(const std::string& name) {
  if (name == "matern32") return KernelFamily::Matern32;
  if (name == "seard") return KernelFamily::SqExpArd;
  throw CLI::ValidationError("--kernel", "unknown kernel '" + name + "'");
}

void write_matrix_tsv(const fs::path& path, const MatrixXd& m,
                      const std::vector<std::string>& header = {}) {
  std::ofstream out(path);
  if (!header.empty()) {
    for (size_t j = 0; j < header.size(); ++j) out << (j ? "\t" : "") << header[j];
    out << '\n';
  }
  out.precision(17);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? "\t" : "") << m(i, j);
    out << '\n';
  }
}

int cmd_synth(std::uint64_t seed, int n_train, int n_val, int n_test, double noise_sd,
              const std::string& out_dir) {
  SyntheticSpec spec;
  spec.seed = seed;
  spec.n_train = n_train;
  spec.n_val = n_val;
  spec.n_test = n_test;
  spec.noise_sd = noise_sd;
  const RegressionData d = generate_synthetic(spec);
  fs::create_directories(out_dir);
  MatrixXd train(d.x.rows(), 2), val(d.x_val.rows(), 2), test(d.x_test.rows(), 2);
  train << d.x, d.y;
  val << d.x_val, d.y_val;
  test << d.x_test, d.f_test;
  write_matrix_tsv(fs::path(out_dir) / "train.tsv", train, {"x", "y"});
  write_matrix_tsv(fs::path(out_dir) / "val.tsv", val, {"x", "y"});
  write_matrix_tsv(fs::path(out_dir) / "test.tsv", test, {"x", "f"});
  json meta;
  meta["seed"] = seed;
  meta["n_train"] = n_train;
  meta["n_val"] = n_val;
  meta["n_test"] = n_test;
  meta["noise_sd"] = noise_sd;
  meta["domain"] = {0.0, 1.0};
  std::ofstream(fs::path(out_dir) / "meta.json") << meta.dump(2) << '\n';
  std::cout << "wrote " << out_dir << "/{train,val,test}.tsv\n";
  return 0;
}

RegressionData regression_data_from_table(const std::string& path,
                                          const TableOptions& options) {
  const Table t = load_table(resolve_data_path(path), options);
  require(t.values.cols() >= 2, "fit: regression table needs >= 2 columns (inputs..., y)");
  RegressionData d;
  const int dim = static_cast<int>(t.values.cols()) - 1;
  d.x = t.values.leftCols(dim);
  d.y = t.values.col(dim);
  d.domain_lo = d.x.minCoeff();
  d.domain_hi = d.x.maxCoeff();
  return d;
}

void emit_posterior_curve(const std::string& path, const TrainResult& res,
                          const RegressionData& data) {
  require(data.x.cols() == 1, "--emit-posterior: defined for 1-D inputs");
  const int grid_n = 201;
  MatrixXd xs = VectorXd::LinSpaced(grid_n, data.domain_lo, data.domain_hi);
  VectorXd mean(grid_n), sd(grid_n);
  if (res.gpr) {
    const auto p = predict_full(*res.gpr, xs);
    mean = p.mean;
    sd = p.var.cwiseSqrt();
  } else if (res.sgp) {
    const auto p = predict_sgp(*res.sgp, data.x, data.y, xs);
    mean = p.mean;
    sd = p.var.cwiseSqrt();
  } else {
    throw std::invalid_argument("--emit-posterior: no regression state available");
  }
  MatrixXd curve(grid_n, 5);
  curve.col(0) = xs;
  curve.col(1) = mean;
  curve.col(2) = sd;
  curve.col(3) = mean - 2.0 * sd;
  curve.col(4) = mean + 2.0 * sd;
  write_matrix_tsv(path, curve, {"x", "mean", "sd", "lo2sd", "hi2sd"});
}

void print_row(const ReportRow& row, const std::string& hash) {
  std::cout << report_row_json(row, hash) << '\n';
}

ReportRow row_from_result(const TrainResult& res, std::uint64_t seed, const char* note) {
  ReportRow row;
  row.model = to_string(res.kind);
  row.schedule = to_string(res.schedule);
  row.lambda = res.lambda;
  row.seed = seed;
  row.note = note;
  row.metrics = res.metrics;
  return row;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"regularized sparse GP regression and latent-variable experiments"};
  app.require_subcommand(1);

  // --- synth ---
  auto* synth = app.add_subcommand("synth", "emit a synthetic 1-D dataset");
  std::uint64_t synth_seed = 0;
  int synth_train = 100, synth_val = 100, synth_test = 100;
  double synth_noise = 0.1;
  std::string synth_out = "synth-out";
  synth->add_option("--seed", synth_seed);
  synth->add_option("--n-train", synth_train);
  synth->add_option("--n-val", synth_val);
  synth->add_option("--n-test", synth_test);
  synth->add_option("--noise-sd", synth_noise);
  synth->add_option("--out", synth_out);

  // --- fit ---
  auto* fit = app.add_subcommand("fit", "train one model on one dataset");
  std::string fit_model = "sgpr", fit_schedule = "s2", fit_kernel = "matern32";
  std::string fit_data, fit_out, fit_posterior, fit_lambda_grid;
  double fit_lambda = 0.0;
  int fit_m = 10, fit_q = 2, fit_max_iter = 1000, fit_subset = 0;
  std::uint64_t fit_seed = 0;
  bool fit_standardize = false;
  std::vector<std::string> fit_drop;
  fit->add_option("--model", fit_model);
  fit->add_option("--schedule", fit_schedule);
  fit->add_option("--lambda", fit_lambda);
  fit->add_option("--lambda-grid", fit_lambda_grid);
  fit->add_option("--m", fit_m);
  fit->add_option("--q", fit_q);
  fit->add_option("--seed", fit_seed);
  fit->add_option("--data", fit_data);
  fit->add_option("--kernel", fit_kernel);
  fit->add_option("--max-iter", fit_max_iter);
  fit->add_option("--out", fit_out);
  fit->add_option("--emit-posterior", fit_posterior);
  fit->add_option("--subset-rows", fit_subset);
  fit->add_option("--drop-columns", fit_drop)->delimiter(',');
  fit->add_flag("--standardize", fit_standardize);

  // --- sweep ---
  auto* sweep = app.add_subcommand("sweep", "run a batch of seeded experiments");
  std::string sweep_config, sweep_models = "dtc,fitc,sgpr,svgp", sweep_schedules = "s1,s2,s3,s4";
  std::string sweep_seeds = "1..10", sweep_kernel = "matern32", sweep_out = "sweep-out";
  std::string sweep_lambda_grid, sweep_data;
  int sweep_m = 10, sweep_max_iter = 1000, sweep_workers = 0;
  double sweep_lambda = -1.0;
  sweep->add_option("--config", sweep_config);
  sweep->add_option("--models", sweep_models);
  sweep->add_option("--schedules", sweep_schedules);
  sweep->add_option("--seeds", sweep_seeds);
  sweep->add_option("--m", sweep_m);
  sweep->add_option("--kernel", sweep_kernel);
  sweep->add_option("--lambda-grid", sweep_lambda_grid);
  sweep->add_option("--lambda", sweep_lambda);
  sweep->add_option("--data", sweep_data);
  sweep->add_option("--out", sweep_out);
  sweep->add_option("--workers", sweep_workers);
  sweep->add_option("--max-iter", sweep_max_iter);

  // --- lvm ---
  auto* lvm = app.add_subcommand("lvm", "latent-variable model runs");
  std::string lvm_model = "lsvgp", lvm_schedule = "s3", lvm_data, lvm_out = "lvm-out";
  std::string lvm_lambda_grid_s, lvm_protocol, lvm_m_list = "10,20,50", lvm_seeds;
  double lvm_lambda = -1.0, lvm_noise_sd = 1.0;
  int lvm_m = 20, lvm_q = 5, lvm_max_iter = 1000, lvm_subset = 0, lvm_workers = 0;
  int lvm_rows = 80000, lvm_noisy_rows = 10000;
  std::uint64_t lvm_seed = 0;
  bool lvm_standardize = false;
  std::vector<std::string> lvm_drop;
  lvm->add_option("--model", lvm_model);
  lvm->add_option("--schedule", lvm_schedule);
  lvm->add_option("--lambda", lvm_lambda);
  lvm->add_option("--lambda-grid", lvm_lambda_grid_s);
  lvm->add_option("--m", lvm_m);
  lvm->add_option("--q", lvm_q);
  lvm->add_option("--seed", lvm_seed);
  lvm->add_option("--seeds", lvm_seeds);
  lvm->add_option("--data", lvm_data);
  lvm->add_option("--subset-rows", lvm_subset);
  lvm->add_option("--drop-columns", lvm_drop)->delimiter(',');
  lvm->add_flag("--standardize", lvm_standardize);
  lvm->add_option("--out", lvm_out);
  lvm->add_option("--max-iter", lvm_max_iter);
  lvm->add_option("--workers", lvm_workers);
  lvm->add_option("--protocol", lvm_protocol, "reconstruct: standardize/inject/refit protocol");
  lvm->add_option("--rows", lvm_rows);
  lvm->add_option("--noisy-rows", lvm_noisy_rows);
  lvm->add_option("--noise-sd", lvm_noise_sd);
  lvm->add_option("--m-list", lvm_m_list);

  // --- report ---
  auto* report = app.add_subcommand("report", "aggregate run records");
  std::string report_in, report_metric = "rmse_test", report_out;
  report->add_option("--in", report_in)->required();
  report->add_option("--metric", report_metric);
  report->add_option("--out", report_out);

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      return cmd_synth(synth_seed, synth_train, synth_val, synth_test, synth_noise, synth_out);
    }

    if (fit->parsed()) {
      const ModelKind model = require_model(fit_model);
      const Schedule schedule = require_schedule(fit_schedule);
      TrainControl control;
      control.kernel_family = require_kernel(fit_kernel);
      control.m = fit_m;
      control.q = fit_q;
      control.max_iter = fit_max_iter;
      control.seed = fit_seed;

      TableOptions topt;
      topt.drop_columns = fit_drop;

      TrainResult res;
      RegressionData data;
      if (is_latent_kind(model)) {
        require(!fit_data.empty(), "fit: latent models need --data");
        Table t = load_table(resolve_data_path(fit_data), topt);
        if (fit_standardize) standardize_in_place(t.values, t.column_names);
        MatrixXd y = t.values;
        if (fit_subset > 0 && fit_subset < y.rows()) y = sample_rows(y, fit_subset, fit_seed);
        if (!fit_lambda_grid.empty()) {
          const auto sel = select_lambda_lvm(model, y, schedule,
                                             parse_lambda_grid(fit_lambda_grid), control);
          res = sel.best;
        } else {
          res = run_schedule_lvm(model, y, {schedule, fit_lambda}, control);
        }
      } else {
        data = fit_data.empty() ? generate_synthetic({100, 100, 100, 0.1, fit_seed})
                                : regression_data_from_table(fit_data, topt);
        if (!fit_lambda_grid.empty()) {
          const auto sel =
              select_lambda(model, data, schedule, parse_lambda_grid(fit_lambda_grid), control);
          res = sel.best;
        } else {
          res = run_schedule(model, data, {schedule, fit_lambda}, control);
        }
      }
      const ReportRow row = row_from_result(res, fit_seed, "run");
      print_row(row, "-");
      if (!fit_out.empty()) {
        fs::create_directories(fit_out);
        std::ofstream(fs::path(fit_out) / "runs.jsonl") << report_row_json(row, "-") << '\n';
      }
      if (!fit_posterior.empty()) emit_posterior_curve(fit_posterior, res, data);
      return res.metrics.warnings.empty() ? 0 : 0;
    }

    if (sweep->parsed()) {
      ExperimentConfig cfg;
      if (!sweep_config.empty()) {
        std::ifstream in(resolve_data_path(sweep_config));
        require(bool(in), "sweep: cannot open config '" + sweep_config + "'");
        std::stringstream ss;
        ss << in.rdbuf();
        cfg = parse_experiment_config(ss.str());
        if (cfg.out_dir.empty()) cfg.out_dir = sweep_out;
      } else {
        std::stringstream ms(sweep_models), ts(sweep_schedules);
        std::string tok;
        while (std::getline(ms, tok, ',')) cfg.models.push_back(require_model(tok));
        while (std::getline(ts, tok, ',')) cfg.schedules.push_back(require_schedule(tok));
        cfg.seeds = parse_seeds(sweep_seeds);
        cfg.control.kernel_family = require_kernel(sweep_kernel);
        cfg.control.m = sweep_m;
        cfg.control.max_iter = sweep_max_iter;
        if (!sweep_lambda_grid.empty()) cfg.lambda_grid = parse_lambda_grid(sweep_lambda_grid);
        if (sweep_lambda >= 0.0) cfg.lambda_fixed = sweep_lambda;
        if (sweep_data.empty()) {
          cfg.dataset.type = "synthetic-eq4";
        } else {
          cfg.dataset.type = "table";
          cfg.dataset.path = sweep_data;
        }
        cfg.out_dir = sweep_out;
        cfg.workers = sweep_workers;
      }
      const auto set = run_experiment(cfg);
      std::cout << format_aggregate_table(set.aggregates, "rmse_test");
      std::cout << "rows: " << set.rows.size() << ", written to " << cfg.out_dir << '\n';
      return set.any_failed ? 1 : 0;
    }

    if (lvm->parsed()) {
      if (lvm_protocol == "reconstruct") {
        ReconstructionProtocolConfig cfg;
        cfg.n_rows = lvm_rows;
        cfg.n_noisy_rows = lvm_noisy_rows;
        cfg.noise_sd = lvm_noise_sd;
        cfg.q = lvm_q;
        cfg.seed = lvm_seed;
        cfg.max_iter = lvm_max_iter;
        cfg.data_path = lvm_data;
        cfg.m_values.clear();
        std::stringstream ss(lvm_m_list);
        std::string tok;
        while (std::getline(ss, tok, ',')) cfg.m_values.push_back(std::stoi(tok));
        if (!lvm_lambda_grid_s.empty()) {
          cfg.lambda_grid = parse_lambda_grid(lvm_lambda_grid_s);
        } else if (lvm_lambda >= 0.0) {
          cfg.lambda_grid = {lvm_lambda};
        }
        const auto rows = run_reconstruction_protocol(cfg);
        fs::create_directories(lvm_out);
        std::ofstream out(fs::path(lvm_out) / "reconstruction.jsonl");
        for (const auto& r : rows) {
          json j;
          j["m"] = r.m;
          j["model"] = r.regularized ? "rlsvgp" : "lsvgp";
          j["lambda"] = r.lambda;
          j["rmse_noisy_rows"] = r.rmse_noisy_rows;
          j["rmse_clean_rows"] = r.rmse_clean_rows;
          j["rmse_train"] = r.metrics.rmse_train;
          j["iterations"] = r.metrics.iterations;
          out << j.dump() << '\n';
          std::cout << j.dump() << '\n';
        }
        return 0;
      }

      ExperimentConfig cfg;
      cfg.models.push_back(require_model(lvm_model));
      cfg.schedules.push_back(require_schedule(lvm_schedule));
      cfg.seeds = lvm_seeds.empty() ? std::vector<std::uint64_t>{lvm_seed}
                                    : parse_seeds(lvm_seeds);
      cfg.control.kernel_family = KernelFamily::SqExpArd;
      cfg.control.m = lvm_m;
      cfg.control.q = lvm_q;
      cfg.control.max_iter = lvm_max_iter;
      if (!lvm_lambda_grid_s.empty()) cfg.lambda_grid = parse_lambda_grid(lvm_lambda_grid_s);
      if (lvm_lambda >= 0.0) cfg.lambda_fixed = lvm_lambda;
      if (!lvm_data.empty()) {
        cfg.dataset.type = "table";
        cfg.dataset.path = lvm_data;
        cfg.dataset.table_options.drop_columns = lvm_drop;
      } else {
        cfg.dataset.type = "multivariate";
        cfg.dataset.multivariate.n_rows = lvm_rows;
        cfg.dataset.multivariate.seed = derive_seed(lvm_seed, "mv-data");
      }
      cfg.dataset.standardize = lvm_standardize;
      cfg.dataset.subset_rows = lvm_subset;
      cfg.out_dir = lvm_out;
      cfg.workers = lvm_workers;
      const auto set = run_experiment(cfg);
      std::cout << format_aggregate_table(set.aggregates, "rmse_train");
      std::cout << format_aggregate_table(set.aggregates, "askl");
      std::cout << "rows: " << set.rows.size() << ", written to " << cfg.out_dir << '\n';
      return set.any_failed ? 1 : 0;
    }

    if (report->parsed()) {
      std::ifstream in(resolve_data_path(report_in));
      require(bool(in), "report: cannot open '" + report_in + "'");
      std::vector<ReportRow> rows;
      std::string line;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        const json j = json::parse(line);
        ReportRow row;
        row.model = j.value("model", std::string());
        row.schedule = j.value("schedule", std::string());
        row.lambda = j.value("lambda", 0.0);
        row.seed = j.value("seed", std::uint64_t{0});
        row.note = j.value("note", std::string("run"));
        const auto get = [&](const char* key) {
          return j.contains(key) && j[key].is_number()
                     ? j[key].get<double>()
                     : std::numeric_limits<double>::quiet_NaN();
        };
        row.metrics.rmse_train = get("rmse_train");
        row.metrics.rmse_val = get("rmse_val");
        row.metrics.rmse_test = get("rmse_test");
        row.metrics.nystrom = get("nystrom_error");
        row.metrics.askl_value = get("askl");
        row.error = j.value("error", std::string());
        rows.push_back(std::move(row));
      }
      const auto aggregates = aggregate_rows(rows);
      std::cout << format_aggregate_table(aggregates, report_metric);
      if (!report_out.empty()) {
        std::ofstream out(report_out);
        for (const auto& a : aggregates) out << aggregate_row_json(a, "-") << '\n';
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
