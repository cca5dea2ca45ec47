#include "sgpreg/experiment.hpp"

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "sgpreg/rng.hpp"

namespace sgpreg {

using nlohmann::json;

namespace {

json dataset_to_json(const DatasetConfig& d) {
  json j;
  j["type"] = d.type;
  if (d.type == "synthetic-eq4") {
    j["n_train"] = d.synthetic.n_train;
    j["n_val"] = d.synthetic.n_val;
    j["n_test"] = d.synthetic.n_test;
    j["noise_sd"] = d.synthetic.noise_sd;
  } else if (d.type == "table") {
    j["path"] = d.path;
    j["standardize"] = d.standardize;
    if (!d.table_options.drop_columns.empty()) j["drop_columns"] = d.table_options.drop_columns;
    if (d.table_options.header.has_value()) j["header"] = *d.table_options.header;
  } else if (d.type == "multivariate") {
    j["n_rows"] = d.multivariate.n_rows;
    j["data_seed"] = d.multivariate.seed;
    j["standardize"] = d.standardize;
  }
  if (d.subset_rows > 0) j["subset_rows"] = d.subset_rows;
  return j;
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  std::vector<std::string> models, schedules;
  for (auto m : c.models) models.emplace_back(to_string(m));
  for (auto s : c.schedules) schedules.emplace_back(to_string(s));
  j["models"] = models;
  j["schedules"] = schedules;
  j["seeds"] = c.seeds;
  j["kernel"] = c.control.kernel_family == KernelFamily::Matern32 ? "matern32" : "seard";
  j["m"] = c.control.m;
  j["q"] = c.control.q;
  j["max_iter"] = c.control.max_iter;
  j["grad_tol"] = c.control.grad_tol;
  if (!c.lambda_grid.empty()) j["lambda_grid"] = c.lambda_grid;
  if (c.lambda_fixed.has_value()) j["lambda"] = *c.lambda_fixed;
  j["dataset"] = dataset_to_json(c.dataset);
  j["version"] = kVersion;
  return j;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void put_metric(json& j, const char* key, double v) {
  if (std::isfinite(v)) {
    j[key] = v;
  } else {
    j[key] = nullptr;
  }
}

json row_to_json(const ReportRow& row, const std::string& hash, bool include_wall_time) {
  json j;
  j["model"] = row.model;
  j["schedule"] = row.schedule;
  j["lambda"] = row.lambda;
  j["seed"] = row.seed;
  j["note"] = row.note;
  j["config_hash"] = hash;
  j["version"] = kVersion;
  put_metric(j, "rmse_train", row.metrics.rmse_train);
  put_metric(j, "rmse_val", row.metrics.rmse_val);
  put_metric(j, "rmse_test", row.metrics.rmse_test);
  put_metric(j, "nystrom_error", row.metrics.nystrom);
  put_metric(j, "askl", row.metrics.askl_value);
  put_metric(j, "objective_recon", row.metrics.breakdown.recon);
  put_metric(j, "objective_divergence", row.metrics.breakdown.divergence);
  put_metric(j, "objective_total", row.metrics.breakdown.total);
  j["iterations"] = row.metrics.iterations;
  if (include_wall_time) j["wall_time_s"] = row.metrics.wall_time_s;
  j["warnings"] = row.metrics.warnings;
  if (!row.error.empty()) j["error"] = row.error;
  return j;
}

struct Accum {
  std::vector<double> values;
  void add(double v) {
    if (std::isfinite(v)) values.push_back(v);
  }
  bool pair_into(std::pair<double, double>& out) const {
    if (values.empty()) return false;
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double sd =
        values.size() > 1 ? std::sqrt(ss / static_cast<double>(values.size() - 1)) : 0.0;
    out = {mean, sd};
    return true;
  }
};

}  // namespace

void ExperimentConfig::validate() const {
  require(!models.empty(), "experiment config: empty model list");
  require(!schedules.empty(), "experiment config: empty schedule list");
  require(!seeds.empty(), "experiment config: empty seed list");
  require(dataset.type == "synthetic-eq4" || dataset.type == "table" ||
              dataset.type == "multivariate",
          "experiment config: unknown dataset type '" + dataset.type + "'");
  for (ModelKind m : models) {
    if (is_latent_kind(m)) {
      require(dataset.type != "synthetic-eq4",
              "experiment config: latent models need a table or multivariate dataset");
    } else {
      require(dataset.type != "multivariate",
              "experiment config: regression models need a synthetic-eq4 or table dataset");
    }
  }
  for (double v : lambda_grid) {
    require(v >= 0.0 && std::isfinite(v), "experiment config: bad lambda grid value");
  }
}

std::string config_hash(const ExperimentConfig& config) {
  return hex64(fnv1a64(config_to_json(config).dump()));
}

std::string report_row_json(const ReportRow& row, const std::string& hash,
                            bool include_wall_time) {
  return row_to_json(row, hash, include_wall_time).dump();
}

std::string aggregate_row_json(const AggregateRow& row, const std::string& hash) {
  json j;
  j["model"] = row.model;
  j["schedule"] = row.schedule;
  j["count"] = row.count;
  j["config_hash"] = hash;
  for (const auto& [name, ms] : row.stats) {
    j[name + "_mean"] = ms.first;
    j[name + "_sd"] = ms.second;
  }
  return j.dump();
}

std::vector<AggregateRow> aggregate_rows(const std::vector<ReportRow>& rows) {
  std::vector<std::pair<std::string, std::string>> order;
  std::map<std::pair<std::string, std::string>, std::map<std::string, Accum>> groups;
  std::map<std::pair<std::string, std::string>, int> counts;
  for (const auto& row : rows) {
    if (!row.error.empty()) continue;
    if (row.note == "grid") continue;   // only final rows enter the aggregates
    const auto key = std::make_pair(row.model, row.schedule);
    if (!groups.count(key)) order.push_back(key);
    auto& g = groups[key];
    g["rmse_train"].add(row.metrics.rmse_train);
    g["rmse_val"].add(row.metrics.rmse_val);
    g["rmse_test"].add(row.metrics.rmse_test);
    g["nystrom_error"].add(row.metrics.nystrom);
    g["askl"].add(row.metrics.askl_value);
    g["lambda"].add(row.lambda);
    ++counts[key];
  }
  std::vector<AggregateRow> out;
  for (const auto& key : order) {
    AggregateRow a;
    a.model = key.first;
    a.schedule = key.second;
    a.count = counts[key];
    for (const auto& [name, acc] : groups[key]) {
      std::pair<double, double> ms;
      if (acc.pair_into(ms)) a.stats[name] = ms;
    }
    out.push_back(std::move(a));
  }
  return out;
}

std::string format_aggregate_table(const std::vector<AggregateRow>& aggregates,
                                   const std::string& metric) {
  std::ostringstream os;
  os << "model\tschedule\tn\t" << metric << " mean(sd)\n";
  for (const auto& a : aggregates) {
    os << a.model << '\t' << a.schedule << '\t' << a.count << '\t';
    const auto it = a.stats.find(metric);
    if (it == a.stats.end()) {
      os << "-\n";
      continue;
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f(%.4f)", it->second.first, it->second.second);
    os << buf << '\n';
  }
  return os.str();
}

std::string resolve_data_path(const std::string& path) {
  namespace fs = std::filesystem;
  if (path.empty() || fs::exists(path)) return path;
  if (!fs::path(path).is_absolute()) {
    if (const char* root = std::getenv("SGPREG_DATA_DIR")) {
      const fs::path joined = fs::path(root) / path;
      if (fs::exists(joined)) return joined.string();
    }
  }
  return path;
}

MatrixXd sample_rows(const MatrixXd& data, int count, std::uint64_t seed) {
  require(count >= 1 && count <= data.rows(), "sample_rows: bad count");
  Rng rng = derive_rng(seed, "subset");
  const auto idx = rng.sample_without_replacement(static_cast<int>(data.rows()), count);
  MatrixXd out(count, data.cols());
  for (int i = 0; i < count; ++i) out.row(i) = data.row(idx[i]);
  return out;
}

namespace {

struct SharedData {
  bool loaded = false;
  MatrixXd table;                        // lvm source or regression table
  std::vector<std::string> names;
};

RegressionData regression_data_for(const ExperimentConfig& cfg, const SharedData& shared,
                                   std::uint64_t seed) {
  if (cfg.dataset.type == "synthetic-eq4") {
    SyntheticSpec spec = cfg.dataset.synthetic;
    spec.seed = seed;
    return generate_synthetic(spec);
  }
  // Table: last column is the response.
  const MatrixXd& t = shared.table;
  require(t.cols() >= 2, "experiment: regression table needs >= 2 columns");
  RegressionData d;
  const int dim = static_cast<int>(t.cols()) - 1;
  d.x = t.leftCols(dim);
  d.y = t.col(dim);
  d.domain_lo = d.x.minCoeff();
  d.domain_hi = d.x.maxCoeff();
  return d;
}

MatrixXd lvm_data_for(const ExperimentConfig& cfg, const SharedData& shared,
                      std::uint64_t seed) {
  MatrixXd y = shared.table;
  if (cfg.dataset.subset_rows > 0 && cfg.dataset.subset_rows < y.rows()) {
    y = sample_rows(y, cfg.dataset.subset_rows, seed);
  }
  return y;
}

void run_single_task(const ExperimentConfig& cfg, const SharedData& shared, ModelKind model,
                     Schedule schedule, std::uint64_t seed, std::vector<ReportRow>& out) {
  TrainControl control = cfg.control;
  control.seed = seed;
  const bool latent = is_latent_kind(model);
  const bool regularized = schedule == Schedule::S3 || schedule == Schedule::S4;

  const auto base_row = [&](double lambda, const char* note) {
    ReportRow row;
    row.model = to_string(model);
    row.schedule = to_string(schedule);
    row.lambda = lambda;
    row.seed = seed;
    row.note = note;
    return row;
  };

  try {
    if (!regularized || cfg.lambda_fixed.has_value()) {
      const double lambda = regularized ? *cfg.lambda_fixed : 0.0;
      const ScheduleConfig sc{schedule, lambda};
      TrainResult res;
      if (latent) {
        res = run_schedule_lvm(model, lvm_data_for(cfg, shared, seed), sc, control);
      } else {
        res = run_schedule(model, regression_data_for(cfg, shared, seed), sc, control);
      }
      ReportRow row = base_row(lambda, "run");
      row.metrics = res.metrics;
      out.push_back(std::move(row));
      return;
    }

    // Regularized schedule with weight selection.
    std::vector<double> grid = cfg.lambda_grid;
    if (grid.empty()) grid = latent ? lvm_lambda_grid() : log_lambda_grid();
    LambdaSelection sel;
    if (latent) {
      sel = select_lambda_lvm(model, lvm_data_for(cfg, shared, seed), schedule, grid, control);
    } else {
      sel = select_lambda(model, regression_data_for(cfg, shared, seed), schedule, grid,
                          control);
    }
    for (const auto& r : sel.per_lambda) {
      ReportRow row = base_row(r.lambda, "grid");
      row.metrics = r.metrics;
      out.push_back(std::move(row));
    }
    for (const auto& f : sel.failures) {
      ReportRow row = base_row(0.0, "grid");
      row.error = f;
      out.push_back(std::move(row));
    }
    ReportRow row = base_row(sel.best_lambda, "selected");
    row.metrics = sel.best.metrics;
    out.push_back(std::move(row));
  } catch (const std::exception& e) {
    ReportRow row = base_row(0.0, "run");
    row.error = e.what();
    out.push_back(std::move(row));
  }
}

}  // namespace

ExperimentReportSet run_experiment(const ExperimentConfig& config) {
  config.validate();
  SharedData shared;
  if (config.dataset.type == "table") {
    Table t = load_table(resolve_data_path(config.dataset.path), config.dataset.table_options);
    shared.table = std::move(t.values);
    shared.names = std::move(t.column_names);
    if (config.dataset.standardize) standardize_in_place(shared.table, shared.names);
    shared.loaded = true;
  } else if (config.dataset.type == "multivariate") {
    shared.table = generate_multivariate(config.dataset.multivariate);
    if (config.dataset.standardize) standardize_in_place(shared.table);
    shared.loaded = true;
  }

  struct Task {
    ModelKind model;
    Schedule schedule;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  for (ModelKind m : config.models) {
    for (Schedule s : config.schedules) {
      // The exact model has no inducing inputs; one schedule covers it.
      if (m == ModelKind::Gpr && s != config.schedules.front()) continue;
      for (std::uint64_t seed : config.seeds) tasks.push_back({m, s, seed});
    }
  }

  std::vector<std::vector<ReportRow>> results(tasks.size());
  const int hw = static_cast<int>(std::thread::hardware_concurrency());
  const int workers =
      std::max(1, std::min<int>(config.workers > 0 ? config.workers : hw,
                                static_cast<int>(tasks.size())));
  std::atomic<size_t> next{0};
  const auto worker = [&]() {
    while (true) {
      const size_t i = next.fetch_add(1);
      if (i >= tasks.size()) break;
      run_single_task(config, shared, tasks[i].model, tasks[i].schedule, tasks[i].seed,
                      results[i]);
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  ExperimentReportSet set;
  set.config_hash = config_hash(config);
  for (auto& chunk : results) {
    for (auto& row : chunk) {
      set.any_failed = set.any_failed || !row.error.empty();
      set.rows.push_back(std::move(row));
    }
  }
  set.aggregates = aggregate_rows(set.rows);

  if (!config.out_dir.empty()) {
    namespace fs = std::filesystem;
    fs::create_directories(config.out_dir);
    {
      std::ofstream runs(fs::path(config.out_dir) / "runs.jsonl");
      for (const auto& row : set.rows) {
        runs << report_row_json(row, set.config_hash) << '\n';
      }
    }
    {
      std::ofstream agg(fs::path(config.out_dir) / "aggregates.jsonl");
      for (const auto& a : set.aggregates) {
        agg << aggregate_row_json(a, set.config_hash) << '\n';
      }
    }
    {
      std::ofstream tsv(fs::path(config.out_dir) / "runs.tsv");
      tsv << "model\tschedule\tlambda\tseed\tnote\trmse_train\trmse_val\trmse_test\t"
             "nystrom_error\taskl\tdivergence\tobjective_total\titerations\twall_time_s\t"
             "warnings\terror\n";
      for (const auto& r : set.rows) {
        tsv << r.model << '\t' << r.schedule << '\t' << r.lambda << '\t' << r.seed << '\t'
            << r.note << '\t' << r.metrics.rmse_train << '\t' << r.metrics.rmse_val << '\t'
            << r.metrics.rmse_test << '\t' << r.metrics.nystrom << '\t'
            << r.metrics.askl_value << '\t' << r.metrics.breakdown.divergence << '\t'
            << r.metrics.breakdown.total << '\t' << r.metrics.iterations << '\t'
            << r.metrics.wall_time_s << '\t';
        for (size_t i = 0; i < r.metrics.warnings.size(); ++i) {
          tsv << (i ? ";" : "") << r.metrics.warnings[i];
        }
        tsv << '\t' << r.error << '\n';
      }
    }
    {
      std::ofstream cfg(fs::path(config.out_dir) / "config.json");
      json j = config_to_json(config);
      j["config_hash"] = set.config_hash;
      cfg << j.dump(2) << '\n';
    }
  }
  return set;
}

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("experiment config: invalid JSON: ") + e.what());
  }
  ExperimentConfig c;
  for (const auto& name : j.value("models", std::vector<std::string>{})) {
    const auto m = model_kind_from_string(name);
    require(m.has_value(), "experiment config: unknown model '" + name + "'");
    c.models.push_back(*m);
  }
  for (const auto& name : j.value("schedules", std::vector<std::string>{})) {
    const auto s = schedule_from_string(name);
    require(s.has_value(), "experiment config: unknown schedule '" + name + "'");
    c.schedules.push_back(*s);
  }
  if (j.contains("seeds")) {
    c.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
  } else if (j.contains("seed_range")) {
    const auto r = j["seed_range"].get<std::vector<std::uint64_t>>();
    require(r.size() == 2 && r[0] <= r[1], "experiment config: bad seed_range");
    for (std::uint64_t s = r[0]; s <= r[1]; ++s) c.seeds.push_back(s);
  }
  const std::string kernel = j.value("kernel", "matern32");
  require(kernel == "matern32" || kernel == "seard",
          "experiment config: unknown kernel '" + kernel + "'");
  c.control.kernel_family =
      kernel == "matern32" ? KernelFamily::Matern32 : KernelFamily::SqExpArd;
  c.control.m = j.value("m", 10);
  c.control.q = j.value("q", 2);
  c.control.max_iter = j.value("max_iter", 1000);
  c.control.grad_tol = j.value("grad_tol", 1e-5);
  if (j.contains("lambda_grid")) c.lambda_grid = j["lambda_grid"].get<std::vector<double>>();
  if (j.contains("lambda")) c.lambda_fixed = j["lambda"].get<double>();
  c.out_dir = j.value("out", std::string());
  c.workers = j.value("workers", 0);

  require(j.contains("dataset"), "experiment config: missing dataset");
  const json& d = j["dataset"];
  c.dataset.type = d.value("type", std::string());
  c.dataset.synthetic.n_train = d.value("n_train", 100);
  c.dataset.synthetic.n_val = d.value("n_val", 100);
  c.dataset.synthetic.n_test = d.value("n_test", 100);
  c.dataset.synthetic.noise_sd = d.value("noise_sd", 0.1);
  c.dataset.path = d.value("path", std::string());
  c.dataset.standardize = d.value("standardize", false);
  if (d.contains("drop_columns")) {
    c.dataset.table_options.drop_columns = d["drop_columns"].get<std::vector<std::string>>();
  }
  if (d.contains("header")) c.dataset.table_options.header = d["header"].get<bool>();
  c.dataset.multivariate.n_rows = d.value("n_rows", 80000);
  c.dataset.multivariate.seed = d.value("data_seed", 0);
  c.dataset.subset_rows = d.value("subset_rows", 0);

  c.validate();
  return c;
}

std::vector<ReconstructionRow> run_reconstruction_protocol(
    const ReconstructionProtocolConfig& config) {
  require(!config.m_values.empty(), "reconstruction protocol: empty m list");
  require(!config.lambda_grid.empty(), "reconstruction protocol: empty lambda grid");

  MatrixXd clean;
  if (config.data_path.empty()) {
    MultivariateSpec spec;
    spec.n_rows = config.n_rows;
    spec.seed = derive_seed(config.seed, "mv-data");
    clean = generate_multivariate(spec);
  } else {
    clean = load_table(resolve_data_path(config.data_path)).values;
  }
  standardize_in_place(clean);

  MatrixXd noisy = clean;
  NoiseInjectionSpec inject;
  inject.n_noisy_rows = config.n_noisy_rows;
  inject.noise_sd = config.noise_sd;
  inject.seed = derive_seed(config.seed, "inject");
  const NoiseMask mask = inject_noise(noisy, inject);

  std::vector<int> noisy_rows;
  std::vector<char> is_noisy(clean.rows(), 0);
  for (const auto& [r, f] : mask.entries) {
    noisy_rows.push_back(r);
    is_noisy[r] = 1;
  }
  std::vector<int> clean_rows;
  for (int i = 0; i < clean.rows(); ++i) {
    if (!is_noisy[i]) clean_rows.push_back(i);
  }

  std::vector<ReconstructionRow> out;
  for (int m : config.m_values) {
    TrainControl control;
    control.kernel_family = KernelFamily::SqExpArd;
    control.m = m;
    control.q = config.q;
    control.max_iter = config.max_iter;
    control.seed = config.seed;

    const auto evaluate = [&](const TrainResult& res, bool regularized, double lambda) {
      ReconstructionRow row;
      row.m = m;
      row.regularized = regularized;
      row.lambda = lambda;
      row.metrics = res.metrics;
      const MatrixXd recon = lvm_reconstruct(*res.lvm, LvmKind::Lsvgp, noisy);
      row.rmse_noisy_rows = rmse_rows(recon, clean, noisy_rows);
      row.rmse_clean_rows = rmse_rows(recon, clean, clean_rows);
      return row;
    };

    const TrainResult baseline =
        run_schedule_lvm(ModelKind::Lsvgp, noisy, {Schedule::S2, 0.0}, control);
    out.push_back(evaluate(baseline, false, 0.0));

    if (config.lambda_grid.size() == 1) {
      const double lambda = config.lambda_grid.front();
      const TrainResult reg =
          run_schedule_lvm(ModelKind::Lsvgp, noisy, {Schedule::S3, lambda}, control);
      out.push_back(evaluate(reg, true, lambda));
    } else {
      const LambdaSelection sel = select_lambda_lvm(ModelKind::Lsvgp, noisy, Schedule::S3,
                                                    config.lambda_grid, control);
      out.push_back(evaluate(sel.best, true, sel.best_lambda));
    }
  }
  return out;
}

}  // namespace sgpreg
