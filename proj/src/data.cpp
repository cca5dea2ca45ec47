#include "sgpreg/data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "sgpreg/rng.hpp"

namespace sgpreg {

void SyntheticSpec::validate() const {
  require(n_train >= 1 && n_val >= 0 && n_test >= 1, "SyntheticSpec: counts must be positive");
  require(noise_sd >= 0.0 && std::isfinite(noise_sd), "SyntheticSpec: noise_sd must be >= 0");
}

double synthetic_f(double x) { return std::sin(2.0 * x) + 0.2 * std::cos(22.0 * x); }

RegressionData generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  RegressionData d;
  d.domain_lo = 0.0;
  d.domain_hi = 1.0;

  Rng rx = derive_rng(spec.seed, "train-x");
  Rng rn = derive_rng(spec.seed, "train-noise");
  d.x = rx.uniform_vector(spec.n_train, 0.0, 1.0);
  d.y.resize(spec.n_train);
  for (int i = 0; i < spec.n_train; ++i) {
    d.y(i) = synthetic_f(d.x(i, 0)) + spec.noise_sd * rn.normal();
  }

  Rng vx = derive_rng(spec.seed, "val-x");
  Rng vn = derive_rng(spec.seed, "val-noise");
  d.x_val = vx.uniform_vector(spec.n_val, 0.0, 1.0);
  d.y_val.resize(spec.n_val);
  for (int i = 0; i < spec.n_val; ++i) {
    d.y_val(i) = synthetic_f(d.x_val(i, 0)) + spec.noise_sd * vn.normal();
  }

  d.x_test = VectorXd::LinSpaced(spec.n_test, 0.0, 1.0);
  d.f_test.resize(spec.n_test);
  for (int i = 0; i < spec.n_test; ++i) d.f_test(i) = synthetic_f(d.x_test(i, 0));
  return d;
}

namespace {

std::vector<std::string> split_fields(const std::string& line, char delim) {
  std::vector<std::string> out;
  if (delim == ' ') {
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
  }
  std::string field;
  for (char c : line) {
    if (c == delim) {
      out.push_back(field);
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  out.push_back(field);
  return out;
}

std::string trimmed(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

bool parse_double(const std::string& field, double& out) {
  const std::string t = trimmed(field);
  if (t.empty()) return false;
  char* end = nullptr;
  out = std::strtod(t.c_str(), &end);
  return end == t.c_str() + t.size();
}

char detect_delimiter(const std::string& line) {
  if (line.find(',') != std::string::npos) return ',';
  if (line.find('\t') != std::string::npos) return '\t';
  if (line.find(';') != std::string::npos) return ';';
  return ' ';
}

}  // namespace

Table load_table(const std::string& path, const TableOptions& options) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("load_table: cannot open '" + path + "'");

  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  // Find the first non-empty line for detection.
  size_t first = 0;
  while (first < lines.size() && trimmed(lines[first]).empty()) ++first;
  if (first == lines.size()) throw std::invalid_argument("load_table: empty dataset in '" + path + "'");

  const char delim = options.delimiter ? options.delimiter : detect_delimiter(lines[first]);
  const std::vector<std::string> head_fields = split_fields(lines[first], delim);
  const int n_cols = static_cast<int>(head_fields.size());

  bool has_header;
  if (options.header.has_value()) {
    has_header = *options.header;
  } else {
    double tmp;
    has_header = false;
    for (const auto& f : head_fields) {
      if (!parse_double(f, tmp)) {
        has_header = true;
        break;
      }
    }
  }

  Table t;
  t.column_names.resize(n_cols);
  for (int j = 0; j < n_cols; ++j) {
    t.column_names[j] = has_header ? trimmed(head_fields[j]) : "c" + std::to_string(j);
  }

  std::vector<bool> keep(n_cols, true);
  for (const auto& drop : options.drop_columns) {
    const auto it = std::find(t.column_names.begin(), t.column_names.end(), drop);
    require(it != t.column_names.end(), "load_table: unknown drop column '" + drop + "'");
    keep[it - t.column_names.begin()] = false;
  }

  std::vector<std::string> kept_names;
  for (int j = 0; j < n_cols; ++j)
    if (keep[j]) kept_names.push_back(t.column_names[j]);
  const int d = static_cast<int>(kept_names.size());
  require(d >= 1, "load_table: all columns dropped");

  std::vector<VectorXd> rows;
  for (size_t li = first + (has_header ? 1 : 0); li < lines.size(); ++li) {
    if (trimmed(lines[li]).empty()) continue;
    const auto fields = split_fields(lines[li], delim);
    if (static_cast<int>(fields.size()) != n_cols) {
      throw std::invalid_argument("load_table: malformed row at line " + std::to_string(li + 1) +
                                  " (" + std::to_string(fields.size()) + " fields, expected " +
                                  std::to_string(n_cols) + ")");
    }
    VectorXd row(d);
    int jj = 0;
    for (int j = 0; j < n_cols; ++j) {
      if (!keep[j]) continue;
      double v;
      if (!parse_double(fields[j], v)) {
        throw std::invalid_argument("load_table: non-numeric value in column '" +
                                    t.column_names[j] + "' at line " + std::to_string(li + 1));
      }
      if (!std::isfinite(v)) {
        throw std::invalid_argument("load_table: non-finite value at line " +
                                    std::to_string(li + 1) + ", column '" + t.column_names[j] +
                                    "'");
      }
      row(jj++) = v;
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::invalid_argument("load_table: empty dataset in '" + path + "'");

  t.values.resize(static_cast<int>(rows.size()), d);
  for (size_t i = 0; i < rows.size(); ++i) t.values.row(static_cast<int>(i)) = rows[i];
  t.column_names = std::move(kept_names);
  return t;
}

Standardization standardize_in_place(MatrixXd& data, const std::vector<std::string>& names) {
  const int n = static_cast<int>(data.rows());
  const int d = static_cast<int>(data.cols());
  require(n >= 1 && d >= 1, "standardize: empty data");
  Standardization tr;
  tr.mean = data.colwise().mean();
  tr.sd.resize(d);
  for (int j = 0; j < d; ++j) {
    const double var = (data.col(j).array() - tr.mean(j)).square().sum() / n;
    tr.sd(j) = std::sqrt(var);
    if (!(tr.sd(j) > 0.0)) {
      const std::string name = j < static_cast<int>(names.size()) ? names[j]
                                                                  : "c" + std::to_string(j);
      throw std::invalid_argument("standardize: constant feature '" + name + "'");
    }
  }
  data.rowwise() -= tr.mean.transpose();
  data.array().rowwise() /= tr.sd.transpose().array();
  return tr;
}

MatrixXd destandardize(const MatrixXd& data, const Standardization& tr) {
  MatrixXd out = data;
  out.array().rowwise() *= tr.sd.transpose().array();
  out.rowwise() += tr.mean.transpose();
  return out;
}

NoiseMask inject_noise(MatrixXd& data, const NoiseInjectionSpec& spec) {
  const int n = static_cast<int>(data.rows());
  const int d = static_cast<int>(data.cols());
  require(spec.n_noisy_rows >= 0 && spec.n_noisy_rows <= n,
          "inject_noise: n_noisy_rows exceeds the row count");
  require(spec.noise_sd >= 0.0, "inject_noise: noise_sd must be >= 0");

  Rng row_rng = derive_rng(spec.seed, "noise-rows");
  Rng feat_rng = derive_rng(spec.seed, "noise-feature");
  Rng val_rng = derive_rng(spec.seed, "noise-values");
  const std::vector<int> rows = row_rng.sample_without_replacement(n, spec.n_noisy_rows);

  NoiseMask mask;
  mask.entries.reserve(rows.size());
  for (int r : rows) {
    const int f = static_cast<int>(feat_rng.uniform_int(d));
    data(r, f) += spec.noise_sd * val_rng.normal();
    mask.entries.emplace_back(r, f);
  }
  return mask;
}

double rmse(const MatrixXd& a, const MatrixXd& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "rmse: shape mismatch");
  require(a.size() > 0, "rmse: empty inputs");
  return std::sqrt((a - b).squaredNorm() / static_cast<double>(a.size()));
}

double rmse(const VectorXd& a, const VectorXd& b) {
  require(a.size() == b.size(), "rmse: shape mismatch");
  require(a.size() > 0, "rmse: empty inputs");
  return std::sqrt((a - b).squaredNorm() / static_cast<double>(a.size()));
}

double rmse_rows(const MatrixXd& a, const MatrixXd& b, const std::vector<int>& rows) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "rmse_rows: shape mismatch");
  require(!rows.empty(), "rmse_rows: empty row selection");
  double acc = 0.0;
  for (int r : rows) acc += (a.row(r) - b.row(r)).squaredNorm();
  return std::sqrt(acc / (static_cast<double>(rows.size()) * a.cols()));
}

MatrixXd generate_multivariate(const MultivariateSpec& spec) {
  require(spec.n_rows >= 1, "generate_multivariate: need at least one row");
  Rng rng = derive_rng(spec.seed, "latent");
  MatrixXd y(spec.n_rows, 8);
  for (int i = 0; i < spec.n_rows; ++i) {
    const double t1 = rng.normal();
    const double t2 = rng.normal();
    y(i, 0) = t1;
    y(i, 1) = t2;
    y(i, 2) = std::sin(t1);
    y(i, 3) = t1 * t2;
    y(i, 4) = std::cos(t2 + 0.5 * t1);
    y(i, 5) = t1 * t1 - t2 * t2;
    y(i, 6) = std::exp(-0.5 * (t1 * t1 + t2 * t2));
    y(i, 7) = std::sin(t1 + t2);
  }
  return y;
}

}  // namespace sgpreg
