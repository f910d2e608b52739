#include "vcshrink/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <Eigen/Cholesky>

#include "vcshrink/errors.hpp"

namespace vcshrink {

void Dataset::validate() const {
  const auto rows = static_cast<Eigen::Index>(y.size());
  if (x.rows() != rows || z.rows() != rows) {
    throw DataError("dataset shape mismatch: y has " + std::to_string(y.size()) + " rows, x has " +
                    std::to_string(x.rows()) + ", z has " + std::to_string(z.rows()));
  }
  if (!x_names.empty() && x_names.size() != p()) throw DataError("dataset x_names length mismatch");
  if (!z_names.empty() && z_names.size() != r()) throw DataError("dataset z_names length mismatch");
  if (beta_true && (beta_true->rows() != rows || beta_true->cols() != x.cols() + 1)) {
    throw DataError("dataset beta_true must be N x (p + 1)");
  }
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!std::isfinite(y[i])) throw DataError("non-finite y at row " + std::to_string(i + 1));
  }
  if (!x.allFinite()) throw DataError("non-finite value in x");
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    for (Eigen::Index r = 0; r < z.cols(); ++r) {
      const double v = z(i, r);
      if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
        throw DataError("modifier z_" + std::to_string(r + 1) + " at row " + std::to_string(i + 1) +
                        " is outside [0, 1]");
      }
    }
  }
}

DgpSpec DgpSpec::experiment1() {
  DgpSpec s;
  s.experiment = Experiment::exp1;
  s.p = 3;
  return s;
}

DgpSpec DgpSpec::experiment2() {
  DgpSpec s;
  s.experiment = Experiment::exp2;
  s.p = 50;
  return s;
}

void DgpSpec::validate() const {
  if (n_train < 1) throw ConfigError("n_train must be >= 1");
  if (p < 1) throw ConfigError("p must be >= 1");
  if (r < 1) throw ConfigError("R must be >= 1");
  if (!(rho > -1.0 && rho < 1.0)) throw ConfigError("rho must lie in (-1, 1)");
  if (!(noise_sd >= 0.0)) throw ConfigError("noise sd must be >= 0");
  const std::size_t needed_r = p >= 3 ? 5 : 2;
  if (r < needed_r) {
    throw ConfigError("the synthetic coefficient functions need R >= " + std::to_string(needed_r));
  }
}

double true_beta(std::size_t j, std::span<const double> z, std::size_t p, InterceptReading reading) {
  if (j > p) throw std::out_of_range("true_beta: j = " + std::to_string(j) + " exceeds p = " + std::to_string(p));
  auto need = [&](std::size_t dims) {
    if (z.size() < dims) {
      throw std::invalid_argument("true_beta: beta_" + std::to_string(j) + " needs " + std::to_string(dims) +
                                  " modifiers");
    }
  };
  constexpr double pi = std::numbers::pi;
  switch (j) {
    case 0: {
      need(2);
      const double hi = z[1] > 0.5 ? 1.0 : 0.0;
      if (reading == InterceptReading::modulated) {
        return 3.0 * z[0] + (2.0 - 5.0 * hi) * std::sin(pi * z[0]) - 2.0 * hi;
      }
      return 3.0 * z[0] + 2.0 - 5.0 * hi * std::sin(pi * z[0]) - 2.0 * hi;
    }
    case 1: {
      need(1);
      const double z1 = z[0];
      return (3.0 - 3.0 * z1 * z1) * (z1 > 0.6 ? 1.0 : 0.0) - 10.0 * std::sqrt(z1) * (z1 < 0.25 ? 1.0 : 0.0);
    }
    case 2:
      return 1.0;
    case 3: {
      need(5);
      return 10.0 * std::sin(pi * z[0] * z[1]) + 20.0 * (z[2] - 0.5) * (z[2] - 0.5) + 10.0 * z[3] + 5.0 * z[4];
    }
    default:
      return 0.0;
  }
}

namespace {

Dataset empty_dataset(std::size_t n, std::size_t p, std::size_t r) {
  Dataset d;
  d.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  d.z.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(r));
  d.y.resize(n);
  d.beta_true = Eigen::MatrixXd(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p + 1));
  for (std::size_t j = 0; j < p; ++j) d.x_names.push_back("x_" + std::to_string(j + 1));
  for (std::size_t k = 0; k < r; ++k) d.z_names.push_back("z_" + std::to_string(k + 1));
  return d;
}

}  // namespace

TrainTest generate(const DgpSpec& spec, Rng& rng) {
  spec.validate();
  const auto p = static_cast<Eigen::Index>(spec.p);
  Eigen::MatrixXd sigma(p, p);
  for (Eigen::Index a = 0; a < p; ++a) {
    for (Eigen::Index b = 0; b < p; ++b) sigma(a, b) = std::pow(spec.rho, std::abs(a - b));
  }
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success) throw NumericalError("covariance factorization failed");
  const Eigen::MatrixXd chol = llt.matrixL();

  auto fill = [&](std::size_t n) {
    Dataset d = empty_dataset(n, spec.p, spec.r);
    Eigen::VectorXd eps(p);
    std::vector<double> zrow(spec.r);
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = static_cast<Eigen::Index>(i);
      for (Eigen::Index a = 0; a < p; ++a) eps(a) = draw_std_normal(rng);
      d.x.row(row) = (chol * eps).transpose();
      for (std::size_t k = 0; k < spec.r; ++k) {
        zrow[k] = draw_uniform(rng);
        d.z(row, static_cast<Eigen::Index>(k)) = zrow[k];
      }
      double mean = 0.0;
      for (std::size_t j = 0; j <= spec.p; ++j) {
        const double b = true_beta(j, zrow, spec.p, spec.intercept);
        (*d.beta_true)(row, static_cast<Eigen::Index>(j)) = b;
        mean += j == 0 ? b : b * d.x(row, static_cast<Eigen::Index>(j - 1));
      }
      d.y[i] = mean + spec.noise_sd * draw_std_normal(rng);
    }
    return d;
  };

  TrainTest out;
  out.train = fill(spec.n_train);
  out.test = fill(spec.n_test);
  return out;
}

Dataset augment_noise_covariates(const Dataset& data, std::size_t k, Rng& rng) {
  Dataset out = data;
  if (k == 0) return out;
  const auto n = static_cast<Eigen::Index>(data.n());
  const auto p = data.x.cols();
  out.x.conservativeResize(n, p + static_cast<Eigen::Index>(k));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(k); ++c) out.x(i, p + c) = draw_std_normal(rng);
  }
  if (out.x_names.size() != static_cast<std::size_t>(p)) {
    out.x_names.clear();
    for (Eigen::Index j = 0; j < p; ++j) out.x_names.push_back("x_" + std::to_string(j + 1));
  }
  for (std::size_t c = 0; c < k; ++c) out.x_names.push_back("noise_" + std::to_string(c + 1));
  if (out.beta_true) {
    out.beta_true->conservativeResize(n, p + 1 + static_cast<Eigen::Index>(k));
    out.beta_true->rightCols(static_cast<Eigen::Index>(k)).setZero();
  }
  return out;
}

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::vector<std::string_view> split_line(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    cells.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool starts_with(std::string_view s, std::string_view prefix) { return s.substr(0, prefix.size()) == prefix; }

enum class ColumnKind { y, x, z, beta };

struct Column {
  ColumnKind kind;
  std::size_t index;  // within its kind
};

}  // namespace

Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty file");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // UTF-8 BOM

  std::vector<Column> columns;
  std::vector<std::string> header;
  Dataset d;
  bool has_y = false;
  std::vector<std::pair<std::size_t, std::size_t>> beta_cols;  // (j, column)
  for (auto cell : split_line(line)) {
    const std::string name(trim(cell));
    header.push_back(name);
    if (name == "y") {
      if (has_y) throw DataError(path.string() + ": duplicate y column");
      has_y = true;
      columns.push_back({ColumnKind::y, 0});
    } else if (starts_with(name, "x_") || starts_with(name, "noise_")) {
      columns.push_back({ColumnKind::x, d.x_names.size()});
      d.x_names.push_back(name);
    } else if (starts_with(name, "z_")) {
      columns.push_back({ColumnKind::z, d.z_names.size()});
      d.z_names.push_back(name);
    } else if (starts_with(name, "beta_true_")) {
      std::size_t j = 0;
      const auto digits = std::string_view(name).substr(10);
      const auto res = std::from_chars(digits.data(), digits.data() + digits.size(), j);
      if (res.ec != std::errc() || res.ptr != digits.data() + digits.size()) {
        throw DataError(path.string() + ": malformed column name '" + name + "'");
      }
      columns.push_back({ColumnKind::beta, j});
      beta_cols.emplace_back(j, columns.size() - 1);
    } else {
      throw DataError(path.string() + ": unrecognized column '" + name + "' (expected y, x_*, noise_*, z_*, beta_true_*)");
    }
  }
  if (!has_y) throw DataError(path.string() + ": missing column 'y'");
  if (d.z_names.empty()) throw DataError(path.string() + ": no modifier columns z_*");
  const std::size_t p = d.x_names.size();
  const std::size_t r = d.z_names.size();
  if (!beta_cols.empty()) {
    if (beta_cols.size() != p + 1) {
      throw DataError(path.string() + ": expected beta_true_0..beta_true_" + std::to_string(p));
    }
    for (auto [j, col] : beta_cols) {
      if (j > p) throw DataError(path.string() + ": beta_true_" + std::to_string(j) + " exceeds p");
    }
  }

  std::vector<double> xs, zs, bs;
  std::size_t row = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    ++row;
    const auto cells = split_line(line);
    if (cells.size() != columns.size()) {
      throw DataError(path.string() + ": row " + std::to_string(row) + " (line " + std::to_string(line_no) +
                      ") has " + std::to_string(cells.size()) + " cells, expected " +
                      std::to_string(columns.size()));
    }
    std::vector<double> xrow(p), zrow(r), brow(beta_cols.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const auto text = trim(cells[c]);
      double value = 0.0;
      const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
      if (text.empty() || res.ec != std::errc() || res.ptr != text.data() + text.size() || !std::isfinite(value)) {
        throw DataError(path.string() + ": row " + std::to_string(row) + " (line " + std::to_string(line_no) +
                        "), column '" + header[c] + "': invalid numeric value '" + std::string(text) + "'");
      }
      switch (columns[c].kind) {
        case ColumnKind::y: d.y.push_back(value); break;
        case ColumnKind::x: xrow[columns[c].index] = value; break;
        case ColumnKind::z:
          if (!schema.rescale_z && (value < 0.0 || value > 1.0)) {
            throw DataError(path.string() + ": row " + std::to_string(row) + " (line " + std::to_string(line_no) +
                            "), column '" + header[c] + "': value " + std::string(text) +
                            " outside [0, 1] (enable z rescaling)");
          }
          zrow[columns[c].index] = value;
          break;
        case ColumnKind::beta: brow[columns[c].index] = value; break;
      }
    }
    xs.insert(xs.end(), xrow.begin(), xrow.end());
    zs.insert(zs.end(), zrow.begin(), zrow.end());
    bs.insert(bs.end(), brow.begin(), brow.end());
  }
  const auto n = static_cast<Eigen::Index>(row);
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  d.x = Eigen::Map<RowMajor>(xs.data(), n, static_cast<Eigen::Index>(p));
  d.z = Eigen::Map<RowMajor>(zs.data(), n, static_cast<Eigen::Index>(r));
  if (!beta_cols.empty()) d.beta_true = Eigen::Map<RowMajor>(bs.data(), n, static_cast<Eigen::Index>(p + 1));

  if (schema.rescale_z) {
    d.z_min.resize(r);
    d.z_max.resize(r);
    for (std::size_t k = 0; k < r; ++k) {
      auto col = d.z.col(static_cast<Eigen::Index>(k));
      const double lo = n > 0 ? col.minCoeff() : 0.0;
      const double hi = n > 0 ? col.maxCoeff() : 1.0;
      d.z_min[k] = lo;
      d.z_max[k] = hi;
      if (hi > lo) {
        col = (col.array() - lo) / (hi - lo);
      } else {
        col.setConstant(0.5);
      }
    }
  }
  d.validate();
  return d;
}

void write_csv(const Dataset& data, const std::filesystem::path& path) {
  data.validate();
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  const std::size_t p = data.p();
  const std::size_t r = data.r();
  out << "y";
  for (std::size_t j = 0; j < p; ++j) out << ',' << (data.x_names.empty() ? "x_" + std::to_string(j + 1) : data.x_names[j]);
  for (std::size_t k = 0; k < r; ++k) out << ',' << (data.z_names.empty() ? "z_" + std::to_string(k + 1) : data.z_names[k]);
  if (data.beta_true) {
    for (std::size_t j = 0; j <= p; ++j) out << ",beta_true_" << j;
  }
  out << '\n';
  for (std::size_t i = 0; i < data.n(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    out << format_double(data.y[i]);
    for (std::size_t j = 0; j < p; ++j) out << ',' << format_double(data.x(row, static_cast<Eigen::Index>(j)));
    for (std::size_t k = 0; k < r; ++k) out << ',' << format_double(data.z(row, static_cast<Eigen::Index>(k)));
    if (data.beta_true) {
      for (std::size_t j = 0; j <= p; ++j) out << ',' << format_double((*data.beta_true)(row, static_cast<Eigen::Index>(j)));
    }
    out << '\n';
  }
  if (!out) throw DataError("failed writing " + path.string());
}

}  // namespace vcshrink
