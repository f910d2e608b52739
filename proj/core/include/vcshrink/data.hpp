#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "vcshrink/samplers.hpp"

namespace vcshrink {

/// N rows of (x in R^p, z in [0,1]^R, y). `beta_true`, when present, holds
/// beta_j(z_i) for j = 0..p as an N x (p+1) matrix.
struct Dataset {
  Eigen::MatrixXd x;
  Eigen::MatrixXd z;
  std::vector<double> y;
  std::vector<std::string> x_names;
  std::vector<std::string> z_names;
  std::optional<Eigen::MatrixXd> beta_true;
  // Min-max rescaling applied to z on load (empty when none was applied).
  std::vector<double> z_min;
  std::vector<double> z_max;

  std::size_t n() const { return y.size(); }
  std::size_t p() const { return static_cast<std::size_t>(x.cols()); }
  std::size_t r() const { return static_cast<std::size_t>(z.cols()); }

  /// Throws DataError on NaN/Inf, z outside [0,1] or inconsistent shapes.
  void validate() const;
};

enum class Experiment { exp1, exp2, custom };

/// Two readings of the intercept function's printed formula:
/// modulated: 3 z1 + (2 - 5 1{z2>.5}) sin(pi z1) - 2 1{z2>.5}
/// literal:   3 z1 + 2 - 5 1{z2>.5} sin(pi z1) - 2 1{z2>.5}
enum class InterceptReading { modulated, literal };

struct DgpSpec {
  Experiment experiment = Experiment::exp1;
  std::size_t n_train = 1000;
  std::size_t n_test = 200;
  std::size_t p = 3;
  std::size_t r = 20;
  double rho = 0.5;
  double noise_sd = 1.0;
  std::uint64_t seed = 0;
  InterceptReading intercept = InterceptReading::modulated;

  static DgpSpec experiment1();
  static DgpSpec experiment2();
  /// Throws ConfigError.
  void validate() const;
};

/// Coefficient function j of the synthetic experiments. beta_j == 0 for
/// j >= 4; j > p is out of range.
double true_beta(std::size_t j, std::span<const double> z, std::size_t p,
                 InterceptReading reading = InterceptReading::modulated);

struct TrainTest {
  Dataset train;
  Dataset test;
};

/// x ~ N_p(0, Sigma), Sigma_ij = rho^|i-j|; z ~ U[0,1]^R;
/// y = sum_j beta_j(z) x_j + noise_sd * eps. Both sets carry beta_true.
TrainTest generate(const DgpSpec& spec, Rng& rng);

/// Appends k standard-normal columns named noise_1..noise_k.
Dataset augment_noise_covariates(const Dataset& data, std::size_t k, Rng& rng);

struct CsvSchema {
  bool rescale_z = false;
};

/// Header row with y, x_* (or noise_*), z_* and optional beta_true_j
/// columns. Throws DataError naming the row and column of bad cells.
Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema = {});
void write_csv(const Dataset& data, const std::filesystem::path& path);

/// Shortest text that parses back to the same double.
std::string format_double(double value);

}  // namespace vcshrink
