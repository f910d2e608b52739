#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "vcshrink/gibbs.hpp"

namespace vcshrink {

/// Empirical quantile with linear interpolation between order statistics:
/// h = (n - 1) q, Q = x_(floor h) + (h - floor h) (x_(floor h + 1) - x_(floor h)),
/// with x_(k) the 0-based sorted sample. `sorted` must be ascending.
double quantile_sorted(std::span<const double> sorted, double q);
double quantile(std::vector<double> values, double q);

struct SummaryReport {
  std::size_t p = 0;
  std::size_t r = 0;
  std::size_t grid_size = 0;
  std::size_t draws = 0;
  double level = 0.95;
  // (p+1) x G, row-major by j.
  std::vector<double> beta_mean;
  std::vector<double> beta_lower;
  std::vector<double> beta_upper;
  std::vector<double> lambda_median;  // p+1
  std::vector<double> lambda_mean;    // p+1
  std::vector<double> theta_mean;     // (p+1) x R
  std::vector<double> eta_median;     // p+1
  double sigma2_mean = 0.0;

  std::size_t index(std::size_t j, std::size_t g) const { return j * grid_size + g; }
  double mean(std::size_t j, std::size_t g) const { return beta_mean[index(j, g)]; }
  double lower(std::size_t j, std::size_t g) const { return beta_lower[index(j, g)]; }
  double upper(std::size_t j, std::size_t g) const { return beta_upper[index(j, g)]; }
  double theta(std::size_t j, std::size_t k) const { return theta_mean[j * r + k]; }
};

/// Pools the kept draws of all chains. Throws std::invalid_argument when the
/// chains disagree on p, R or grid size, or hold no draws.
SummaryReport summarize(std::span<const ChainOutput> chains, double level = 0.95);

struct CoefficientMetrics {
  std::vector<double> mse;       // per j
  std::vector<double> coverage;  // per j
  double mean_mse = 0.0;
  double mean_coverage = 0.0;
  std::optional<double> predictive_rmse;
};

/// `truth` is G x (p+1) (the layout of Dataset::beta_true). When `test` is
/// given (its z rows must be the grid), also reports the RMSE of
/// sum_j mean beta_j(z) x_j against its y.
CoefficientMetrics coverage_and_mse(const SummaryReport& report, const Eigen::MatrixXd& truth,
                                    const Dataset* test = nullptr);

struct ScreenRule {
  enum class Mode { elbow, threshold };
  Mode mode = Mode::elbow;
  double threshold = 1.0;  // threshold mode: select median > threshold
  double min_ratio = 1.5;  // elbow mode: required ratio across the largest gap
};

/// Covariates j in 1..p (1-based, intercept excluded) whose posterior median
/// local scale passes the rule. `medians` holds lambda_0..lambda_p.
std::vector<std::size_t> lambda_screen(std::span<const double> medians, const ScreenRule& rule = {});

struct ModifierShare {
  std::size_t axis = 0;  // 0-based
  double mean = 0.0;
  double cumulative = 0.0;
  bool in_core = false;  // inside the prefix reaching `mass`
};

/// Posterior mean theta_j sorted descending with cumulative mass; `in_core`
/// flags the shortest prefix whose mass reaches `mass`.
std::vector<ModifierShare> modifier_report(std::span<const ChainOutput> chains, std::size_t j, double mass = 0.9);

}  // namespace vcshrink
