#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "vcshrink/samplers.hpp"
#include "vcshrink/tree.hpp"

namespace vcshrink {

enum class TreePriorVariant { quadratic, exponential };

/// Galton-Watson topology prior. Quadratic: split probability
/// base * (1 + d)^-2 at depth d. Exponential: gamma^d.
/// `max_depth >= 0` forces nodes at that depth to be leaves.
struct TreePriorConfig {
  TreePriorVariant variant = TreePriorVariant::quadratic;
  double base = 0.95;
  double gamma = 0.25;
  int max_depth = -1;

  double split_probability(int depth) const;
  /// Throws ConfigError for parameters outside their documented ranges.
  void validate() const;
};

/// log prior mass of the topology only; rule probabilities are excluded.
double tree_log_prior(const DecisionTree& tree, const TreePriorConfig& config);

/// Change in tree_log_prior from splitting a leaf at `depth`.
double grow_log_prior_ratio(int depth, const TreePriorConfig& config);

/// Draws a topology from the branching process with axes ~ theta and
/// thresholds ~ U(0,1). Jumps are left at 0.
DecisionTree draw_tree_prior(const TreePriorConfig& config, std::span<const double> theta, Rng& rng);

struct SplitProbState {
  std::vector<std::vector<double>> theta;  // per ensemble, length R
  std::vector<double> eta;                 // per ensemble
};

/// Local scales lambda_0..lambda_p, global tau, slab c2 and noise sigma2.
struct ShrinkageState {
  std::vector<double> lambda;
  double tau = 1.0;
  double c2 = 4.0;
  double sigma2 = 1.0;

  /// s_j^2 = tau^2 lambda_j^2 c^2 / (c^2 + tau^2 lambda_j^2)
  double s2(std::size_t j) const;
};

double rhs_variance(double tau, double lambda, double c2);
/// log s^2 from log tau, log lambda and log c^2 without overflow.
double log_rhs_variance(double log_tau, double log_lambda, double log_c2);

/// Per-leaf prior variance s_j^2 / M_j: the sum over M_j trees then has
/// variance s_j^2.
double leaf_scale(std::size_t j, const ShrinkageState& shrinkage, int trees);

double log_half_cauchy(double x, double scale);
double log_inv_gamma(double x, double shape, double rate);
double log_beta_density(double u, double a, double b);
double inv_gamma_cdf(double x, double shape, double rate);

/// Prior on eta_j implied by u_j = eta_j / (eta_j + R) ~ Beta(a, b).
double log_eta_prior(double eta, std::size_t num_axes, double a, double b);
double draw_eta_prior(Rng& rng, std::size_t num_axes, double a, double b);

/// Log Dirichlet-multinomial factor of the split counts given eta.
double log_dirichlet_multinomial(std::span<const std::size_t> counts, double eta);

/// Rate lambda_sigma such that sigma^2 ~ IG(nu/2, nu*lambda_sigma/2) puts
/// 90% of its mass below sd(y)^2.
double calibrate_noise_rate(std::span<const double> y, double nu, double quantile = 0.90);

/// tau0 = p / (p - p0) * sd_y / sqrt(N), p0 = min(10, max(1, floor(p/4))).
double default_tau0(std::size_t p, std::size_t n, double sd_y);

double sample_sd(std::span<const double> v);
double sample_mean(std::span<const double> v);

struct Hyperparameters {
  int trees = 50;                      // M_j, shared by every ensemble
  std::vector<int> trees_per_ensemble; // optional override, length p+1
  double nu = 3.0;
  std::optional<double> noise_scale;   // lambda_sigma; calibrated when absent
  double nu_c = 4.0;
  double s_c = 2.0;
  std::optional<double> tau0;          // default_tau0 when absent
  double eta_a = 1.0;                  // u_j ~ Beta(eta_a, eta_b)
  double eta_b = 0.5;
  TreePriorConfig tree_prior;
  CutpointMode cutpoints = CutpointMode::uniform;

  int trees_for(std::size_t j) const;
  /// Throws ConfigError.
  void validate(std::size_t p) const;
  /// Fills noise_scale and tau0 from the response the sampler will see.
  Hyperparameters resolved(std::span<const double> y, std::size_t p) const;
};

}  // namespace vcshrink
