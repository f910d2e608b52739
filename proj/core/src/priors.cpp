#include "vcshrink/priors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "vcshrink/errors.hpp"

namespace vcshrink {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double safe_log(double x) { return x > 0.0 ? std::log(x) : kNegInf; }

double log_add_exp(double a, double b) {
  if (a < b) std::swap(a, b);
  if (b == kNegInf) return a;
  return a + std::log1p(std::exp(b - a));
}

}  // namespace

double TreePriorConfig::split_probability(int depth) const {
  if (max_depth >= 0 && depth >= max_depth) return 0.0;
  switch (variant) {
    case TreePriorVariant::quadratic:
      return base / ((1.0 + depth) * (1.0 + depth));
    case TreePriorVariant::exponential:
      return std::pow(gamma, depth);
  }
  return 0.0;
}

void TreePriorConfig::validate() const {
  if (variant == TreePriorVariant::quadratic && !(base > 0.0 && base < 1.0)) {
    throw ConfigError("tree prior base must lie in (0, 1); got " + std::to_string(base));
  }
  if (variant == TreePriorVariant::exponential && !(gamma > 0.0 && gamma < 0.5)) {
    throw ConfigError("tree prior gamma must lie in (0, 1/2); got " + std::to_string(gamma));
  }
}

double tree_log_prior(const DecisionTree& tree, const TreePriorConfig& config) {
  config.validate();
  double total = 0.0;
  for (std::size_t i = 0; i < tree.capacity(); ++i) {
    const auto& n = tree.node(static_cast<DecisionTree::NodeId>(i));
    if (!n.alive) continue;
    const double p = config.split_probability(n.depth);
    if (!(p >= 0.0 && p <= 1.0)) {
      throw ConfigError("tree prior split probability outside [0, 1] at depth " + std::to_string(n.depth));
    }
    total += n.is_leaf() ? safe_log(1.0 - p) : safe_log(p);
  }
  return total;
}

double grow_log_prior_ratio(int depth, const TreePriorConfig& config) {
  const double p = config.split_probability(depth);
  const double p_child = config.split_probability(depth + 1);
  if (p <= 0.0) return kNegInf;
  return std::log(p) + 2.0 * safe_log(1.0 - p_child) - safe_log(1.0 - p);
}

DecisionTree draw_tree_prior(const TreePriorConfig& config, std::span<const double> theta, Rng& rng) {
  DecisionTree tree;
  std::vector<DecisionTree::NodeId> pending{DecisionTree::kRoot};
  while (!pending.empty()) {
    const auto id = pending.back();
    pending.pop_back();
    if (draw_uniform(rng) < config.split_probability(tree.node(id).depth)) {
      DecisionRule rule;
      rule.axis = draw_multinomial_index(rng, theta);
      rule.threshold = draw_uniform(rng);
      const auto [l, r] = tree.grow(id, rule);
      pending.push_back(r);
      pending.push_back(l);
    }
  }
  return tree;
}

double ShrinkageState::s2(std::size_t j) const { return rhs_variance(tau, lambda.at(j), c2); }

double rhs_variance(double tau, double lambda, double c2) {
  const double a = tau * tau * lambda * lambda;
  if (std::isinf(a)) return c2;
  return a * c2 / (c2 + a);
}

double log_rhs_variance(double log_tau, double log_lambda, double log_c2) {
  const double log_a = 2.0 * (log_tau + log_lambda);
  return log_a + log_c2 - log_add_exp(log_c2, log_a);
}

double leaf_scale(std::size_t j, const ShrinkageState& shrinkage, int trees) {
  return shrinkage.s2(j) / static_cast<double>(trees);
}

double log_half_cauchy(double x, double scale) {
  if (!(x > 0.0) || !(scale > 0.0)) throw std::domain_error("log_half_cauchy: arguments must be > 0");
  const double u = x / scale;
  return std::log(2.0 / std::numbers::pi) - std::log(scale) - std::log1p(u * u);
}

double log_inv_gamma(double x, double shape, double rate) {
  if (!(x > 0.0) || !(shape > 0.0) || !(rate > 0.0)) {
    throw std::domain_error("log_inv_gamma: arguments must be > 0");
  }
  return shape * std::log(rate) - boost::math::lgamma(shape) - (shape + 1.0) * std::log(x) - rate / x;
}

double log_beta_density(double u, double a, double b) {
  if (!(u > 0.0 && u < 1.0) || !(a > 0.0) || !(b > 0.0)) {
    throw std::domain_error("log_beta_density: u must lie in (0,1) and a, b > 0");
  }
  return (a - 1.0) * std::log(u) + (b - 1.0) * std::log1p(-u) - std::log(boost::math::beta(a, b));
}

double inv_gamma_cdf(double x, double shape, double rate) {
  if (!(x > 0.0)) return 0.0;
  return boost::math::gamma_q(shape, rate / x);
}

double log_eta_prior(double eta, std::size_t num_axes, double a, double b) {
  const double r = static_cast<double>(num_axes);
  const double u = eta / (eta + r);
  return log_beta_density(u, a, b) + std::log(r) - 2.0 * std::log(eta + r);
}

double draw_eta_prior(Rng& rng, std::size_t num_axes, double a, double b) {
  const double u = draw_beta(rng, a, b);
  return static_cast<double>(num_axes) * u / (1.0 - u);
}

double log_dirichlet_multinomial(std::span<const std::size_t> counts, double eta) {
  if (!(eta > 0.0)) throw std::domain_error("log_dirichlet_multinomial: eta must be > 0");
  const double r = static_cast<double>(counts.size());
  const double total = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::size_t{0}));
  if (total == 0.0) return 0.0;
  // Rising factorials as sums of logs: no cancellation between huge
  // lgamma values when eta is large.
  auto log_rising = [](double x, std::size_t n) {
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) s += std::log(x + static_cast<double>(k));
    return s;
  };
  double out = -log_rising(eta, static_cast<std::size_t>(total));
  const double a = eta / r;
  for (std::size_t n : counts) out += log_rising(a, n);
  return out;
}

double sample_mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_sd(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = sample_mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double calibrate_noise_rate(std::span<const double> y, double nu, double quantile) {
  if (y.size() < 2) throw DataError("noise calibration needs at least two responses");
  if (!(nu > 0.0)) throw ConfigError("nu must be > 0");
  const double sd = sample_sd(y);
  if (!(sd > 0.0)) throw DataError("noise calibration failed: the response is constant (sd(y) = 0)");
  // P(sigma^2 < sd^2) = Q(nu/2, nu*lambda/(2 sd^2)) for the inverse gamma.
  const double shape = nu / 2.0;
  const double x = boost::math::gamma_q_inv(shape, quantile);
  return 2.0 * sd * sd * x / nu;
}

double default_tau0(std::size_t p, std::size_t n, double sd_y) {
  if (n < 1) throw ConfigError("default_tau0: N must be >= 1");
  const std::size_t p0 = std::min<std::size_t>(10, std::max<std::size_t>(1, p / 4));
  if (p <= p0) {
    throw ConfigError("default tau0 needs p - p0 > 0 (p >= 2); set tau0 explicitly for p = " +
                      std::to_string(p));
  }
  return static_cast<double>(p) / static_cast<double>(p - p0) * sd_y / std::sqrt(static_cast<double>(n));
}

int Hyperparameters::trees_for(std::size_t j) const {
  return trees_per_ensemble.empty() ? trees : trees_per_ensemble.at(j);
}

void Hyperparameters::validate(std::size_t p) const {
  if (trees < 1) throw ConfigError("trees per ensemble must be >= 1");
  if (!trees_per_ensemble.empty()) {
    if (trees_per_ensemble.size() != p + 1) {
      throw ConfigError("trees_per_ensemble must have p + 1 = " + std::to_string(p + 1) + " entries");
    }
    for (int m : trees_per_ensemble) {
      if (m < 1) throw ConfigError("trees per ensemble must be >= 1");
    }
  }
  if (!(nu > 0.0)) throw ConfigError("nu must be > 0");
  if (noise_scale && !(*noise_scale > 0.0)) throw ConfigError("noise_scale must be > 0");
  if (!(nu_c > 0.0)) throw ConfigError("nu_c must be > 0");
  if (!(s_c > 0.0)) throw ConfigError("s_c must be > 0");
  if (tau0 && !(*tau0 > 0.0)) throw ConfigError("tau0 must be > 0");
  if (!(eta_a > 0.0) || !(eta_b > 0.0)) throw ConfigError("eta Beta hyperparameters must be > 0");
  tree_prior.validate();
}

Hyperparameters Hyperparameters::resolved(std::span<const double> y, std::size_t p) const {
  Hyperparameters out = *this;
  if (!out.noise_scale) out.noise_scale = calibrate_noise_rate(y, nu);
  if (!out.tau0) out.tau0 = default_tau0(p, y.size(), sample_sd(y));
  out.validate(p);
  return out;
}

}  // namespace vcshrink
