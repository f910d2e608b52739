#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "stats.hpp"
#include "vcshrink/data.hpp"
#include "vcshrink/gibbs.hpp"

namespace vcshrink::testing {

inline Dataset random_dataset(std::size_t n, std::size_t p, std::size_t r, Rng& rng) {
  Dataset d;
  d.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  d.z.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(r));
  d.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    for (Eigen::Index j = 0; j < d.x.cols(); ++j) d.x(row, j) = draw_std_normal(rng);
    for (Eigen::Index k = 0; k < d.z.cols(); ++k) d.z(row, k) = draw_uniform(rng);
    d.y[i] = draw_std_normal(rng);
  }
  return d;
}

inline Hyperparameters small_hyper(int trees, double tau0 = 0.5, double noise_scale = 1.0) {
  Hyperparameters h;
  h.trees = trees;
  h.tau0 = tau0;
  h.noise_scale = noise_scale;
  return h;
}

// log of the integral over mu of prod_i N(r_i; mu x_i, sigma2) N(mu; 0, s2)
// by adaptive quadrature around the posterior mode.
inline double quadrature_leaf_log_marginal(const std::vector<double>& x, const std::vector<double>& r, double s2,
                                           double sigma2) {
  double a = 0.0;
  double b = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    a += x[i] * x[i];
    b += x[i] * r[i];
  }
  const double post_var = 1.0 / (a / sigma2 + 1.0 / s2);
  const double mode = post_var * b / sigma2;
  auto log_joint = [&](double mu) {
    double out = -0.5 * std::log(2.0 * std::numbers::pi * s2) - 0.5 * mu * mu / s2;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double e = r[i] - mu * x[i];
      out += -0.5 * std::log(2.0 * std::numbers::pi * sigma2) - 0.5 * e * e / sigma2;
    }
    return out;
  };
  const double peak = log_joint(mode);
  const double half = 40.0 * std::sqrt(post_var);
  const double integral =
      integrate([&](double mu) { return std::exp(log_joint(mu) - peak); }, mode - half, mode + half, {mode});
  return peak + std::log(integral);
}

}  // namespace vcshrink::testing
