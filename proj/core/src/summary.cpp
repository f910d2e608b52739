#include "vcshrink/summary.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace vcshrink {

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("quantile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("quantile level must lie in [0, 1]");
  const double h = static_cast<double>(sorted.size() - 1) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

double quantile(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  return quantile_sorted(values, q);
}

SummaryReport summarize(std::span<const ChainOutput> chains, double level) {
  if (chains.empty()) throw std::invalid_argument("summarize: no chains");
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("summarize: level must lie in (0, 1)");
  SummaryReport rep;
  rep.p = chains.front().p;
  rep.r = chains.front().r;
  rep.grid_size = chains.front().grid_size;
  rep.level = level;
  for (const auto& c : chains) {
    if (c.p != rep.p || c.r != rep.r || c.grid_size != rep.grid_size) {
      throw std::invalid_argument("summarize: chains have different shapes");
    }
    rep.draws += c.draws();
  }
  if (rep.draws == 0) throw std::invalid_argument("summarize: chains hold no draws");
  const std::size_t ens = rep.p + 1;
  const double lo_q = 0.5 * (1.0 - level);
  const double hi_q = 1.0 - lo_q;
  const double inv_draws = 1.0 / static_cast<double>(rep.draws);

  rep.beta_mean.assign(ens * rep.grid_size, 0.0);
  rep.beta_lower.assign(ens * rep.grid_size, 0.0);
  rep.beta_upper.assign(ens * rep.grid_size, 0.0);
  std::vector<double> pool(rep.draws);
  for (std::size_t j = 0; j < ens; ++j) {
    for (std::size_t g = 0; g < rep.grid_size; ++g) {
      std::size_t k = 0;
      for (const auto& c : chains) {
        for (std::size_t d = 0; d < c.draws(); ++d) pool[k++] = c.beta_at(d, j, g);
      }
      const double sum = std::accumulate(pool.begin(), pool.end(), 0.0);
      std::sort(pool.begin(), pool.end());
      rep.beta_mean[rep.index(j, g)] = sum * inv_draws;
      rep.beta_lower[rep.index(j, g)] = quantile_sorted(pool, lo_q);
      rep.beta_upper[rep.index(j, g)] = quantile_sorted(pool, hi_q);
    }
  }

  rep.lambda_median.assign(ens, 0.0);
  rep.lambda_mean.assign(ens, 0.0);
  rep.eta_median.assign(ens, 0.0);
  rep.theta_mean.assign(ens * rep.r, 0.0);
  for (std::size_t j = 0; j < ens; ++j) {
    std::size_t k = 0;
    std::vector<double> etas(rep.draws);
    for (const auto& c : chains) {
      for (std::size_t d = 0; d < c.draws(); ++d) {
        etas[k] = c.eta_at(d, j);
        pool[k++] = c.lambda_at(d, j);
        for (std::size_t a = 0; a < rep.r; ++a) rep.theta_mean[j * rep.r + a] += c.theta_at(d, j, a);
      }
    }
    rep.lambda_mean[j] = std::accumulate(pool.begin(), pool.end(), 0.0) * inv_draws;
    rep.lambda_median[j] = quantile(pool, 0.5);
    rep.eta_median[j] = quantile(etas, 0.5);
    for (std::size_t a = 0; a < rep.r; ++a) rep.theta_mean[j * rep.r + a] *= inv_draws;
  }
  double s2 = 0.0;
  for (const auto& c : chains) s2 += std::accumulate(c.sigma2.begin(), c.sigma2.end(), 0.0);
  rep.sigma2_mean = s2 * inv_draws;
  return rep;
}

CoefficientMetrics coverage_and_mse(const SummaryReport& report, const Eigen::MatrixXd& truth, const Dataset* test) {
  const std::size_t ens = report.p + 1;
  if (static_cast<std::size_t>(truth.rows()) != report.grid_size || static_cast<std::size_t>(truth.cols()) != ens) {
    throw std::invalid_argument("coverage_and_mse: truth must be G x (p + 1)");
  }
  CoefficientMetrics m;
  m.mse.assign(ens, 0.0);
  m.coverage.assign(ens, 0.0);
  const double g_count = static_cast<double>(report.grid_size);
  for (std::size_t j = 0; j < ens; ++j) {
    for (std::size_t g = 0; g < report.grid_size; ++g) {
      const double t = truth(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(j));
      const double e = report.mean(j, g) - t;
      m.mse[j] += e * e;
      if (report.lower(j, g) <= t && t <= report.upper(j, g)) m.coverage[j] += 1.0;
    }
    if (report.grid_size > 0) {
      m.mse[j] /= g_count;
      m.coverage[j] /= g_count;
    }
  }
  m.mean_mse = std::accumulate(m.mse.begin(), m.mse.end(), 0.0) / static_cast<double>(ens);
  m.mean_coverage = std::accumulate(m.coverage.begin(), m.coverage.end(), 0.0) / static_cast<double>(ens);
  if (test != nullptr) {
    if (test->n() != report.grid_size || test->p() != report.p) {
      throw std::invalid_argument("coverage_and_mse: test set does not match the grid");
    }
    double ss = 0.0;
    for (std::size_t g = 0; g < report.grid_size; ++g) {
      double pred = report.mean(0, g);
      for (std::size_t j = 1; j < ens; ++j) {
        pred += report.mean(j, g) * test->x(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(j - 1));
      }
      ss += (pred - test->y[g]) * (pred - test->y[g]);
    }
    m.predictive_rmse = std::sqrt(ss / g_count);
  }
  return m;
}

std::vector<std::size_t> lambda_screen(std::span<const double> medians, const ScreenRule& rule) {
  std::vector<std::size_t> selected;
  if (medians.size() < 2) return selected;
  if (rule.mode == ScreenRule::Mode::threshold) {
    for (std::size_t j = 1; j < medians.size(); ++j) {
      if (medians[j] > rule.threshold) selected.push_back(j);
    }
    return selected;
  }
  std::vector<std::size_t> order(medians.size() - 1);
  std::iota(order.begin(), order.end(), std::size_t{1});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return medians[a] > medians[b]; });
  double best = 0.0;
  std::size_t cut = 0;
  for (std::size_t k = 0; k + 1 < order.size(); ++k) {
    const double hi = medians[order[k]];
    const double lo = medians[order[k + 1]];
    const double ratio = lo > 0.0 ? hi / lo : (hi > 0.0 ? std::numeric_limits<double>::infinity() : 1.0);
    if (ratio > best) {
      best = ratio;
      cut = k + 1;
    }
  }
  if (!(best > rule.min_ratio)) return selected;
  selected.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(cut));
  std::sort(selected.begin(), selected.end());
  return selected;
}

std::vector<ModifierShare> modifier_report(std::span<const ChainOutput> chains, std::size_t j, double mass) {
  if (chains.empty()) throw std::invalid_argument("modifier_report: no chains");
  const std::size_t r = chains.front().r;
  std::vector<double> mean(r, 0.0);
  std::size_t draws = 0;
  for (const auto& c : chains) {
    if (c.r != r || j > c.p) throw std::invalid_argument("modifier_report: inconsistent chains");
    for (std::size_t d = 0; d < c.draws(); ++d) {
      for (std::size_t k = 0; k < r; ++k) mean[k] += c.theta_at(d, j, k);
    }
    draws += c.draws();
  }
  if (draws == 0) throw std::invalid_argument("modifier_report: chains hold no draws");
  std::vector<ModifierShare> out(r);
  for (std::size_t k = 0; k < r; ++k) out[k] = {k, mean[k] / static_cast<double>(draws), 0.0, false};
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.mean > b.mean; });
  double acc = 0.0;
  bool reached = false;
  for (auto& share : out) {
    share.in_core = !reached;
    acc += share.mean;
    share.cumulative = acc;
    if (acc >= mass) reached = true;
  }
  return out;
}

}  // namespace vcshrink
