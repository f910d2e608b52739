#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace vcshrink::testing {

inline double mean(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double variance(std::span<const double> v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

// Standard error of the sample mean.
inline double std_error(std::span<const double> v) { return std::sqrt(variance(v) / static_cast<double>(v.size())); }

// Standard error of the sample variance, from the fourth central moment.
inline double variance_std_error(std::span<const double> v) {
  const double m = mean(v);
  double m2 = 0.0;
  double m4 = 0.0;
  for (double x : v) {
    const double d = (x - m) * (x - m);
    m2 += d;
    m4 += d * d;
  }
  const double n = static_cast<double>(v.size());
  m2 /= n;
  m4 /= n;
  return std::sqrt((m4 - m2 * m2) / n);
}

// P(K > t) for the Kolmogorov distribution.
inline double kolmogorov_survival(double t) {
  if (t < 1e-3) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = std::exp(-2.0 * k * k * t * t);
    sum += (k % 2 == 1 ? term : -term);
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

// Asymptotic p-value with Stephens' small-sample correction.
inline double ks_pvalue(double d, double effective_n) {
  const double root = std::sqrt(effective_n);
  return kolmogorov_survival((root + 0.12 + 0.11 / root) * d);
}

inline double ks_statistic(std::vector<double> x, const std::function<double(double)>& cdf) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = cdf(x[i]);
    d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  return d;
}

inline double ks_test(std::vector<double> x, const std::function<double(double)>& cdf) {
  const double n = static_cast<double>(x.size());
  return ks_pvalue(ks_statistic(std::move(x), cdf), n);
}

inline double ks_statistic_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == v) ++i;
    while (j < b.size() && b[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

inline double ks_test_two_sample(std::vector<double> a, std::vector<double> b) {
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  return ks_pvalue(ks_statistic_two_sample(std::move(a), std::move(b)), na * nb / (na + nb));
}

// Pearson goodness of fit; bins with expected count below `min_expected`
// are pooled into their neighbour.
inline double chi_square_gof(std::span<const double> observed, std::span<const double> probs,
                             double min_expected = 5.0) {
  const double n = std::accumulate(observed.begin(), observed.end(), 0.0);
  std::vector<double> obs;
  std::vector<double> exp;
  double o_acc = 0.0;
  double e_acc = 0.0;
  for (std::size_t k = 0; k < observed.size(); ++k) {
    o_acc += observed[k];
    e_acc += n * probs[k];
    if (e_acc >= min_expected) {
      obs.push_back(o_acc);
      exp.push_back(e_acc);
      o_acc = e_acc = 0.0;
    }
  }
  if (e_acc > 0.0 || o_acc > 0.0) {
    if (exp.empty()) throw std::invalid_argument("chi_square_gof: too few counts");
    obs.back() += o_acc;
    exp.back() += e_acc;
  }
  if (exp.size() < 2) return 1.0;
  double stat = 0.0;
  for (std::size_t k = 0; k < exp.size(); ++k) stat += (obs[k] - exp[k]) * (obs[k] - exp[k]) / exp[k];
  boost::math::chi_squared dist(static_cast<double>(exp.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

// Two-sample homogeneity test on count vectors over the same bins.
inline double chi_square_two_sample(std::span<const double> a, std::span<const double> b,
                                    double min_expected = 5.0) {
  const double na = std::accumulate(a.begin(), a.end(), 0.0);
  const double nb = std::accumulate(b.begin(), b.end(), 0.0);
  std::vector<double> pa;
  std::vector<double> pb;
  double ca = 0.0;
  double cb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    ca += a[k];
    cb += b[k];
    const double total = ca + cb;
    if (total * std::min(na, nb) / (na + nb) >= min_expected) {
      pa.push_back(ca);
      pb.push_back(cb);
      ca = cb = 0.0;
    }
  }
  if (ca + cb > 0.0) {
    if (pa.empty()) throw std::invalid_argument("chi_square_two_sample: too few counts");
    pa.back() += ca;
    pb.back() += cb;
  }
  if (pa.size() < 2) return 1.0;
  double stat = 0.0;
  for (std::size_t k = 0; k < pa.size(); ++k) {
    const double total = pa[k] + pb[k];
    const double ea = total * na / (na + nb);
    const double eb = total * nb / (na + nb);
    stat += (pa[k] - ea) * (pa[k] - ea) / ea + (pb[k] - eb) * (pb[k] - eb) / eb;
  }
  boost::math::chi_squared dist(static_cast<double>(pa.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

// Adaptive Gauss-Kronrod over [a, b], split at the given interior points.
inline double integrate(const std::function<double(double)>& f, double a, double b,
                        std::vector<double> breaks = {}, double rel_tol = 1e-14) {
  std::vector<double> pts{a};
  for (double x : breaks) {
    if (x > a && x < b) pts.push_back(x);
  }
  pts.push_back(b);
  std::sort(pts.begin(), pts.end());
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
    total += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, pts[k], pts[k + 1], 15, rel_tol);
  }
  return total;
}

// Log-spaced break points 10^lo .. 10^hi for integrals over wide ranges.
inline std::vector<double> decades(int lo, int hi) {
  std::vector<double> out;
  for (int e = lo; e <= hi; ++e) out.push_back(std::pow(10.0, e));
  return out;
}

inline double quantile_of(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace vcshrink::testing
