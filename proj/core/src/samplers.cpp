#include "vcshrink/samplers.hpp"

#include <algorithm>
#include <numbers>
#include <numeric>

#include <boost/random/gamma_distribution.hpp>
#include <boost/random/normal_distribution.hpp>

namespace vcshrink {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t mix(std::initializer_list<std::uint64_t> words) {
  std::uint64_t h = 0x243f6a8885a308d3ULL;
  for (auto w : words) h = splitmix64(h ^ splitmix64(w));
  return h;
}

double log_add_exp(double a, double b) {
  if (a < b) std::swap(a, b);
  if (b == -std::numeric_limits<double>::infinity()) return a;
  return a + std::log1p(std::exp(b - a));
}

}  // namespace

Rng RngStream::engine() const { return Rng(mix({seed_, stream_})); }

Rng RngStream::substream(std::uint64_t sweep, std::uint64_t block) const {
  return Rng(mix({seed_, stream_, sweep, block}));
}

double draw_std_normal(Rng& rng) {
  boost::random::normal_distribution<double> dist(0.0, 1.0);
  return dist(rng);
}

double draw_normal(Rng& rng, double mean, double var) {
  if (!(var >= 0.0)) throw std::domain_error("draw_normal: variance must be >= 0");
  if (var == 0.0) return mean;
  return mean + std::sqrt(var) * draw_std_normal(rng);
}

double draw_gamma(Rng& rng, double shape, double rate) {
  if (!(shape > 0.0) || !(rate > 0.0)) {
    throw std::domain_error("draw_gamma: shape and rate must be > 0");
  }
  boost::random::gamma_distribution<double> dist(shape, 1.0);
  return dist(rng) / rate;
}

double draw_log_gamma(Rng& rng, double shape) {
  if (!(shape > 0.0)) throw std::domain_error("draw_log_gamma: shape must be > 0");
  if (shape >= 1.0) {
    boost::random::gamma_distribution<double> dist(shape, 1.0);
    return std::log(dist(rng));
  }
  // Gamma(a) = Gamma(a + 1) * U^(1/a)
  boost::random::gamma_distribution<double> dist(shape + 1.0, 1.0);
  return std::log(dist(rng)) + std::log(draw_uniform(rng)) / shape;
}

double draw_inv_gamma(Rng& rng, double shape, double rate) {
  if (!(shape > 0.0) || !(rate > 0.0)) {
    throw std::domain_error("draw_inv_gamma: shape and rate must be > 0");
  }
  return 1.0 / draw_gamma(rng, shape, rate);
}

double draw_beta(Rng& rng, double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) throw std::domain_error("draw_beta: a and b must be > 0");
  const double lx = draw_log_gamma(rng, a);
  const double ly = draw_log_gamma(rng, b);
  return std::exp(lx - log_add_exp(lx, ly));
}

double draw_half_cauchy(Rng& rng, double scale) {
  if (!(scale > 0.0)) throw std::domain_error("draw_half_cauchy: scale must be > 0");
  return scale * std::tan(0.5 * std::numbers::pi * draw_uniform(rng));
}

std::vector<double> draw_dirichlet(Rng& rng, std::span<const double> alpha) {
  if (alpha.empty()) throw std::domain_error("draw_dirichlet: empty parameter vector");
  std::vector<double> out(alpha.size());
  double total = -std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < alpha.size(); ++r) {
    if (!(alpha[r] > 0.0) || !std::isfinite(alpha[r])) {
      throw std::domain_error("draw_dirichlet: every concentration must be finite and > 0");
    }
    out[r] = draw_log_gamma(rng, alpha[r]);
    total = log_add_exp(total, out[r]);
  }
  double sum = 0.0;
  for (auto& v : out) {
    v = std::max(std::exp(v - total), std::numeric_limits<double>::min());
    sum += v;
  }
  for (auto& v : out) v /= sum;
  return out;
}

std::size_t draw_multinomial_index(Rng& rng, std::span<const double> theta) {
  if (theta.empty()) throw std::domain_error("draw_multinomial_index: empty probability vector");
  double total = 0.0;
  for (double t : theta) {
    if (!(t >= 0.0)) throw std::domain_error("draw_multinomial_index: negative probability");
    total += t;
  }
  if (!(total > 0.0)) throw std::domain_error("draw_multinomial_index: probabilities sum to 0");
  const double u = draw_uniform(rng) * total;
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t r = 0; r < theta.size(); ++r) {
    if (theta[r] <= 0.0) continue;
    acc += theta[r];
    last_positive = r;
    if (u < acc) return r;
  }
  return last_positive;
}

}  // namespace vcshrink
