#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace vcshrink {

/// Engine used everywhere. The Mersenne Twister output sequence is fixed by
/// the standard, so draws are reproducible across compilers and platforms as
/// long as the distributions on top of it are too (they are: see below).
using Rng = std::mt19937_64;

/// Seed plus stream id identifying one chain's randomness. Engines for a
/// particular (sweep, block) pair are derived by hashing, so a chain's draws
/// do not depend on how many chains share a thread pool.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  Rng engine() const;
  Rng substream(std::uint64_t sweep, std::uint64_t block) const;

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
};

// Uniform on the open interval (0, 1), built from the top 53 bits.
inline double draw_uniform(Rng& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

double draw_std_normal(Rng& rng);
double draw_normal(Rng& rng, double mean, double var);
/// Gamma with shape/rate parameterization.
double draw_gamma(Rng& rng, double shape, double rate);
/// log of a Gamma(shape, 1) draw; stays finite for tiny shapes where the
/// draw itself underflows.
double draw_log_gamma(Rng& rng, double shape);
double draw_inv_gamma(Rng& rng, double shape, double rate);
double draw_beta(Rng& rng, double a, double b);
double draw_half_cauchy(Rng& rng, double scale);
/// Dirichlet via normalized Gamma draws (computed in log space). Every entry
/// is clamped to at least the smallest normal double.
std::vector<double> draw_dirichlet(Rng& rng, std::span<const double> alpha);
std::size_t draw_multinomial_index(Rng& rng, std::span<const double> theta);

struct SliceConfig {
  double width = 1.0;
  // Neal's bounded stepping-out: at most this many width-steps in total.
  int max_step_out = 32;
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
  int max_shrink = 1000;
};

class SliceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One stepping-out / shrinkage slice-sampling transition from x0. Points
/// outside [lower, upper] have log density -inf.
template <class LogTarget>
double slice_sample(LogTarget&& log_target, double x0, const SliceConfig& cfg, Rng& rng) {
  if (!(cfg.width > 0.0) || cfg.max_step_out < 0) {
    throw std::invalid_argument("slice_sample: width must be > 0 and max_step_out >= 0");
  }
  auto target = [&](double x) {
    if (x < cfg.lower || x > cfg.upper) return -std::numeric_limits<double>::infinity();
    return static_cast<double>(log_target(x));
  };
  const double f0 = target(x0);
  if (std::isnan(f0) || f0 == -std::numeric_limits<double>::infinity()) {
    throw SliceError("slice_sample: log target is not finite at the current point");
  }
  const double level = f0 + std::log(draw_uniform(rng));

  double left = x0 - cfg.width * draw_uniform(rng);
  double right = left + cfg.width;
  const int steps_left = static_cast<int>(std::floor(cfg.max_step_out * draw_uniform(rng)));
  int steps_right = cfg.max_step_out - 1 - steps_left;
  for (int k = steps_left; k > 0 && target(left) > level; --k) left -= cfg.width;
  for (; steps_right > 0 && target(right) > level; --steps_right) right += cfg.width;

  for (int attempt = 0; attempt < cfg.max_shrink; ++attempt) {
    const double x1 = left + (right - left) * draw_uniform(rng);
    const double f1 = target(x1);
    if (f1 > level) return x1;
    if (x1 < x0) {
      left = x1;
    } else {
      right = x1;
    }
  }
  throw SliceError("slice_sample: shrinkage did not find a point on the slice");
}

}  // namespace vcshrink
