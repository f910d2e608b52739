#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fixtures.hpp"
#include "vcshrink/summary.hpp"

using namespace vcshrink;
namespace st = vcshrink::testing;

namespace {

// beta[d][j][g]; every other trace gets a simple deterministic value.
ChainOutput make_chain(const std::vector<std::vector<std::vector<double>>>& beta, std::size_t r = 2) {
  ChainOutput c;
  c.p = beta.front().size() - 1;
  c.r = r;
  c.grid_size = beta.front().front().size();
  const std::size_t ens = c.p + 1;
  for (std::size_t d = 0; d < beta.size(); ++d) {
    c.sigma2.push_back(1.0 + static_cast<double>(d));
    c.tau.push_back(0.5);
    c.c2.push_back(4.0);
    for (std::size_t j = 0; j < ens; ++j) {
      c.lambda.push_back(static_cast<double>(j + d));
      c.eta.push_back(2.0);
      c.leaf_count.push_back(1.0);
      for (std::size_t k = 0; k < r; ++k) c.theta.push_back(1.0 / static_cast<double>(r));
      for (double v : beta[d][j]) c.beta.push_back(v);
    }
  }
  return c;
}

// Sort-based order statistic oracle with the documented interpolation.
double oracle_quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * q;
  const double fl = std::floor(h);
  const auto k = static_cast<std::size_t>(fl);
  if (k + 1 >= v.size()) return v.back();
  return v[k] + (h - fl) * (v[k + 1] - v[k]);
}

}  // namespace

TEST_CASE("quantile of 1..100") {
  std::vector<double> v(100);
  std::iota(v.begin(), v.end(), 1.0);
  CHECK(quantile(v, 0.025) == doctest::Approx(3.475).epsilon(1e-14));
  CHECK(quantile(v, 0.975) == doctest::Approx(97.525).epsilon(1e-14));
  CHECK(quantile(v, 0.5) == 50.5);
  CHECK(quantile(v, 0.0) == 1.0);
  CHECK(quantile(v, 1.0) == 100.0);
  Rng rng = RngStream(201, 0).engine();
  for (int k = 0; k < 50; ++k) {
    std::vector<double> w(1 + static_cast<std::size_t>(draw_uniform(rng) * 40));
    for (auto& x : w) x = draw_std_normal(rng);
    const double q = draw_uniform(rng);
    CHECK(quantile(w, q) == oracle_quantile(w, q));
  }
}

TEST_CASE("summarize a single draw") {
  const auto c = make_chain({{{1.5, -2.0}, {0.25, 3.0}}});
  const std::vector<ChainOutput> chains{c};
  const auto rep = summarize(chains);
  CHECK(rep.draws == 1);
  CHECK(rep.mean(0, 0) == 1.5);
  CHECK(rep.lower(0, 1) == -2.0);
  CHECK(rep.upper(0, 1) == -2.0);
  CHECK(rep.mean(1, 1) == 3.0);
  CHECK(rep.lambda_median[1] == 1.0);
}

TEST_CASE("summarize quantiles over 1..100") {
  std::vector<std::vector<std::vector<double>>> beta;
  for (int d = 1; d <= 100; ++d) beta.push_back({{static_cast<double>(101 - d)}});
  const std::vector<ChainOutput> chains{make_chain(beta)};
  const auto rep = summarize(chains);
  CHECK(rep.mean(0, 0) == doctest::Approx(50.5));
  CHECK(rep.lower(0, 0) == doctest::Approx(3.475).epsilon(1e-14));
  CHECK(rep.upper(0, 0) == doctest::Approx(97.525).epsilon(1e-14));
  CHECK(rep.lambda_median[0] == doctest::Approx(49.5));
}

TEST_CASE("pooling") {
  Rng rng = RngStream(202, 0).engine();
  auto random_beta = [&](std::size_t draws) {
    std::vector<std::vector<std::vector<double>>> b(draws, std::vector<std::vector<double>>(3, std::vector<double>(4)));
    for (auto& d : b)
      for (auto& j : d)
        for (auto& g : j) g = draw_std_normal(rng);
    return b;
  };
  const auto a = make_chain(random_beta(30));
  const auto b = make_chain(random_beta(17));

  SUBCASE("two identical chains give the same means and medians") {
    // Interval endpoints move: duplicating draws shifts the interpolation
    // position h = (n - 1) q between order statistics.
    const std::vector<ChainOutput> one{a};
    const std::vector<ChainOutput> two{a, a};
    const auto r1 = summarize(one);
    const auto r2 = summarize(two);
    for (std::size_t i = 0; i < r1.beta_mean.size(); ++i) {
      CHECK(r2.beta_mean[i] == doctest::Approx(r1.beta_mean[i]).epsilon(1e-14));
    }
    CHECK(r2.lambda_median == r1.lambda_median);
  }
  SUBCASE("order of chains does not matter and equals concatenation") {
    const std::vector<ChainOutput> ab{a, b};
    const std::vector<ChainOutput> ba{b, a};
    const auto rab = summarize(ab);
    const auto rba = summarize(ba);
    for (std::size_t i = 0; i < rab.beta_mean.size(); ++i) {
      CHECK(rab.beta_mean[i] == doctest::Approx(rba.beta_mean[i]).epsilon(1e-13));
      CHECK(rab.beta_lower[i] == rba.beta_lower[i]);
      CHECK(rab.beta_upper[i] == rba.beta_upper[i]);
    }
    for (std::size_t j = 0; j < 3; ++j) {
      for (std::size_t g = 0; g < 4; ++g) {
        std::vector<double> all;
        for (const auto* c : {&a, &b})
          for (std::size_t d = 0; d < c->draws(); ++d) all.push_back(c->beta_at(d, j, g));
        CHECK(rab.lower(j, g) == doctest::Approx(oracle_quantile(all, 0.025)).epsilon(1e-14));
        CHECK(rab.upper(j, g) == doctest::Approx(oracle_quantile(all, 0.975)).epsilon(1e-14));
        CHECK(rab.mean(j, g) == doctest::Approx(st::mean(all)).epsilon(1e-13));
      }
    }
  }
  SUBCASE("nested levels give nested intervals") {
    const std::vector<ChainOutput> ab{a, b};
    const auto r95 = summarize(ab, 0.95);
    const auto r90 = summarize(ab, 0.90);
    for (std::size_t i = 0; i < r95.beta_mean.size(); ++i) {
      CHECK(r95.beta_lower[i] <= r90.beta_lower[i]);
      CHECK(r90.beta_upper[i] <= r95.beta_upper[i]);
      CHECK(r90.beta_lower[i] <= r90.beta_upper[i]);
    }
  }
  SUBCASE("mismatched shapes") {
    auto c = make_chain({{{1.0}}});
    const std::vector<ChainOutput> bad{a, c};
    CHECK_THROWS_AS(summarize(bad), std::invalid_argument);
    CHECK_THROWS_AS(summarize(std::vector<ChainOutput>{}), std::invalid_argument);
  }
}

TEST_CASE("coverage_and_mse") {
  const std::vector<ChainOutput> chains{make_chain({{{1.0, 2.0}, {3.0, 4.0}}, {{1.0, 4.0}, {5.0, 4.0}}})};
  const auto rep = summarize(chains);
  SUBCASE("truth at the posterior mean") {
    Eigen::MatrixXd truth(2, 2);
    truth << 1.0, 4.0, 3.0, 4.0;
    const auto m = coverage_and_mse(rep, truth);
    CHECK(m.mse[0] == 0.0);
    CHECK(m.mse[1] == 0.0);
    CHECK(m.mean_mse == 0.0);
  }
  SUBCASE("huge intervals cover everything") {
    auto wide = rep;
    std::fill(wide.beta_lower.begin(), wide.beta_lower.end(), -1e300);
    std::fill(wide.beta_upper.begin(), wide.beta_upper.end(), 1e300);
    Eigen::MatrixXd truth = Eigen::MatrixXd::Constant(2, 2, 1e6);
    const auto m = coverage_and_mse(wide, truth);
    CHECK(m.mean_coverage == 1.0);
  }
  SUBCASE("random case against a direct loop") {
    Rng rng = RngStream(203, 0).engine();
    std::vector<std::vector<std::vector<double>>> beta(25, std::vector<std::vector<double>>(3, std::vector<double>(6)));
    for (auto& d : beta)
      for (auto& j : d)
        for (auto& g : j) g = draw_std_normal(rng);
    const std::vector<ChainOutput> cs{make_chain(beta)};
    const auto r = summarize(cs);
    Eigen::MatrixXd truth(6, 3);
    for (Eigen::Index g = 0; g < 6; ++g)
      for (Eigen::Index j = 0; j < 3; ++j) truth(g, j) = 1.5 * draw_std_normal(rng);
    const auto m = coverage_and_mse(r, truth);
    double all_cov = 0.0;
    for (std::size_t j = 0; j < 3; ++j) {
      double mse = 0.0;
      double cov = 0.0;
      for (std::size_t g = 0; g < 6; ++g) {
        const double t = truth(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(j));
        mse += std::pow(r.mean(j, g) - t, 2) / 6.0;
        cov += (r.lower(j, g) <= t && t <= r.upper(j, g)) ? 1.0 / 6.0 : 0.0;
      }
      CHECK(m.mse[j] == doctest::Approx(mse).epsilon(1e-13));
      CHECK(m.coverage[j] == doctest::Approx(cov).epsilon(1e-13));
      CHECK(m.coverage[j] >= 0.0);
      CHECK(m.coverage[j] <= 1.0);
      all_cov += cov / 3.0;
    }
    CHECK(m.mean_coverage == doctest::Approx(all_cov).epsilon(1e-13));
  }
}

TEST_CASE("lambda_screen") {
  SUBCASE("clear elbow") {
    const std::vector<double> med{9.0, 3.5, 3.7, 1.7, 1.6, 1.2, 0.9};
    CHECK(lambda_screen(med) == std::vector<std::size_t>{1, 2});
  }
  SUBCASE("all equal selects nothing") {
    const std::vector<double> med(8, 2.0);
    CHECK(lambda_screen(med).empty());
  }
  SUBCASE("p = 0") { CHECK(lambda_screen(std::vector<double>{1.0}).empty()); }
  SUBCASE("agrees with an exhaustive gap scan") {
    Rng rng = RngStream(204, 0).engine();
    for (int t = 0; t < 200; ++t) {
      const std::size_t p = 2 + static_cast<std::size_t>(draw_uniform(rng) * 10);
      std::vector<double> med(p + 1);
      for (auto& m : med) m = std::exp(1.5 * draw_std_normal(rng));
      // Select S when every member beats every non-member and the ratio
      // min(S)/max(rest) is the largest over all such splits.
      double best = 0.0;
      std::vector<std::size_t> expect;
      for (std::size_t a = 1; a <= p; ++a) {
        std::vector<std::size_t> s;
        for (std::size_t j = 1; j <= p; ++j)
          if (med[j] >= med[a]) s.push_back(j);
        if (s.size() == p) continue;
        double rest = 0.0;
        for (std::size_t j = 1; j <= p; ++j)
          if (med[j] < med[a]) rest = std::max(rest, med[j]);
        const double ratio = med[a] / rest;
        if (ratio > best) {
          best = ratio;
          expect = s;
        }
      }
      if (!(best > 1.5)) expect.clear();
      CHECK(lambda_screen(med) == expect);
    }
  }
  SUBCASE("threshold mode is scale-equivariant") {
    Rng rng = RngStream(205, 0).engine();
    std::vector<double> med(12);
    for (auto& m : med) m = std::exp(draw_std_normal(rng));
    ScreenRule rule;
    rule.mode = ScreenRule::Mode::threshold;
    rule.threshold = 1.1;
    const auto base = lambda_screen(med, rule);
    for (double k : {0.01, 3.0, 1e4}) {
      auto scaled = med;
      for (auto& m : scaled) m *= k;
      ScreenRule r2 = rule;
      r2.threshold *= k;
      CHECK(lambda_screen(scaled, r2) == base);
    }
  }
}

TEST_CASE("modifier_report") {
  SUBCASE("theta fixed at the first axis") {
    auto c = make_chain({{{0.0}, {0.0}}, {{0.0}, {0.0}}}, 3);
    for (std::size_t i = 0; i < c.theta.size(); ++i) c.theta[i] = (i % 3 == 0) ? 1.0 : 0.0;
    const std::vector<ChainOutput> cs{c};
    const auto rep = modifier_report(cs, 1);
    CHECK(rep[0].axis == 0);
    CHECK(rep[0].mean == 1.0);
    CHECK(rep[0].cumulative == 1.0);
    CHECK(rep[0].in_core);
    CHECK_FALSE(rep[1].in_core);
  }
  SUBCASE("uniform theta over four axes") {
    const std::vector<ChainOutput> cs{make_chain({{{0.0}, {0.0}}}, 4)};
    const auto rep = modifier_report(cs, 0);
    REQUIRE(rep.size() == 4);
    for (const auto& m : rep) CHECK(m.mean == doctest::Approx(0.25));
    CHECK(rep[3].cumulative == doctest::Approx(1.0));
  }
  SUBCASE("means match direct averaging") {
    Rng rng = RngStream(206, 0).engine();
    auto a = make_chain(std::vector<std::vector<std::vector<double>>>(13, {{0.0}, {0.0}}), 5);
    auto b = make_chain(std::vector<std::vector<std::vector<double>>>(7, {{0.0}, {0.0}}), 5);
    for (auto* c : {&a, &b}) {
      for (std::size_t d = 0; d < c->draws(); ++d) {
        for (std::size_t j = 0; j < 2; ++j) {
          std::vector<double> alpha(5, 0.7);
          const auto th = draw_dirichlet(rng, alpha);
          for (std::size_t k = 0; k < 5; ++k) c->theta[(d * 2 + j) * 5 + k] = th[k];
        }
      }
    }
    const std::vector<ChainOutput> cs{a, b};
    const auto rep = modifier_report(cs, 1, 0.9);
    double prev = 2.0;
    double cum = 0.0;
    bool reached = false;
    for (const auto& m : rep) {
      double direct = 0.0;
      for (const auto* c : {&a, &b})
        for (std::size_t d = 0; d < c->draws(); ++d) direct += c->theta_at(d, 1, m.axis) / 20.0;
      CHECK(m.mean == doctest::Approx(direct).epsilon(1e-13));
      CHECK(m.mean <= prev);
      prev = m.mean;
      cum += m.mean;
      CHECK(m.cumulative == doctest::Approx(cum).epsilon(1e-13));
      CHECK(m.in_core == !reached);
      if (cum >= 0.9) reached = true;
    }
  }
}
