#include "vcshrink/gibbs.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <numbers>
#include <string>
#include <thread>

#include <boost/math/special_functions/gamma.hpp>

#include "vcshrink/errors.hpp"

namespace vcshrink {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
const double kLog2Pi = std::log(2.0 * std::numbers::pi);

double log1p_exp(double a) { return a > 35.0 ? a : std::log1p(std::exp(a)); }

// log half-Cauchy(scale) density at exp(x), plus the log-Jacobian x.
double log_half_cauchy_on_log_scale(double x, double scale) {
  const double log_scale = std::log(scale);
  return std::log(2.0 / std::numbers::pi) - log_scale - log1p_exp(2.0 * (x - log_scale)) + x;
}

// log IG(shape, rate) density at exp(x), plus the log-Jacobian x.
double log_inv_gamma_on_log_scale(double x, double shape, double rate) {
  return shape * std::log(rate) - boost::math::lgamma(shape) - shape * x - rate * std::exp(-x);
}

}  // namespace

double leaf_log_marginal(const SufficientStats& stats, double s2_leaf, double sigma2) {
  if (stats.n == 0) return 0.0;
  const double n = static_cast<double>(stats.n);
  double out = -0.5 * n * (kLog2Pi + std::log(sigma2)) - stats.rss / (2.0 * sigma2);
  if (s2_leaf > 0.0) {
    out += -0.5 * std::log1p(s2_leaf * stats.a / sigma2) +
           stats.b * stats.b / (2.0 * sigma2 * (sigma2 / s2_leaf + stats.a));
  }
  return out;
}

void SamplerOptions::validate() const {
  if (!(eta_step >= 0.0)) throw ConfigError("eta_step must be >= 0");
  if (!(slice.width > 0.0) || slice.max_step_out < 0) throw ConfigError("slice width must be > 0");
  if (fixed_s2 && !(*fixed_s2 >= 0.0)) throw ConfigError("fixed_s2 must be >= 0");
  if (coherence_interval < 0) throw ConfigError("coherence_interval must be >= 0");
}

double MoveCounters::tree_acceptance() const {
  const auto proposed = grow_proposed + prune_proposed;
  return proposed == 0 ? 0.0 : static_cast<double>(grow_accepted + prune_accepted) / static_cast<double>(proposed);
}

double MoveCounters::eta_acceptance() const {
  return eta_proposed == 0 ? 0.0 : static_cast<double>(eta_accepted) / static_cast<double>(eta_proposed);
}

// ---------------------------------------------------------------------------

GibbsSampler::GibbsSampler(Dataset data, Hyperparameters hyper, SamplerOptions options)
    : data_(std::move(data)), hyper_(std::move(hyper)), options_(options) {
  data_.validate();
  if (!hyper_.noise_scale || !hyper_.tau0) {
    throw ConfigError("sampler hyperparameters must be resolved (noise_scale and tau0 set)");
  }
  hyper_.validate(data_.p());
  options_.validate();
  const std::size_t n = data_.n();
  basis_.assign(data_.p() + 1, std::vector<double>(n, 1.0));
  for (std::size_t j = 1; j <= data_.p(); ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      basis_[j][i] = data_.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j - 1));
    }
  }
  scratch_residual_.resize(n);
  scratch_old_.resize(n);
  initialize();
}

void GibbsSampler::initialize() {
  const std::size_t ens = data_.p() + 1;
  const std::size_t r = data_.r();
  state_ = ChainState{};
  state_.ensembles.resize(ens);
  for (std::size_t j = 0; j < ens; ++j) {
    const int m = hyper_.trees_for(j);
    auto& e = state_.ensembles[j];
    e.trees.assign(static_cast<std::size_t>(m), DecisionTree(0.0));
    e.leaves.assign(static_cast<std::size_t>(m), LeafAssignment(e.trees.front(), data_.z));
  }
  state_.split.theta.assign(ens, std::vector<double>(r, 1.0 / static_cast<double>(r)));
  state_.split.eta.assign(ens, static_cast<double>(r));
  state_.shrinkage.lambda.assign(ens, 1.0);
  state_.shrinkage.tau = *hyper_.tau0;
  state_.shrinkage.c2 = hyper_.s_c * hyper_.s_c;
  const double sd = sample_sd(data_.y);
  state_.shrinkage.sigma2 = sd > 0.0 ? sd * sd : 1.0;
  state_.fit.assign(data_.n(), 0.0);
  state_.sweep = 0;
  counters_ = MoveCounters{};
}

void GibbsSampler::initialize_from_prior(Rng& rng) {
  const std::size_t ens = data_.p() + 1;
  const std::size_t r = data_.r();
  auto& sh = state_.shrinkage;
  for (std::size_t j = 0; j < ens; ++j) {
    const double eta = draw_eta_prior(rng, r, hyper_.eta_a, hyper_.eta_b);
    state_.split.eta[j] = eta;
    std::vector<double> alpha(r, eta / static_cast<double>(r));
    state_.split.theta[j] = draw_dirichlet(rng, alpha);
  }
  for (std::size_t j = 0; j < ens; ++j) sh.lambda[j] = std::max(draw_half_cauchy(rng, 1.0), 1e-12);
  sh.tau = std::max(draw_half_cauchy(rng, *hyper_.tau0), 1e-12);
  sh.c2 = draw_inv_gamma(rng, hyper_.nu_c / 2.0, hyper_.nu_c * hyper_.s_c * hyper_.s_c / 2.0);
  sh.sigma2 = draw_inv_gamma(rng, hyper_.nu / 2.0, hyper_.nu * *hyper_.noise_scale / 2.0);
  for (std::size_t j = 0; j < ens; ++j) {
    auto& e = state_.ensembles[j];
    const double v = leaf_variance(j);
    for (std::size_t m = 0; m < e.trees.size(); ++m) {
      e.trees[m] = draw_tree_prior(hyper_.tree_prior, state_.split.theta[j], rng);
      for (auto leaf : e.trees[m].leaves()) e.trees[m].set_jump(leaf, draw_normal(rng, 0.0, v));
      e.leaves[m] = LeafAssignment(e.trees[m], data_.z);
    }
  }
  refresh_fit();
}

double GibbsSampler::leaf_variance(std::size_t j) const {
  const double s2 = options_.fixed_s2 ? *options_.fixed_s2 : state_.shrinkage.s2(j);
  return s2 / static_cast<double>(hyper_.trees_for(j));
}

void GibbsSampler::set_response(std::vector<double> y) {
  if (y.size() != data_.n()) throw DataError("set_response: length mismatch");
  data_.y = std::move(y);
}

std::vector<double> GibbsSampler::simulate_response(Rng& rng) const {
  std::vector<double> y(data_.n());
  const double sd = std::sqrt(state_.shrinkage.sigma2);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = state_.fit[i] + sd * draw_std_normal(rng);
  return y;
}

std::vector<double> GibbsSampler::partial_residuals(std::size_t j, std::size_t m) const {
  const auto& tree = state_.ensembles[j].trees[m];
  const auto& assign = state_.ensembles[j].leaves[m];
  std::vector<double> out(data_.n());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = data_.y[i] - state_.fit[i] + basis_[j][i] * tree.jump(assign.leaf_of(i));
  }
  return out;
}

SufficientStats GibbsSampler::leaf_stats(std::size_t j, std::size_t m, DecisionTree::NodeId leaf,
                                         std::span<const double> residuals) const {
  SufficientStats s;
  const auto& xj = basis_[j];
  for (std::uint32_t i : state_.ensembles[j].leaves[m].observations(leaf)) s.add(xj[i], residuals[i]);
  return s;
}

double GibbsSampler::tree_log_marginal(std::size_t j, std::size_t m, std::span<const double> residuals) const {
  const double v = leaf_variance(j);
  const double sigma2 = state_.shrinkage.sigma2;
  double total = 0.0;
  for (auto leaf : state_.ensembles[j].trees[m].leaves()) {
    total += leaf_log_marginal(leaf_stats(j, m, leaf, residuals), v, sigma2);
  }
  return total;
}

bool GibbsSampler::accept(double log_alpha, Rng& rng) {
  if (log_alpha >= 0.0) return true;
  return std::log(draw_uniform(rng)) < log_alpha;
}

bool GibbsSampler::mh_tree_update(std::size_t j, std::size_t m, Rng& rng) {
  const auto residuals = partial_residuals(j, m);
  return mh_step(j, m, residuals, rng);
}

bool GibbsSampler::mh_step(std::size_t j, std::size_t m, std::span<const double> residuals, Rng& rng) {
  auto& tree = state_.ensembles[j].trees[m];
  auto& assign = state_.ensembles[j].leaves[m];
  const double v = leaf_variance(j);
  const double sigma2 = state_.shrinkage.sigma2;
  const auto& xj = basis_[j];

  const bool grow = tree.is_stump() || draw_uniform(rng) < kGrowProbability;
  if (grow) {
    ++counters_.grow_proposed;
    const GrowMove move =
        propose_grow(tree, state_.split.theta[j], rng, hyper_.cutpoints, assign, data_.z);
    if (!move.valid) {
      ++counters_.invalid_proposals;
      return false;
    }
    const double log_prior = grow_log_prior_ratio(tree.node(move.leaf).depth, hyper_.tree_prior);
    if (log_prior == kNegInf) return false;
    SufficientStats parent, left, right;
    const auto axis = static_cast<Eigen::Index>(move.rule.axis);
    for (std::uint32_t i : assign.observations(move.leaf)) {
      parent.add(xj[i], residuals[i]);
      if (move.rule.goes_left(data_.z(static_cast<Eigen::Index>(i), axis))) {
        left.add(xj[i], residuals[i]);
      } else {
        right.add(xj[i], residuals[i]);
      }
    }
    const double log_lik = leaf_log_marginal(left, v, sigma2) + leaf_log_marginal(right, v, sigma2) -
                           leaf_log_marginal(parent, v, sigma2);
    const double log_alpha = log_prior + move.log_hastings + log_lik;
    if (std::isnan(log_alpha)) {
      ++counters_.nonfinite;
      return false;
    }
    if (!accept(log_alpha, rng)) return false;
    tree.grow(move.leaf, move.rule);
    assign.apply_grow(tree, move.leaf, data_.z);
    ++counters_.grow_accepted;
    return true;
  }

  ++counters_.prune_proposed;
  const PruneMove move = propose_prune(tree, rng);
  const auto& node = tree.node(move.node);
  const auto left_id = node.left;
  const auto right_id = node.right;
  const double log_prior = -grow_log_prior_ratio(node.depth, hyper_.tree_prior);
  SufficientStats merged, left, right;
  for (std::uint32_t i : assign.observations(left_id)) {
    left.add(xj[i], residuals[i]);
    merged.add(xj[i], residuals[i]);
  }
  for (std::uint32_t i : assign.observations(right_id)) {
    right.add(xj[i], residuals[i]);
    merged.add(xj[i], residuals[i]);
  }
  const double log_lik = leaf_log_marginal(merged, v, sigma2) - leaf_log_marginal(left, v, sigma2) -
                         leaf_log_marginal(right, v, sigma2);
  const double log_alpha = log_prior + move.log_hastings + log_lik;
  if (std::isnan(log_alpha)) {
    ++counters_.nonfinite;
    return false;
  }
  if (!accept(log_alpha, rng)) return false;
  tree.prune(move.node);
  assign.apply_prune(move.node, left_id, right_id);
  ++counters_.prune_accepted;
  return true;
}

void GibbsSampler::redraw_leaves(std::size_t j, std::size_t m, Rng& rng) {
  compute_partial(j, m);
  leaf_step(j, m, scratch_residual_, scratch_old_, rng);
}

void GibbsSampler::compute_partial(std::size_t j, std::size_t m) {
  const auto& tree = state_.ensembles[j].trees[m];
  const auto& assign = state_.ensembles[j].leaves[m];
  const auto& xj = basis_[j];
  const auto& y = data_.y;
  const auto& fit = state_.fit;
  for (std::size_t i = 0; i < scratch_residual_.size(); ++i) {
    const double old = xj[i] * tree.jump(assign.leaf_of(i));
    scratch_old_[i] = old;
    scratch_residual_[i] = y[i] - fit[i] + old;
  }
}

void GibbsSampler::leaf_step(std::size_t j, std::size_t m, std::span<const double> residuals,
                             std::span<const double> old_contribution, Rng& rng) {
  auto& tree = state_.ensembles[j].trees[m];
  const auto& assign = state_.ensembles[j].leaves[m];
  const double v = leaf_variance(j);
  const double sigma2 = state_.shrinkage.sigma2;
  for (auto leaf : tree.leaves()) {
    const SufficientStats s = leaf_stats(j, m, leaf, residuals);
    double mu = 0.0;
    if (v > 0.0) {
      const double post_var = 1.0 / (s.a / sigma2 + 1.0 / v);
      mu = draw_normal(rng, post_var * s.b / sigma2, post_var);
    }
    tree.set_jump(leaf, mu);
  }
  const auto& xj = basis_[j];
  auto& fit = state_.fit;
  for (std::size_t i = 0; i < fit.size(); ++i) {
    fit[i] += xj[i] * tree.jump(assign.leaf_of(i)) - old_contribution[i];
  }
}

void GibbsSampler::update_tree(std::size_t j, std::size_t m, Rng& rng) {
  compute_partial(j, m);
  mh_step(j, m, scratch_residual_, rng);
  leaf_step(j, m, scratch_residual_, scratch_old_, rng);
}

void GibbsSampler::update_theta(std::size_t j, Rng& rng) {
  const std::size_t r = data_.r();
  const auto counts = split_counts(state_.ensembles[j].trees, r);
  const double base = state_.split.eta[j] / static_cast<double>(r);
  std::vector<double> alpha(r);
  for (std::size_t k = 0; k < r; ++k) alpha[k] = base + static_cast<double>(counts[k]);
  state_.split.theta[j] = draw_dirichlet(rng, alpha);
}

bool GibbsSampler::update_eta(std::size_t j, Rng& rng) {
  const std::size_t r = data_.r();
  const double rr = static_cast<double>(r);
  const auto counts = split_counts(state_.ensembles[j].trees, r);
  // x = logit(u), u = eta / (eta + R); log target includes du/dx = u (1 - u).
  auto log_target = [&](double x) {
    const double log_u = -log1p_exp(-x);
    const double log_1mu = -log1p_exp(x);
    const double eta = rr * std::exp(x);  // R u / (1 - u)
    return log_dirichlet_multinomial(counts, eta) + (hyper_.eta_a) * log_u + (hyper_.eta_b) * log_1mu;
  };
  const double eta = state_.split.eta[j];
  const double x0 = std::log(eta / rr);
  const double x1 = x0 + options_.eta_step * draw_std_normal(rng);
  ++counters_.eta_proposed;
  const double log_alpha = log_target(x1) - log_target(x0);
  if (std::isnan(log_alpha)) {
    ++counters_.eta_nonfinite;
    return false;
  }
  if (!accept(log_alpha, rng)) return false;
  const double eta_new = rr * std::exp(x1);
  if (!(eta_new > 0.0) || !std::isfinite(eta_new)) {
    ++counters_.eta_nonfinite;
    return false;
  }
  state_.split.eta[j] = eta_new;
  ++counters_.eta_accepted;
  return true;
}

std::pair<double, std::size_t> GibbsSampler::jump_summary(std::size_t j) const {
  double s = 0.0;
  std::size_t l = 0;
  for (const auto& tree : state_.ensembles[j].trees) {
    for (auto leaf : tree.leaves()) {
      s += tree.jump(leaf) * tree.jump(leaf);
      ++l;
    }
  }
  return {s, l};
}

double GibbsSampler::ensemble_leaf_term(std::size_t j, double log_v) const {
  const auto [s, l] = jump_summary(j);
  const double quad = s > 0.0 ? s * std::exp(-log_v) : 0.0;
  return -0.5 * (quad + static_cast<double>(l) * log_v);
}

double GibbsSampler::scale_log_likelihood(double log_tau, std::span<const double> log_lambda,
                                          double log_c2) const {
  double total = 0.0;
  for (std::size_t j = 0; j < state_.ensembles.size(); ++j) {
    const double log_v = log_rhs_variance(log_tau, log_lambda[j], log_c2) -
                         std::log(static_cast<double>(hyper_.trees_for(j)));
    total += ensemble_leaf_term(j, log_v);
  }
  return total;
}

void GibbsSampler::update_lambda(Rng& rng) {
  auto& sh = state_.shrinkage;
  const double log_tau = std::log(sh.tau);
  const double log_c2 = std::log(sh.c2);
  for (std::size_t j = 0; j < state_.ensembles.size(); ++j) {
    const auto [s, l] = jump_summary(j);
    const double log_m = std::log(static_cast<double>(hyper_.trees_for(j)));
    auto target = [&, s = s, l = l](double x) {
      const double log_v = log_rhs_variance(log_tau, x, log_c2) - log_m;
      const double quad = s > 0.0 ? s * std::exp(-log_v) : 0.0;
      return -0.5 * (quad + static_cast<double>(l) * log_v) + log_half_cauchy_on_log_scale(x, 1.0);
    };
    const double x = slice_sample(target, std::log(std::max(sh.lambda[j], 1e-12)), options_.slice, rng);
    sh.lambda[j] = std::exp(x);
  }
}

void GibbsSampler::update_tau(Rng& rng) {
  auto& sh = state_.shrinkage;
  const double log_c2 = std::log(sh.c2);
  const std::size_t ens = state_.ensembles.size();
  std::vector<double> log_lambda(ens), s(ens), l(ens), log_m(ens);
  for (std::size_t j = 0; j < ens; ++j) {
    log_lambda[j] = std::log(sh.lambda[j]);
    const auto [sj, lj] = jump_summary(j);
    s[j] = sj;
    l[j] = static_cast<double>(lj);
    log_m[j] = std::log(static_cast<double>(hyper_.trees_for(j)));
  }
  const double tau0 = *hyper_.tau0;
  auto target = [&](double x) {
    double total = log_half_cauchy_on_log_scale(x, tau0);
    for (std::size_t j = 0; j < ens; ++j) {
      const double log_v = log_rhs_variance(x, log_lambda[j], log_c2) - log_m[j];
      const double quad = s[j] > 0.0 ? s[j] * std::exp(-log_v) : 0.0;
      total += -0.5 * (quad + l[j] * log_v);
    }
    return total;
  };
  sh.tau = std::exp(slice_sample(target, std::log(std::max(sh.tau, 1e-12)), options_.slice, rng));
}

void GibbsSampler::update_lambda_tau(Rng& lambda_rng, Rng& tau_rng) {
  update_lambda(lambda_rng);
  update_tau(tau_rng);
}

void GibbsSampler::update_c2(Rng& rng) {
  auto& sh = state_.shrinkage;
  const std::size_t ens = state_.ensembles.size();
  const double prior_shape = hyper_.nu_c / 2.0;
  const double prior_rate = hyper_.nu_c * hyper_.s_c * hyper_.s_c / 2.0;
  if (options_.c2_update == C2Update::conjugate) {
    double shape = prior_shape;
    double rate = prior_rate;
    const double tau2 = sh.tau * sh.tau;
    for (std::size_t j = 0; j < ens; ++j) {
      const auto [s, l] = jump_summary(j);
      shape += 0.5 * static_cast<double>(l);
      rate += 0.5 * static_cast<double>(hyper_.trees_for(j)) * s / (tau2 * sh.lambda[j] * sh.lambda[j]);
    }
    sh.c2 = draw_inv_gamma(rng, shape, rate);
    return;
  }
  std::vector<double> log_lambda(ens);
  for (std::size_t j = 0; j < ens; ++j) log_lambda[j] = std::log(sh.lambda[j]);
  const double log_tau = std::log(sh.tau);
  auto target = [&](double x) {
    return scale_log_likelihood(log_tau, log_lambda, x) + log_inv_gamma_on_log_scale(x, prior_shape, prior_rate);
  };
  SliceConfig cfg = options_.slice;
  cfg.lower = -std::numeric_limits<double>::infinity();
  sh.c2 = std::exp(slice_sample(target, std::log(sh.c2), cfg, rng));
}

void GibbsSampler::update_sigma2(Rng& rng) {
  double rss = 0.0;
  for (std::size_t i = 0; i < data_.n(); ++i) {
    const double r = data_.y[i] - state_.fit[i];
    rss += r * r;
  }
  const double nu = hyper_.nu;
  const double n = static_cast<double>(data_.n());
  state_.shrinkage.sigma2 = draw_inv_gamma(rng, (nu + n) / 2.0, (nu * *hyper_.noise_scale + rss) / 2.0);
}

void GibbsSampler::sweep(const RngStream& stream) {
  const std::uint64_t s = state_.sweep;
  const std::size_t ens = state_.ensembles.size();
  const auto& blocks = options_.blocks;
  if (blocks.trees) {
    Rng rng = stream.substream(s, static_cast<std::uint64_t>(Block::trees));
    for (std::size_t j = 0; j < ens; ++j) {
      for (std::size_t m = 0; m < state_.ensembles[j].trees.size(); ++m) update_tree(j, m, rng);
    }
  }
  if (blocks.theta) {
    Rng rng = stream.substream(s, static_cast<std::uint64_t>(Block::theta));
    for (std::size_t j = 0; j < ens; ++j) update_theta(j, rng);
  }
  if (blocks.eta) {
    Rng rng = stream.substream(s, static_cast<std::uint64_t>(Block::eta));
    for (std::size_t j = 0; j < ens; ++j) update_eta(j, rng);
  }
  const bool scales_free = !options_.fixed_s2;
  if (scales_free && blocks.lambda) {
    Rng rng = stream.substream(s, static_cast<std::uint64_t>(Block::lambda));
    update_lambda(rng);
  }
  if (scales_free && blocks.tau) {
    Rng rng = stream.substream(s, static_cast<std::uint64_t>(Block::tau));
    update_tau(rng);
  }
  if (scales_free && blocks.c2) {
    Rng rng = stream.substream(s, static_cast<std::uint64_t>(Block::c2));
    update_c2(rng);
  }
  if (blocks.sigma2) {
    Rng rng = stream.substream(s, static_cast<std::uint64_t>(Block::sigma2));
    update_sigma2(rng);
  }
  ++state_.sweep;
  for (double f : state_.fit) {
    if (!std::isfinite(f)) {
      throw NumericalError("non-finite cached fit after sweep " + std::to_string(state_.sweep));
    }
  }
  if (options_.coherence_interval > 0 && state_.sweep % static_cast<std::uint64_t>(options_.coherence_interval) == 0) {
    check_fit_coherence();
  }
}

std::vector<double> GibbsSampler::recompute_fit() const {
  std::vector<double> fit(data_.n(), 0.0);
  for (std::size_t j = 0; j < state_.ensembles.size(); ++j) {
    for (const auto& tree : state_.ensembles[j].trees) {
      for (std::size_t i = 0; i < fit.size(); ++i) {
        fit[i] += basis_[j][i] * tree.jump(tree.find_leaf(data_.z, static_cast<Eigen::Index>(i)));
      }
    }
  }
  return fit;
}

double GibbsSampler::max_fit_discrepancy() const {
  const auto fresh = recompute_fit();
  double worst = 0.0;
  for (std::size_t i = 0; i < fresh.size(); ++i) {
    worst = std::max(worst, std::abs(state_.fit[i] - fresh[i]) / (1.0 + std::abs(fresh[i])));
  }
  return worst;
}

void GibbsSampler::refresh_fit() { state_.fit = recompute_fit(); }

void GibbsSampler::check_fit_coherence() const {
  const double d = max_fit_discrepancy();
  if (!(d < 1e-8)) {
    throw NumericalError("cached fit drifted by " + std::to_string(d) + " at sweep " + std::to_string(state_.sweep));
  }
}

std::vector<double> GibbsSampler::evaluate_coefficient(std::size_t j, const Eigen::MatrixXd& grid) const {
  std::vector<double> out(static_cast<std::size_t>(grid.rows()), 0.0);
  for (const auto& tree : state_.ensembles[j].trees) {
    for (Eigen::Index g = 0; g < grid.rows(); ++g) out[static_cast<std::size_t>(g)] += tree.jump(tree.find_leaf(grid, g));
  }
  return out;
}

// ---------------------------------------------------------------------------

void ChainSchedule::validate() const {
  if (iterations < 1) throw ConfigError("iterations must be >= 1");
  if (burn < 0 || burn >= iterations) throw ConfigError("burn must satisfy 0 <= burn < iterations");
  if (thin < 1) throw ConfigError("thin must be >= 1");
}

int ChainSchedule::kept_draws() const { return (iterations - burn + thin - 1) / thin; }

ChainOutput run_chain(const Dataset& data, const FitOptions& options, const Eigen::MatrixXd& grid,
                      const RngStream& stream) {
  options.schedule.validate();
  if (grid.cols() != static_cast<Eigen::Index>(data.r())) {
    throw DataError("query grid has " + std::to_string(grid.cols()) + " modifier columns, data has " +
                    std::to_string(data.r()));
  }
  Dataset working = data;
  ResponseScale scale;
  if (options.standardize) {
    scale.center = sample_mean(data.y);
    scale.scale = sample_sd(data.y);
    if (!(scale.scale > 0.0)) throw DataError("cannot standardize a constant response");
    for (auto& v : working.y) v = (v - scale.center) / scale.scale;
  }
  Hyperparameters hyper = options.hyper.resolved(working.y, working.p());
  GibbsSampler sampler(std::move(working), hyper, options.sampler);

  ChainOutput out;
  out.seed = stream.seed();
  out.stream = stream.stream();
  out.p = data.p();
  out.r = data.r();
  out.grid_size = static_cast<std::size_t>(grid.rows());
  out.schedule = options.schedule;
  out.response = scale;
  out.hyper = hyper;
  const std::size_t ens = out.p + 1;
  const auto kept = static_cast<std::size_t>(options.schedule.kept_draws());
  out.sigma2.reserve(kept);
  out.tau.reserve(kept);
  out.c2.reserve(kept);
  out.lambda.reserve(kept * ens);
  out.eta.reserve(kept * ens);
  out.theta.reserve(kept * ens * out.r);
  out.beta.reserve(kept * ens * out.grid_size);
  out.leaf_count.reserve(kept * ens);

  const auto start = std::chrono::steady_clock::now();
  for (int it = 0; it < options.schedule.iterations; ++it) {
    sampler.sweep(stream);
    if (it < options.schedule.burn || (it - options.schedule.burn) % options.schedule.thin != 0) continue;
    const auto& st = sampler.state();
    out.sigma2.push_back(st.shrinkage.sigma2 * scale.scale * scale.scale);
    out.tau.push_back(st.shrinkage.tau);
    out.c2.push_back(st.shrinkage.c2);
    for (std::size_t j = 0; j < ens; ++j) {
      out.lambda.push_back(st.shrinkage.lambda[j]);
      out.eta.push_back(st.split.eta[j]);
      out.theta.insert(out.theta.end(), st.split.theta[j].begin(), st.split.theta[j].end());
      auto beta = sampler.evaluate_coefficient(j, grid);
      for (double& b : beta) b = b * scale.scale + (j == 0 ? scale.center : 0.0);
      out.beta.insert(out.beta.end(), beta.begin(), beta.end());
      double leaves = 0.0;
      for (const auto& tree : st.ensembles[j].trees) leaves += static_cast<double>(tree.leaf_count());
      out.leaf_count.push_back(leaves);
    }
  }
  const auto stop = std::chrono::steady_clock::now();
  out.runtime_seconds = std::chrono::duration<double>(stop - start).count();
  out.seconds_per_sweep = out.runtime_seconds / options.schedule.iterations;
  out.counters = sampler.counters();
  return out;
}

std::vector<ChainOutput> run_chains(const Dataset& data, const FitOptions& options, const Eigen::MatrixXd& grid,
                                    std::uint64_t seed, int chains, int threads) {
  if (chains < 1) throw ConfigError("chains must be >= 1");
  std::vector<ChainOutput> out(static_cast<std::size_t>(chains));
  std::vector<std::exception_ptr> errors(out.size());
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int c = next++; c < chains; c = next++) {
      try {
        out[static_cast<std::size_t>(c)] =
            run_chain(data, options, grid, RngStream(seed, static_cast<std::uint64_t>(c)));
      } catch (...) {
        errors[static_cast<std::size_t>(c)] = std::current_exception();
      }
    }
  };
  const int workers = std::clamp(threads, 1, chains);
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace vcshrink
