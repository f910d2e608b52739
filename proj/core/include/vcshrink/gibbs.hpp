#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "vcshrink/data.hpp"
#include "vcshrink/priors.hpp"
#include "vcshrink/samplers.hpp"
#include "vcshrink/tree.hpp"

namespace vcshrink {

/// Per-leaf sufficient statistics of the regression r_i = x_ij mu + noise.
struct SufficientStats {
  std::size_t n = 0;
  double a = 0.0;    // sum x_ij^2
  double b = 0.0;    // sum x_ij r_i
  double rss = 0.0;  // sum r_i^2

  void add(double x, double r) {
    ++n;
    a += x * x;
    b += x * r;
    rss += r * r;
  }
};

/// log of the integral of N(r; mu x, sigma2 I) N(mu; 0, s2_leaf) over mu.
/// An empty leaf contributes 0; s2_leaf == 0 reduces to the mu = 0 likelihood.
double leaf_log_marginal(const SufficientStats& stats, double s2_leaf, double sigma2);

enum class C2Update {
  conjugate,  // inverse-gamma draw treating the leaf prior as pure scale tau^2 lambda^2 c^2 / M
  exact,      // slice sampling of log c^2 against the regularized-horseshoe variance
};

struct SamplerBlocks {
  bool trees = true;
  bool theta = true;
  bool eta = true;
  bool lambda = true;
  bool tau = true;
  bool c2 = true;
  bool sigma2 = true;
};

struct SamplerOptions {
  double eta_step = 1.0;  // random-walk sd on logit(u_j)
  SliceConfig slice{1.0, 32, -27.631021115928547, std::numeric_limits<double>::infinity(), 1000};
  C2Update c2_update = C2Update::conjugate;
  /// When set, every s_j^2 is held at this value and lambda, tau and c2 are
  /// frozen (constant-shrinkage baseline and test hooks).
  std::optional<double> fixed_s2;
  SamplerBlocks blocks;
  /// Check the cached fit against a full recomputation every this many
  /// sweeps (0 disables).
  int coherence_interval = 100;

  void validate() const;
};

struct Ensemble {
  std::vector<DecisionTree> trees;
  std::vector<LeafAssignment> leaves;
};

struct ChainState {
  std::vector<Ensemble> ensembles;  // j = 0..p
  SplitProbState split;
  ShrinkageState shrinkage;
  std::vector<double> fit;  // beta_0(z_i) + sum_j beta_j(z_i) x_ij
  std::uint64_t sweep = 0;
};

struct MoveCounters {
  std::uint64_t grow_proposed = 0;
  std::uint64_t grow_accepted = 0;
  std::uint64_t prune_proposed = 0;
  std::uint64_t prune_accepted = 0;
  std::uint64_t invalid_proposals = 0;
  std::uint64_t nonfinite = 0;
  std::uint64_t eta_proposed = 0;
  std::uint64_t eta_accepted = 0;
  std::uint64_t eta_nonfinite = 0;

  double tree_acceptance() const;
  double eta_acceptance() const;
};

/// Sweep blocks, used to derive per-(sweep, block) random streams.
enum class Block : std::uint64_t { trees = 0, theta, eta, lambda, tau, c2, sigma2, response };

/// MH-within-Gibbs sampler over the tree ensembles, split probabilities and
/// the global-local scales. `hyper` must be resolved (noise_scale and tau0
/// set).
class GibbsSampler {
 public:
  GibbsSampler(Dataset data, Hyperparameters hyper, SamplerOptions options = {});

  /// Stumps with zero jumps, uniform theta, eta = R, lambda = 1, tau = tau0,
  /// c2 = s_c^2, sigma2 = var(y).
  void initialize();
  /// Every parameter drawn from its prior.
  void initialize_from_prior(Rng& rng);

  const Dataset& data() const { return data_; }
  const Hyperparameters& hyper() const { return hyper_; }
  const SamplerOptions& options() const { return options_; }
  const ChainState& state() const { return state_; }
  /// Direct access for tests; call refresh_fit() after structural edits.
  ChainState& mutable_state() { return state_; }
  const MoveCounters& counters() const { return counters_; }

  std::size_t ensemble_count() const { return state_.ensembles.size(); }
  double basis(std::size_t j, std::size_t i) const { return basis_[j][i]; }
  /// Per-leaf prior variance in ensemble j.
  double leaf_variance(std::size_t j) const;

  void set_response(std::vector<double> y);
  /// y_i = fit_i + sigma * eps_i under the current state.
  std::vector<double> simulate_response(Rng& rng) const;

  std::vector<double> partial_residuals(std::size_t j, std::size_t m) const;
  SufficientStats leaf_stats(std::size_t j, std::size_t m, DecisionTree::NodeId leaf,
                             std::span<const double> residuals) const;
  double tree_log_marginal(std::size_t j, std::size_t m, std::span<const double> residuals) const;

  bool mh_tree_update(std::size_t j, std::size_t m, Rng& rng);
  void redraw_leaves(std::size_t j, std::size_t m, Rng& rng);
  void update_theta(std::size_t j, Rng& rng);
  bool update_eta(std::size_t j, Rng& rng);
  void update_lambda(Rng& rng);
  void update_tau(Rng& rng);
  void update_lambda_tau(Rng& lambda_rng, Rng& tau_rng);
  void update_c2(Rng& rng);
  void update_sigma2(Rng& rng);

  /// One full sweep in block order: trees (MH then leaves, ensemble-major),
  /// theta, eta, lambda, tau, c2, sigma2.
  void sweep(const RngStream& stream);

  /// Sum of squared jumps S_j and leaf count L_j of ensemble j.
  std::pair<double, std::size_t> jump_summary(std::size_t j) const;
  /// log of the global-local conditional restricted to the leaf terms.
  double scale_log_likelihood(double log_tau, std::span<const double> log_lambda, double log_c2) const;

  std::vector<double> recompute_fit() const;
  double max_fit_discrepancy() const;
  /// Recomputes the cached fit from the ensembles.
  void refresh_fit();
  /// Throws NumericalError when the cached fit has drifted.
  void check_fit_coherence() const;

  std::vector<double> evaluate_coefficient(std::size_t j, const Eigen::MatrixXd& grid) const;

  static bool accept(double log_alpha, Rng& rng);

 private:
  void update_tree(std::size_t j, std::size_t m, Rng& rng);
  void compute_partial(std::size_t j, std::size_t m);
  bool mh_step(std::size_t j, std::size_t m, std::span<const double> residuals, Rng& rng);
  void leaf_step(std::size_t j, std::size_t m, std::span<const double> residuals,
                 std::span<const double> old_contribution, Rng& rng);
  double ensemble_leaf_term(std::size_t j, double log_v) const;

  Dataset data_;
  Hyperparameters hyper_;
  SamplerOptions options_;
  std::vector<std::vector<double>> basis_;  // basis_[0] = 1, basis_[j] = x_j
  ChainState state_;
  MoveCounters counters_;
  std::vector<double> scratch_residual_;
  std::vector<double> scratch_old_;
};

struct ChainSchedule {
  int iterations = 2000;
  int burn = 400;
  int thin = 1;

  /// Throws ConfigError.
  void validate() const;
  int kept_draws() const;
};

/// Response standardization applied before sampling; recorded draws are
/// mapped back to the original scale.
struct ResponseScale {
  double center = 0.0;
  double scale = 1.0;
};

struct FitOptions {
  Hyperparameters hyper;
  SamplerOptions sampler;
  ChainSchedule schedule;
  bool standardize = true;
};

/// Thinned post-burn-in draws. Matrices are flattened draw-major:
/// lambda/eta: draws x (p+1); theta: draws x (p+1) x R;
/// beta: draws x (p+1) x G.
struct ChainOutput {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  std::size_t p = 0;
  std::size_t r = 0;
  std::size_t grid_size = 0;
  ChainSchedule schedule;
  ResponseScale response;
  Hyperparameters hyper;  // resolved, on the sampler's scale

  std::vector<double> sigma2;
  std::vector<double> tau;
  std::vector<double> c2;
  std::vector<double> lambda;
  std::vector<double> eta;
  std::vector<double> theta;
  std::vector<double> beta;
  std::vector<double> leaf_count;  // draws x (p+1), total leaves per ensemble

  MoveCounters counters;
  double runtime_seconds = 0.0;
  double seconds_per_sweep = 0.0;

  std::size_t draws() const { return sigma2.size(); }
  std::size_t ensembles() const { return p + 1; }
  double lambda_at(std::size_t d, std::size_t j) const { return lambda[d * (p + 1) + j]; }
  double eta_at(std::size_t d, std::size_t j) const { return eta[d * (p + 1) + j]; }
  double theta_at(std::size_t d, std::size_t j, std::size_t k) const { return theta[(d * (p + 1) + j) * r + k]; }
  double beta_at(std::size_t d, std::size_t j, std::size_t g) const {
    return beta[(d * (p + 1) + j) * grid_size + g];
  }
};

/// Standardizes (optionally), resolves defaults, runs one chain.
ChainOutput run_chain(const Dataset& data, const FitOptions& options, const Eigen::MatrixXd& grid,
                      const RngStream& stream);

/// Independent chains with streams 0..chains-1 of `seed`, spread over
/// `threads` workers. Output order is by stream regardless of scheduling.
std::vector<ChainOutput> run_chains(const Dataset& data, const FitOptions& options, const Eigen::MatrixXd& grid,
                                    std::uint64_t seed, int chains, int threads = 1);

}  // namespace vcshrink
