#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "vcshrink/config.hpp"
#include "vcshrink/data.hpp"
#include "vcshrink/summary.hpp"

namespace vcshrink {

/// generate() driven by stream 0 of spec.seed.
TrainTest simulate(const DgpSpec& spec);

/// Query grid made of a dataset's modifier rows.
inline Eigen::MatrixXd grid_of(const Dataset& d) { return d.z; }

/// Names of the p+1 coefficient functions: "intercept" then x_names.
std::vector<std::string> coefficient_names(std::size_t p, const std::vector<std::string>& x_names);

struct SummaryOutputs {
  ScreenRule screen;
  double modifier_mass = 0.9;
  std::size_t top_modifiers = 5;
};

/// summary.csv (per-j scales and metrics), selection.json (selected
/// covariates and per-j leading modifiers) and plotdata_<j>.csv
/// (point, z_1..z_R, mean, lo, hi[, truth]). `truth` is G x (p+1).
void write_summary(const std::filesystem::path& dir, const SummaryReport& report,
                   std::span<const ChainOutput> chains, const Eigen::MatrixXd& grid,
                   const std::vector<std::string>& names, const Eigen::MatrixXd* truth,
                   const SummaryOutputs& options = {});

/// Side-by-side per-j table of two summaries (compare.csv).
void write_comparison(const std::filesystem::path& path, const std::string& label_a, const SummaryReport& a,
                      const std::string& label_b, const SummaryReport& b, const Eigen::MatrixXd* truth);

struct ArmResult {
  SummaryReport report;
  std::optional<CoefficientMetrics> metrics;
  std::vector<std::size_t> selected;
  std::vector<std::vector<ModifierShare>> modifiers;  // per j
  double null_mse = 0.0;    // mean MSE over j >= 4 (0 when p < 4)
  double active_mse = 0.0;  // mean MSE over j = 1..3
  double wall_seconds = 0.0;
  double seconds_per_sweep = 0.0;
  double tree_acceptance = 0.0;
};

struct ReplicationResult {
  int replication = 0;
  std::uint64_t data_seed = 0;
  std::uint64_t fit_seed = 0;
  std::optional<ArmResult> sparse;
  std::optional<ArmResult> ablation;
  std::string error;
};

struct ExperimentOptions {
  DgpSpec dgp = [] {
    DgpSpec s = DgpSpec::experiment1();
    s.n_train = 500;
    s.n_test = 100;
    return s;
  }();
  RunConfig run;
  int replications = 5;
  /// Arms to run: sparse (run.ablation as configured) and/or the
  /// constant-shrinkage baseline.
  bool run_sparse = true;
  bool run_ablation = false;
  SummaryOutputs summary;
  /// When set, each replication's run directories and summaries land under
  /// <output>/rep_<k>/<arm>/.
  std::optional<std::filesystem::path> output;
};

/// Fits chains on `train`, summarizes over `test` modifiers and scores
/// against test.beta_true when present.
ArmResult fit_arm(const Dataset& train, const Dataset& test, const RunConfig& run, const SummaryOutputs& summary,
                  const std::optional<std::filesystem::path>& output = std::nullopt);

/// simulate -> fit -> summarize per replication. A failing replication is
/// recorded and the loop moves on.
std::vector<ReplicationResult> run_experiment(const ExperimentOptions& options,
                                              const std::function<void(const ReplicationResult&)>& progress = {});

/// experiment.csv (rep, arm, j, mse, coverage, lambda_median) and
/// aggregate.csv (arm, j, mean mse, mean coverage, mean lambda median).
void write_experiment(const std::filesystem::path& dir, const std::vector<ReplicationResult>& results);

}  // namespace vcshrink
