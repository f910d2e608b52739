#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "vcshrink/config.hpp"
#include "vcshrink/gibbs.hpp"

namespace vcshrink {

/// Chain directory layout:
///   params.csv    draw,sigma2,tau,c2,lambda_0..lambda_p,eta_0..eta_p
///   theta_<j>.csv draw,theta_1..theta_R       (one per ensemble j = 0..p)
///   leaves.csv    draw,leaves_0..leaves_p     (total leaves per ensemble)
///   beta_grid.csv draw,point,j,value          (long format, point 1-based)
///   meta.json     seed, stream, shapes, schedule, response scale,
///                 resolved hyperparameters, move counters, runtime
/// Values are written in shortest round-trip form.
void write_chain(const ChainOutput& chain, const std::filesystem::path& dir);
ChainOutput read_chain(const std::filesystem::path& dir);

/// Side information recorded in a run's consolidated meta.json.
struct RunInfo {
  std::string data_path;
  std::string grid_path;  // empty when the grid is the training modifiers
  std::size_t n = 0;
  std::vector<double> z_min;
  std::vector<double> z_max;
  double wall_seconds = 0.0;
  std::string error;  // set when the run aborted
};

/// Run directory: meta.json (config echo, run info, per-chain acceptance),
/// grid.csv (z_1..z_R rows of the query grid) and chain_<k>/ subdirectories.
void write_run(const std::filesystem::path& dir, const RunConfig& config, const RunInfo& info,
               const Eigen::MatrixXd& grid, const std::vector<ChainOutput>& chains);
std::vector<ChainOutput> read_run(const std::filesystem::path& dir);
Eigen::MatrixXd read_grid(const std::filesystem::path& dir);
RunConfig read_run_config(const std::filesystem::path& dir);

}  // namespace vcshrink
