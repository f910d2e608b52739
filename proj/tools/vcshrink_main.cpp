#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "vcshrink/chain_io.hpp"
#include "vcshrink/config.hpp"
#include "vcshrink/data.hpp"
#include "vcshrink/errors.hpp"
#include "vcshrink/pipeline.hpp"
#include "vcshrink/summary.hpp"

namespace fs = std::filesystem;
using namespace vcshrink;

namespace {

enum Exit { kOk = 0, kOther = 1, kConfig = 2, kData = 3, kNumerical = 4 };

// Flags shared by fit and experiment. Optional members stay unset unless
// given so that defaults come from RunConfig.
struct FitFlags {
  std::optional<std::uint64_t> seed;
  std::optional<int> chains;
  std::optional<int> threads;
  std::optional<int> iterations;
  std::optional<int> burn;
  std::optional<int> thin;
  std::optional<int> trees;
  std::optional<std::string> ablation;
  std::optional<std::string> c2_update;
  std::optional<std::string> tree_prior;
  std::optional<std::string> cutpoints;
  bool no_standardize = false;
  std::string config_path;

  void add(CLI::App* app, bool with_ablation = true) {
    app->add_option("--seed", seed, "Master seed");
    app->add_option("--chains", chains, "Independent chains (default 4)");
    app->add_option("--threads", threads, "Worker threads (default $VCSHRINK_THREADS or 1)");
    app->add_option("--iters", iterations, "Sweeps per chain (default 2000)");
    app->add_option("--burn", burn, "Burn-in sweeps (default 400)");
    app->add_option("--thin", thin, "Keep every k-th post-burn draw (default 1)");
    app->add_option("--trees", trees, "Trees per ensemble (default 50)");
    if (with_ablation) {
      app->add_option("--ablation", ablation, "none | constant-shrinkage")
          ->check(CLI::IsMember({"none", "constant-shrinkage"}));
    }
    app->add_option("--c2-update", c2_update, "conjugate | exact")->check(CLI::IsMember({"conjugate", "exact"}));
    app->add_option("--tree-prior", tree_prior, "quadratic | exponential")
        ->check(CLI::IsMember({"quadratic", "exponential"}));
    app->add_option("--cutpoints", cutpoints, "uniform | midpoints")->check(CLI::IsMember({"uniform", "midpoints"}));
    app->add_flag("--no-standardize", no_standardize, "Sample on the raw response scale");
    app->add_option("--config", config_path, "JSON config; its keys override flags");
  }

  RunConfig build() const {
    RunConfig c;
    c.threads = default_thread_count();
    if (seed) c.seed = *seed;
    if (chains) c.chains = *chains;
    if (threads) c.threads = *threads;
    if (iterations) c.fit.schedule.iterations = *iterations;
    if (burn) c.fit.schedule.burn = *burn;
    if (thin) c.fit.schedule.thin = *thin;
    if (trees) c.fit.hyper.trees = *trees;
    if (ablation) c.ablation = ablation_from_string(*ablation);
    if (no_standardize) c.fit.standardize = false;
    std::ostringstream extra;
    extra << '{';
    bool first = true;
    auto put = [&](const char* key, const std::optional<std::string>& v) {
      if (!v) return;
      extra << (first ? "" : ",") << '"' << key << "\":\"" << *v << '"';
      first = false;
    };
    put("c2_update", c2_update);
    put("tree_prior", tree_prior);
    put("cutpoints", cutpoints);
    extra << '}';
    c = parse_config(extra.str(), c);
    if (!config_path.empty()) c = load_config(config_path, c);
    c.validate();
    return c;
  }
};

struct DgpFlags {
  std::string experiment = "exp1";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> n_train;
  std::optional<std::size_t> n_test;
  std::optional<std::size_t> p;
  std::optional<std::size_t> r;
  std::optional<double> rho;
  std::optional<double> noise_sd;
  std::string intercept = "modulated";

  void add(CLI::App* app, bool with_seed) {
    app->add_option("--experiment", experiment, "exp1 | exp2 | custom")
        ->check(CLI::IsMember({"exp1", "exp2", "custom"}));
    if (with_seed) app->add_option("--seed", seed, "Data seed");
    app->add_option("--n-train", n_train, "Training rows");
    app->add_option("--n-test", n_test, "Test rows (evaluation grid)");
    app->add_option("-p,--p", p, "Covariates");
    app->add_option("-R,--r", r, "Effect modifiers");
    app->add_option("--rho", rho, "AR(1) covariate correlation");
    app->add_option("--noise-sd", noise_sd, "Noise standard deviation");
    app->add_option("--intercept", intercept, "modulated | literal reading of the intercept function")
        ->check(CLI::IsMember({"modulated", "literal"}));
  }

  DgpSpec build(std::size_t default_n_train, std::size_t default_n_test) const {
    DgpSpec s = experiment == "exp2" ? DgpSpec::experiment2() : DgpSpec::experiment1();
    if (experiment == "custom") s.experiment = Experiment::custom;
    s.n_train = default_n_train;
    s.n_test = default_n_test;
    if (seed) s.seed = *seed;
    if (n_train) s.n_train = *n_train;
    if (n_test) s.n_test = *n_test;
    if (p) s.p = *p;
    if (r) s.r = *r;
    if (rho) s.rho = *rho;
    if (noise_sd) s.noise_sd = *noise_sd;
    s.intercept = intercept == "literal" ? InterceptReading::literal : InterceptReading::modulated;
    s.validate();
    return s;
  }
};

void write_truth(const Dataset& d, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "point";
  for (std::size_t k = 0; k < d.r(); ++k) out << ",z_" << k + 1;
  for (std::size_t j = 0; j <= d.p(); ++j) out << ",beta_true_" << j;
  out << '\n';
  for (std::size_t i = 0; i < d.n(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    out << i + 1;
    for (std::size_t k = 0; k < d.r(); ++k) out << ',' << format_double(d.z(row, static_cast<Eigen::Index>(k)));
    for (std::size_t j = 0; j <= d.p(); ++j) {
      out << ',' << format_double((*d.beta_true)(row, static_cast<Eigen::Index>(j)));
    }
    out << '\n';
  }
}

// Reads the beta_true_j columns of a truth or dataset CSV as G x (p+1).
Eigen::MatrixXd read_truth(const fs::path& path, std::size_t p) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open truth file " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  std::vector<int> col(p + 1, -1);
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string prefix = "beta_true_";
    if (header[c].rfind(prefix, 0) == 0) {
      const auto j = std::stoul(header[c].substr(prefix.size()));
      if (j <= p) col[j] = static_cast<int>(c);
    }
  }
  for (std::size_t j = 0; j <= p; ++j) {
    if (col[j] < 0) throw DataError("truth file lacks column beta_true_" + std::to_string(j));
  }
  std::vector<std::vector<double>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    std::vector<double> row(p + 1);
    for (std::size_t j = 0; j <= p; ++j) {
      const auto c = static_cast<std::size_t>(col[j]);
      try {
        if (c >= cells.size()) throw std::invalid_argument("missing");
        row[j] = std::stod(cells[c]);
      } catch (const std::exception&) {
        throw DataError("truth file line " + std::to_string(lineno) + " column beta_true_" + std::to_string(j) +
                        ": not a number");
      }
    }
    rows.push_back(std::move(row));
  }
  Eigen::MatrixXd t(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(p + 1));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j <= p; ++j) t(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  }
  return t;
}

int cmd_simulate(const DgpFlags& flags, std::size_t noise_covariates, const fs::path& out) {
  DgpSpec spec = flags.build(1000, 200);
  TrainTest data = simulate(spec);
  if (noise_covariates > 0) {
    Rng rng = RngStream(spec.seed, 1).engine();
    data.train = augment_noise_covariates(data.train, noise_covariates, rng);
    data.test = augment_noise_covariates(data.test, noise_covariates, rng);
  }
  fs::create_directories(out);
  write_csv(data.train, out / "train.csv");
  write_csv(data.test, out / "test.csv");
  write_truth(data.test, out / "truth.csv");
  std::cout << "wrote " << (out / "train.csv").string() << ", test.csv, truth.csv (p = " << data.train.p()
            << ", R = " << data.train.r() << ")\n";
  return kOk;
}

int cmd_fit(const FitFlags& flags, const std::string& data_path, const std::string& grid_path, bool rescale_z,
            const fs::path& out) {
  const RunConfig config = flags.build();
  CsvSchema schema{rescale_z};
  const Dataset train = load_csv(data_path, schema);
  Eigen::MatrixXd grid = train.z;
  if (!grid_path.empty()) grid = load_csv(grid_path, schema).z;
  RunInfo info;
  info.data_path = data_path;
  info.grid_path = grid_path;
  info.n = train.n();
  info.z_min = train.z_min;
  info.z_max = train.z_max;
  const auto start = std::chrono::steady_clock::now();
  std::vector<ChainOutput> chains;
  try {
    chains = run_chains(train, config.effective_fit(), grid, config.seed, config.chains, config.threads);
  } catch (const NumericalError& e) {
    info.error = e.what();
    info.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_run(out, config, info, grid, {});
    throw;
  }
  info.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_run(out, config, info, grid, chains);
  std::cout << "fit " << chains.size() << " chains in " << info.wall_seconds << " s";
  for (const auto& c : chains) std::cout << "; tree acceptance " << c.counters.tree_acceptance();
  std::cout << "\nrun directory: " << out.string() << '\n';
  return kOk;
}

int cmd_summarize(const fs::path& run, const std::string& truth_path, const std::string& compare, double level,
                  const SummaryOutputs& outputs, fs::path out) {
  if (out.empty()) out = run / "summary";
  const auto chains = read_run(run);
  const Eigen::MatrixXd grid = read_grid(run);
  const SummaryReport report = summarize(chains, level);
  std::optional<Eigen::MatrixXd> truth;
  if (!truth_path.empty()) {
    truth = read_truth(truth_path, report.p);
    if (truth->rows() != grid.rows()) throw DataError("truth file rows do not match the run's grid");
  }
  std::vector<std::string> names = coefficient_names(report.p, {});
  write_summary(out, report, chains, grid, names, truth ? &*truth : nullptr, outputs);
  std::cout << "summary: " << out.string() << '\n';
  for (std::size_t j = 0; j <= report.p; ++j) {
    std::cout << "  j=" << j << " median lambda " << report.lambda_median[j];
    if (truth) {
      const auto m = coverage_and_mse(report, *truth);
      std::cout << "  mse " << m.mse[j] << "  coverage " << m.coverage[j];
    }
    std::cout << '\n';
  }
  if (!compare.empty()) {
    const auto other = read_run(compare);
    const SummaryReport b = summarize(other, level);
    write_comparison(out / "compare.csv", "a", report, "b", b, truth ? &*truth : nullptr);
    std::cout << "comparison: " << (out / "compare.csv").string() << '\n';
  }
  return kOk;
}

int cmd_experiment(const DgpFlags& dgp_flags, const FitFlags& fit_flags, int replications, const std::string& arms,
                   const SummaryOutputs& outputs, const fs::path& out) {
  ExperimentOptions opt;
  opt.dgp = dgp_flags.build(500, 100);
  opt.run = fit_flags.build();
  if (!dgp_flags.seed && fit_flags.seed) opt.dgp.seed = *fit_flags.seed;
  opt.replications = replications;
  opt.run_sparse = arms != "constant-shrinkage";
  opt.run_ablation = arms != "none";
  opt.summary = outputs;
  opt.output = out;
  const auto results = run_experiment(opt, [](const ReplicationResult& r) {
    std::cout << "replication " << r.replication;
    if (!r.error.empty()) std::cout << " failed: " << r.error;
    if (r.sparse && r.sparse->metrics) {
      std::cout << "  sparse mse " << r.sparse->metrics->mean_mse << " coverage " << r.sparse->metrics->mean_coverage;
    }
    if (r.ablation && r.ablation->metrics) {
      std::cout << "  ablation mse " << r.ablation->metrics->mean_mse << " coverage "
                << r.ablation->metrics->mean_coverage;
    }
    std::cout << std::endl;
  });
  write_experiment(out, results);
  std::cout << "aggregate: " << (out / "aggregate.csv").string() << '\n';
  for (const auto& r : results) {
    if (!r.error.empty()) return kNumerical;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse varying-coefficient tree ensembles with regularized-horseshoe shrinkage"};
  app.require_subcommand(1);

  auto* sim = app.add_subcommand("simulate", "Write synthetic train/test/truth CSVs");
  DgpFlags sim_dgp;
  sim_dgp.add(sim, true);
  std::size_t noise_covariates = 0;
  std::string sim_out = "data";
  sim->add_option("--noise-covariates", noise_covariates, "Append k standard-normal noise covariates");
  sim->add_option("-o,--out", sim_out, "Output directory");

  auto* fit = app.add_subcommand("fit", "Run chains on a CSV dataset");
  FitFlags fit_flags;
  fit_flags.add(fit);
  std::string data_path;
  std::string grid_path;
  bool rescale_z = false;
  std::string fit_out = "run";
  fit->add_option("--data", data_path, "Training CSV (y, x_*, z_*)")->required();
  fit->add_option("--grid", grid_path, "CSV whose z_* rows form the evaluation grid (default: training rows)");
  fit->add_flag("--rescale-z", rescale_z, "Min-max rescale modifiers to [0, 1]");
  fit->add_option("-o,--out", fit_out, "Run directory");

  auto* sum = app.add_subcommand("summarize", "Posterior summaries of a run directory");
  std::string run_dir;
  std::string truth_path;
  std::string compare_dir;
  std::string sum_out;
  double level = 0.95;
  std::string screen = "elbow";
  SummaryOutputs outputs;
  sum->add_option("--run", run_dir, "Run directory written by fit")->required();
  sum->add_option("--truth", truth_path, "CSV with beta_true_j columns over the grid");
  sum->add_option("--compare", compare_dir, "Second run directory for a side-by-side table");
  sum->add_option("--level", level, "Credible level")->check(CLI::Range(0.0, 1.0));
  sum->add_option("--screen", screen, "elbow | threshold")->check(CLI::IsMember({"elbow", "threshold"}));
  sum->add_option("--threshold", outputs.screen.threshold, "Threshold for --screen threshold");
  sum->add_option("--min-ratio", outputs.screen.min_ratio, "Required gap ratio for --screen elbow");
  sum->add_option("-o,--out", sum_out, "Output directory (default <run>/summary)");

  auto* exp = app.add_subcommand("experiment", "Replicated simulate-fit-summarize pipeline");
  DgpFlags exp_dgp;
  exp_dgp.add(exp, false);
  FitFlags exp_fit;
  exp_fit.add(exp, false);
  int replications = 5;
  std::string arms = "none";
  std::string exp_out = "experiment";
  exp->add_option("--replications", replications, "Replications (default 5)");
  exp->add_option("--ablation", arms, "none | constant-shrinkage | both")
      ->check(CLI::IsMember({"none", "constant-shrinkage", "both"}));
  exp->add_option("-o,--out", exp_out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*sim) return cmd_simulate(sim_dgp, noise_covariates, sim_out);
    if (*fit) return cmd_fit(fit_flags, data_path, grid_path, rescale_z, fit_out);
    if (*sum) {
      outputs.screen.mode = screen == "elbow" ? ScreenRule::Mode::elbow : ScreenRule::Mode::threshold;
      return cmd_summarize(run_dir, truth_path, compare_dir, level, outputs, sum_out);
    }
    if (*exp) return cmd_experiment(exp_dgp, exp_fit, replications, arms, outputs, exp_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const NumericalError& e) {
    std::cerr << "numerical abort: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kOther;
  }
  return kOk;
}
