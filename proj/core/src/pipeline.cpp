#include "vcshrink/pipeline.hpp"

#include <chrono>
#include <fstream>

#include <json.hpp>

#include "vcshrink/chain_io.hpp"
#include "vcshrink/errors.hpp"

namespace vcshrink {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

constexpr std::uint64_t kDataStreamBase = 1000;

}  // namespace

TrainTest simulate(const DgpSpec& spec) {
  Rng rng = RngStream(spec.seed, 0).engine();
  return generate(spec, rng);
}

std::vector<std::string> coefficient_names(std::size_t p, const std::vector<std::string>& x_names) {
  std::vector<std::string> out{"intercept"};
  for (std::size_t j = 0; j < p; ++j) {
    out.push_back(j < x_names.size() ? x_names[j] : "x_" + std::to_string(j + 1));
  }
  return out;
}

void write_summary(const fs::path& dir, const SummaryReport& report, std::span<const ChainOutput> chains,
                   const Eigen::MatrixXd& grid, const std::vector<std::string>& names, const Eigen::MatrixXd* truth,
                   const SummaryOutputs& options) {
  fs::create_directories(dir);
  const std::size_t ens = report.p + 1;
  if (grid.rows() != static_cast<Eigen::Index>(report.grid_size)) {
    throw DataError("grid has " + std::to_string(grid.rows()) + " rows, report has " +
                    std::to_string(report.grid_size) + " points");
  }
  std::optional<CoefficientMetrics> metrics;
  if (truth) {
    if (truth->rows() != grid.rows() || truth->cols() != static_cast<Eigen::Index>(ens)) {
      throw DataError("truth must hold p + 1 coefficient columns over the grid");
    }
    metrics = coverage_and_mse(report, *truth);
  }
  std::vector<std::vector<ModifierShare>> modifiers;
  for (std::size_t j = 0; j < ens; ++j) modifiers.push_back(modifier_report(chains, j, options.modifier_mass));

  {
    auto out = open_out(dir / "summary.csv");
    out << "j,name,lambda_median,lambda_mean,eta_median,top_modifier,top_modifier_mass";
    if (metrics) out << ",mse,coverage";
    out << '\n';
    for (std::size_t j = 0; j < ens; ++j) {
      out << j << ',' << names.at(j) << ',' << format_double(report.lambda_median[j]) << ','
          << format_double(report.lambda_mean[j]) << ',' << format_double(report.eta_median[j]) << ','
          << "z_" << modifiers[j].front().axis + 1 << ',' << format_double(modifiers[j].front().mean);
      if (metrics) out << ',' << format_double(metrics->mse[j]) << ',' << format_double(metrics->coverage[j]);
      out << '\n';
    }
  }

  json sel;
  const auto selected = lambda_screen(report.lambda_median, options.screen);
  sel["rule"] = options.screen.mode == ScreenRule::Mode::elbow ? "elbow" : "threshold";
  sel["min_ratio"] = options.screen.min_ratio;
  sel["threshold"] = options.screen.threshold;
  json chosen = json::array();
  for (auto j : selected) chosen.push_back({{"j", j}, {"name", names.at(j)}});
  sel["selected"] = chosen;
  sel["lambda_median"] = report.lambda_median;
  sel["sigma2_mean"] = report.sigma2_mean;
  sel["draws"] = report.draws;
  json mods = json::array();
  for (std::size_t j = 0; j < ens; ++j) {
    json top = json::array();
    for (std::size_t k = 0; k < modifiers[j].size() && k < options.top_modifiers; ++k) {
      const auto& m = modifiers[j][k];
      top.push_back({{"modifier", "z_" + std::to_string(m.axis + 1)},
                     {"mean", m.mean},
                     {"cumulative", m.cumulative},
                     {"in_core", m.in_core}});
    }
    mods.push_back({{"j", j}, {"name", names.at(j)}, {"top", top}});
  }
  sel["modifiers"] = mods;
  if (metrics) {
    sel["mean_mse"] = metrics->mean_mse;
    sel["mean_coverage"] = metrics->mean_coverage;
  }
  open_out(dir / "selection.json") << sel.dump(2) << '\n';

  for (std::size_t j = 0; j < ens; ++j) {
    auto out = open_out(dir / ("plotdata_" + std::to_string(j) + ".csv"));
    out << "point";
    for (Eigen::Index k = 0; k < grid.cols(); ++k) out << ",z_" << k + 1;
    out << ",mean,lo,hi";
    if (truth) out << ",truth";
    out << '\n';
    for (std::size_t g = 0; g < report.grid_size; ++g) {
      const auto row = static_cast<Eigen::Index>(g);
      out << g + 1;
      for (Eigen::Index k = 0; k < grid.cols(); ++k) out << ',' << format_double(grid(row, k));
      out << ',' << format_double(report.mean(j, g)) << ',' << format_double(report.lower(j, g)) << ','
          << format_double(report.upper(j, g));
      if (truth) out << ',' << format_double((*truth)(row, static_cast<Eigen::Index>(j)));
      out << '\n';
    }
  }
}

void write_comparison(const fs::path& path, const std::string& label_a, const SummaryReport& a,
                      const std::string& label_b, const SummaryReport& b, const Eigen::MatrixXd* truth) {
  if (a.p != b.p || a.grid_size != b.grid_size) throw DataError("summaries to compare differ in shape");
  std::optional<CoefficientMetrics> ma;
  std::optional<CoefficientMetrics> mb;
  if (truth) {
    ma = coverage_and_mse(a, *truth);
    mb = coverage_and_mse(b, *truth);
  }
  auto out = open_out(path);
  out << "j,lambda_median_" << label_a << ",lambda_median_" << label_b;
  if (truth) out << ",mse_" << label_a << ",mse_" << label_b << ",coverage_" << label_a << ",coverage_" << label_b;
  out << '\n';
  for (std::size_t j = 0; j <= a.p; ++j) {
    out << j << ',' << format_double(a.lambda_median[j]) << ',' << format_double(b.lambda_median[j]);
    if (truth) {
      out << ',' << format_double(ma->mse[j]) << ',' << format_double(mb->mse[j]) << ','
          << format_double(ma->coverage[j]) << ',' << format_double(mb->coverage[j]);
    }
    out << '\n';
  }
}

ArmResult fit_arm(const Dataset& train, const Dataset& test, const RunConfig& run, const SummaryOutputs& summary,
                  const std::optional<fs::path>& output) {
  run.validate();
  const Eigen::MatrixXd grid = test.n() > 0 ? grid_of(test) : grid_of(train);
  const auto start = std::chrono::steady_clock::now();
  auto chains = run_chains(train, run.effective_fit(), grid, run.seed, run.chains, run.threads);
  ArmResult arm;
  arm.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  for (const auto& c : chains) {
    arm.seconds_per_sweep += c.seconds_per_sweep / static_cast<double>(chains.size());
    arm.tree_acceptance += c.counters.tree_acceptance() / static_cast<double>(chains.size());
  }
  arm.report = summarize(chains);
  const Eigen::MatrixXd* truth = nullptr;
  if (test.n() > 0 && test.beta_true) truth = &*test.beta_true;
  if (truth) {
    arm.metrics = coverage_and_mse(arm.report, *truth, &test);
    double null_sum = 0.0;
    std::size_t null_n = 0;
    double active_sum = 0.0;
    std::size_t active_n = 0;
    for (std::size_t j = 1; j <= arm.report.p; ++j) {
      if (j >= 4) {
        null_sum += arm.metrics->mse[j];
        ++null_n;
      } else {
        active_sum += arm.metrics->mse[j];
        ++active_n;
      }
    }
    arm.null_mse = null_n ? null_sum / static_cast<double>(null_n) : 0.0;
    arm.active_mse = active_n ? active_sum / static_cast<double>(active_n) : 0.0;
  }
  arm.selected = lambda_screen(arm.report.lambda_median, summary.screen);
  for (std::size_t j = 0; j <= arm.report.p; ++j) {
    arm.modifiers.push_back(modifier_report(chains, j, summary.modifier_mass));
  }
  if (output) {
    RunInfo info;
    info.n = train.n();
    info.wall_seconds = arm.wall_seconds;
    write_run(*output / "run", run, info, grid, chains);
    write_summary(*output / "summary", arm.report, chains, grid, coefficient_names(train.p(), train.x_names), truth,
                  summary);
  }
  return arm;
}

std::vector<ReplicationResult> run_experiment(const ExperimentOptions& options,
                                              const std::function<void(const ReplicationResult&)>& progress) {
  if (options.replications < 1) throw ConfigError("replications must be >= 1");
  options.dgp.validate();
  options.run.validate();
  std::vector<ReplicationResult> results;
  for (int rep = 0; rep < options.replications; ++rep) {
    ReplicationResult res;
    res.replication = rep + 1;
    res.data_seed = options.dgp.seed;
    res.fit_seed = options.run.seed + static_cast<std::uint64_t>(rep);
    try {
      Rng data_rng = RngStream(options.dgp.seed, kDataStreamBase + static_cast<std::uint64_t>(rep)).engine();
      const TrainTest data = generate(options.dgp, data_rng);
      std::optional<fs::path> base;
      if (options.output) base = *options.output / ("rep_" + std::to_string(rep + 1));
      if (base) {
        fs::create_directories(*base);
        write_csv(data.train, *base / "train.csv");
        write_csv(data.test, *base / "test.csv");
      }
      RunConfig run = options.run;
      run.seed = res.fit_seed;
      if (options.run_sparse) {
        std::optional<fs::path> out;
        if (base) out = *base / "sparse";
        res.sparse = fit_arm(data.train, data.test, run, options.summary, out);
      }
      if (options.run_ablation) {
        RunConfig ab = run;
        ab.ablation = Ablation::constant_shrinkage;
        std::optional<fs::path> out;
        if (base) out = *base / "ablation";
        res.ablation = fit_arm(data.train, data.test, ab, options.summary, out);
      }
    } catch (const std::exception& e) {
      res.error = e.what();
    }
    if (progress) progress(res);
    results.push_back(std::move(res));
  }
  return results;
}

void write_experiment(const fs::path& dir, const std::vector<ReplicationResult>& results) {
  fs::create_directories(dir);
  auto per = open_out(dir / "experiment.csv");
  per << "replication,arm,j,mse,coverage,lambda_median\n";
  struct Acc {
    std::vector<double> mse, cov, lam;
    std::size_t n = 0;
  };
  Acc acc[2];
  json reps = json::array();
  for (const auto& r : results) {
    json entry{{"replication", r.replication}, {"fit_seed", r.fit_seed}};
    if (!r.error.empty()) entry["error"] = r.error;
    const std::optional<ArmResult>* arms[2] = {&r.sparse, &r.ablation};
    const char* labels[2] = {"sparse", "ablation"};
    for (int a = 0; a < 2; ++a) {
      if (!*arms[a]) continue;
      const ArmResult& arm = **arms[a];
      const std::size_t ens = arm.report.p + 1;
      auto& ac = acc[a];
      if (ac.mse.empty()) {
        ac.mse.assign(ens, 0.0);
        ac.cov.assign(ens, 0.0);
        ac.lam.assign(ens, 0.0);
      }
      ++ac.n;
      for (std::size_t j = 0; j < ens; ++j) {
        const double mse = arm.metrics ? arm.metrics->mse[j] : 0.0;
        const double cov = arm.metrics ? arm.metrics->coverage[j] : 0.0;
        per << r.replication << ',' << labels[a] << ',' << j << ',' << format_double(mse) << ','
            << format_double(cov) << ',' << format_double(arm.report.lambda_median[j]) << '\n';
        ac.mse[j] += mse;
        ac.cov[j] += cov;
        ac.lam[j] += arm.report.lambda_median[j];
      }
      json arm_json{{"null_mse", arm.null_mse},
                    {"active_mse", arm.active_mse},
                    {"selected", arm.selected},
                    {"wall_seconds", arm.wall_seconds},
                    {"seconds_per_sweep", arm.seconds_per_sweep},
                    {"tree_acceptance", arm.tree_acceptance}};
      if (arm.metrics) {
        arm_json["mean_mse"] = arm.metrics->mean_mse;
        arm_json["mean_coverage"] = arm.metrics->mean_coverage;
        if (arm.metrics->predictive_rmse) arm_json["predictive_rmse"] = *arm.metrics->predictive_rmse;
      }
      entry[labels[a]] = arm_json;
    }
    reps.push_back(entry);
  }
  auto agg = open_out(dir / "aggregate.csv");
  agg << "arm,j,mean_mse,mean_coverage,mean_lambda_median,replications\n";
  const char* labels[2] = {"sparse", "ablation"};
  for (int a = 0; a < 2; ++a) {
    const auto& ac = acc[a];
    if (ac.n == 0) continue;
    const auto n = static_cast<double>(ac.n);
    for (std::size_t j = 0; j < ac.mse.size(); ++j) {
      agg << labels[a] << ',' << j << ',' << format_double(ac.mse[j] / n) << ',' << format_double(ac.cov[j] / n)
          << ',' << format_double(ac.lam[j] / n) << ',' << ac.n << '\n';
    }
  }
  open_out(dir / "experiment.json") << json{{"replications", reps}}.dump(2) << '\n';
}

}  // namespace vcshrink
