#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "vcshrink/chain_io.hpp"
#include "vcshrink/pipeline.hpp"

using namespace vcshrink;
namespace fs = std::filesystem;

namespace {

ExperimentOptions tiny_experiment() {
  ExperimentOptions o;
  o.dgp.n_train = 60;
  o.dgp.n_test = 10;
  o.dgp.r = 5;
  o.dgp.seed = 4;
  o.run.fit.hyper.trees = 5;
  o.run.fit.schedule = {40, 20, 1};
  o.run.chains = 2;
  o.run.seed = 11;
  return o;
}

}  // namespace

TEST_CASE("one replication equals the single pipeline") {
  auto o = tiny_experiment();
  o.replications = 1;
  const auto results = run_experiment(o);
  REQUIRE(results.size() == 1);
  REQUIRE(results[0].error.empty());
  REQUIRE(results[0].sparse.has_value());

  Rng rng = RngStream(o.dgp.seed, 1000).engine();
  const auto tt = generate(o.dgp, rng);
  RunConfig run = o.run;
  run.seed = results[0].fit_seed;
  const auto single = fit_arm(tt.train, tt.test, run, o.summary);
  CHECK(single.report.beta_mean == results[0].sparse->report.beta_mean);
  CHECK(single.report.lambda_median == results[0].sparse->report.lambda_median);
  REQUIRE(single.metrics.has_value());
  CHECK(single.metrics->mean_mse == results[0].sparse->metrics->mean_mse);
}

TEST_CASE("ablation freezes every local scale in params.csv") {
  auto o = tiny_experiment();
  o.replications = 1;
  o.run_ablation = true;
  o.dgp.p = 5;
  o.dgp.experiment = Experiment::exp2;
  const auto dir = fs::temp_directory_path() / "vcshrink_test_experiment";
  fs::remove_all(dir);
  o.output = dir;
  const auto results = run_experiment(o);
  REQUIRE(results[0].ablation.has_value());
  write_experiment(dir, results);
  CHECK(fs::exists(dir / "aggregate.csv"));
  CHECK(fs::exists(dir / "experiment.json"));

  const auto chains = read_run(dir / "rep_1" / "ablation" / "run");
  for (const auto& c : chains) {
    for (std::size_t d = 0; d < c.draws(); ++d) {
      for (std::size_t j = 0; j <= c.p; ++j) CHECK(c.lambda_at(d, j) == c.lambda_at(0, j));
      CHECK(c.tau[d] == c.tau[0]);
      CHECK(c.c2[d] == c.c2[0]);
    }
  }
  const auto sparse = read_run(dir / "rep_1" / "sparse" / "run");
  bool moved = false;
  for (std::size_t d = 1; d < sparse[0].draws(); ++d) moved = moved || sparse[0].lambda_at(d, 1) != sparse[0].lambda_at(0, 1);
  CHECK(moved);
}

TEST_CASE("coefficient names") {
  CHECK(coefficient_names(2, {}) == std::vector<std::string>{"intercept", "x_1", "x_2"});
  CHECK(coefficient_names(1, {"dose"}) == std::vector<std::string>{"intercept", "dose"});
}
