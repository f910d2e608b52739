#include "vcshrink/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "vcshrink/errors.hpp"

namespace vcshrink {

using nlohmann::json;

namespace {

// Constant-shrinkage baseline: every ensemble sum gets prior variance 1/4
// on the standardized response scale, so each leaf has variance 1/(4 M).
constexpr double kConstantShrinkageS2 = 0.25;

template <class T>
T get_as(const json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type");
  }
}

}  // namespace

FitOptions RunConfig::effective_fit() const {
  FitOptions out = fit;
  if (ablation == Ablation::constant_shrinkage) out.sampler.fixed_s2 = kConstantShrinkageS2;
  return out;
}

void RunConfig::validate() const {
  if (chains < 1) throw ConfigError("chains must be >= 1");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  fit.schedule.validate();
  fit.sampler.validate();
  fit.hyper.tree_prior.validate();
}

int default_thread_count() {
  if (const char* env = std::getenv("VCSHRINK_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return 1;
}

std::string to_string(Ablation a) { return a == Ablation::none ? "none" : "constant-shrinkage"; }

Ablation ablation_from_string(std::string_view s) {
  if (s == "none") return Ablation::none;
  if (s == "constant-shrinkage") return Ablation::constant_shrinkage;
  throw ConfigError("unknown ablation '" + std::string(s) + "'");
}

RunConfig parse_config(std::string_view json_text, RunConfig base) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig c = std::move(base);
  auto& h = c.fit.hyper;
  auto& s = c.fit.sampler;
  for (const auto& [key, v] : root.items()) {
    if (key == "seed") c.seed = get_as<std::uint64_t>(v, key);
    else if (key == "chains") c.chains = get_as<int>(v, key);
    else if (key == "threads") c.threads = get_as<int>(v, key);
    else if (key == "ablation") c.ablation = ablation_from_string(get_as<std::string>(v, key));
    else if (key == "iterations") c.fit.schedule.iterations = get_as<int>(v, key);
    else if (key == "burn") c.fit.schedule.burn = get_as<int>(v, key);
    else if (key == "thin") c.fit.schedule.thin = get_as<int>(v, key);
    else if (key == "standardize") c.fit.standardize = get_as<bool>(v, key);
    else if (key == "trees") h.trees = get_as<int>(v, key);
    else if (key == "trees_per_ensemble") h.trees_per_ensemble = get_as<std::vector<int>>(v, key);
    else if (key == "nu") h.nu = get_as<double>(v, key);
    else if (key == "noise_scale") {
      if (v.is_null()) h.noise_scale.reset(); else h.noise_scale = get_as<double>(v, key);
    } else if (key == "nu_c") h.nu_c = get_as<double>(v, key);
    else if (key == "s_c") h.s_c = get_as<double>(v, key);
    else if (key == "tau0") {
      if (v.is_null()) h.tau0.reset(); else h.tau0 = get_as<double>(v, key);
    } else if (key == "eta_a") h.eta_a = get_as<double>(v, key);
    else if (key == "eta_b") h.eta_b = get_as<double>(v, key);
    else if (key == "tree_prior") {
      const auto name = get_as<std::string>(v, key);
      if (name == "quadratic") h.tree_prior.variant = TreePriorVariant::quadratic;
      else if (name == "exponential") h.tree_prior.variant = TreePriorVariant::exponential;
      else throw ConfigError("tree_prior must be 'quadratic' or 'exponential'");
    } else if (key == "tree_base") h.tree_prior.base = get_as<double>(v, key);
    else if (key == "tree_gamma") h.tree_prior.gamma = get_as<double>(v, key);
    else if (key == "max_depth") h.tree_prior.max_depth = get_as<int>(v, key);
    else if (key == "cutpoints") {
      const auto name = get_as<std::string>(v, key);
      if (name == "uniform") h.cutpoints = CutpointMode::uniform;
      else if (name == "midpoints") h.cutpoints = CutpointMode::midpoints;
      else throw ConfigError("cutpoints must be 'uniform' or 'midpoints'");
    } else if (key == "eta_step") s.eta_step = get_as<double>(v, key);
    else if (key == "slice_width") s.slice.width = get_as<double>(v, key);
    else if (key == "slice_max_step_out") s.slice.max_step_out = get_as<int>(v, key);
    else if (key == "c2_update") {
      const auto name = get_as<std::string>(v, key);
      if (name == "conjugate") s.c2_update = C2Update::conjugate;
      else if (name == "exact") s.c2_update = C2Update::exact;
      else throw ConfigError("c2_update must be 'conjugate' or 'exact'");
    } else if (key == "fixed_s2") {
      if (v.is_null()) s.fixed_s2.reset(); else s.fixed_s2 = get_as<double>(v, key);
    } else if (key == "coherence_interval") s.coherence_interval = get_as<int>(v, key);
    else throw ConfigError("unknown config key '" + key + "'");
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

std::string config_to_json(const RunConfig& c) {
  const auto& h = c.fit.hyper;
  const auto& s = c.fit.sampler;
  json j;
  j["seed"] = c.seed;
  j["chains"] = c.chains;
  j["threads"] = c.threads;
  j["ablation"] = to_string(c.ablation);
  j["iterations"] = c.fit.schedule.iterations;
  j["burn"] = c.fit.schedule.burn;
  j["thin"] = c.fit.schedule.thin;
  j["standardize"] = c.fit.standardize;
  j["trees"] = h.trees;
  if (!h.trees_per_ensemble.empty()) j["trees_per_ensemble"] = h.trees_per_ensemble;
  j["nu"] = h.nu;
  j["noise_scale"] = h.noise_scale ? json(*h.noise_scale) : json(nullptr);
  j["nu_c"] = h.nu_c;
  j["s_c"] = h.s_c;
  j["tau0"] = h.tau0 ? json(*h.tau0) : json(nullptr);
  j["eta_a"] = h.eta_a;
  j["eta_b"] = h.eta_b;
  j["tree_prior"] = h.tree_prior.variant == TreePriorVariant::quadratic ? "quadratic" : "exponential";
  j["tree_base"] = h.tree_prior.base;
  j["tree_gamma"] = h.tree_prior.gamma;
  j["max_depth"] = h.tree_prior.max_depth;
  j["cutpoints"] = h.cutpoints == CutpointMode::uniform ? "uniform" : "midpoints";
  j["eta_step"] = s.eta_step;
  j["slice_width"] = s.slice.width;
  j["slice_max_step_out"] = s.slice.max_step_out;
  j["c2_update"] = s.c2_update == C2Update::conjugate ? "conjugate" : "exact";
  j["fixed_s2"] = s.fixed_s2 ? json(*s.fixed_s2) : json(nullptr);
  j["coherence_interval"] = s.coherence_interval;
  return j.dump(2);
}

}  // namespace vcshrink
