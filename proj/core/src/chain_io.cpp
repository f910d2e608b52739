#include "vcshrink/chain_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

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

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

Table read_table(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + " is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  t.header = split(line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() != t.header.size()) {
      throw DataError(path.string() + " line " + std::to_string(lineno) + ": expected " +
                      std::to_string(t.header.size()) + " cells");
    }
    std::vector<double> row(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const auto& s = cells[c];
      const auto res = std::from_chars(s.data(), s.data() + s.size(), row[c]);
      if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw DataError(path.string() + " line " + std::to_string(lineno) + " column '" + t.header[c] +
                        "': not a number");
      }
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

json counters_json(const MoveCounters& c) {
  return {{"grow_proposed", c.grow_proposed},
          {"grow_accepted", c.grow_accepted},
          {"prune_proposed", c.prune_proposed},
          {"prune_accepted", c.prune_accepted},
          {"invalid_proposals", c.invalid_proposals},
          {"nonfinite", c.nonfinite},
          {"eta_proposed", c.eta_proposed},
          {"eta_accepted", c.eta_accepted},
          {"eta_nonfinite", c.eta_nonfinite},
          {"tree_acceptance", c.tree_acceptance()},
          {"eta_acceptance", c.eta_acceptance()}};
}

MoveCounters counters_from(const json& j) {
  MoveCounters c;
  c.grow_proposed = j.at("grow_proposed").get<std::uint64_t>();
  c.grow_accepted = j.at("grow_accepted").get<std::uint64_t>();
  c.prune_proposed = j.at("prune_proposed").get<std::uint64_t>();
  c.prune_accepted = j.at("prune_accepted").get<std::uint64_t>();
  c.invalid_proposals = j.at("invalid_proposals").get<std::uint64_t>();
  c.nonfinite = j.at("nonfinite").get<std::uint64_t>();
  c.eta_proposed = j.at("eta_proposed").get<std::uint64_t>();
  c.eta_accepted = j.at("eta_accepted").get<std::uint64_t>();
  c.eta_nonfinite = j.at("eta_nonfinite").get<std::uint64_t>();
  return c;
}

// Echo of the resolved hyperparameters in the config-file vocabulary.
json hyper_json(const Hyperparameters& h) {
  RunConfig rc;
  rc.fit.hyper = h;
  auto all = json::parse(config_to_json(rc));
  json out;
  for (const char* key : {"trees", "trees_per_ensemble", "nu", "noise_scale", "nu_c", "s_c", "tau0", "eta_a",
                          "eta_b", "tree_prior", "tree_base", "tree_gamma", "max_depth", "cutpoints"}) {
    if (all.contains(key)) out[key] = all[key];
  }
  return out;
}

}  // namespace

void write_chain(const ChainOutput& c, const fs::path& dir) {
  fs::create_directories(dir);
  const std::size_t ens = c.p + 1;
  const std::size_t draws = c.draws();
  {
    auto out = open_out(dir / "params.csv");
    out << "draw,sigma2,tau,c2";
    for (std::size_t j = 0; j < ens; ++j) out << ",lambda_" << j;
    for (std::size_t j = 0; j < ens; ++j) out << ",eta_" << j;
    out << '\n';
    for (std::size_t d = 0; d < draws; ++d) {
      out << d + 1 << ',' << format_double(c.sigma2[d]) << ',' << format_double(c.tau[d]) << ','
          << format_double(c.c2[d]);
      for (std::size_t j = 0; j < ens; ++j) out << ',' << format_double(c.lambda_at(d, j));
      for (std::size_t j = 0; j < ens; ++j) out << ',' << format_double(c.eta_at(d, j));
      out << '\n';
    }
  }
  for (std::size_t j = 0; j < ens; ++j) {
    auto out = open_out(dir / ("theta_" + std::to_string(j) + ".csv"));
    out << "draw";
    for (std::size_t k = 0; k < c.r; ++k) out << ",theta_" << k + 1;
    out << '\n';
    for (std::size_t d = 0; d < draws; ++d) {
      out << d + 1;
      for (std::size_t k = 0; k < c.r; ++k) out << ',' << format_double(c.theta_at(d, j, k));
      out << '\n';
    }
  }
  {
    auto out = open_out(dir / "leaves.csv");
    out << "draw";
    for (std::size_t j = 0; j < ens; ++j) out << ",leaves_" << j;
    out << '\n';
    for (std::size_t d = 0; d < draws; ++d) {
      out << d + 1;
      for (std::size_t j = 0; j < ens; ++j) out << ',' << format_double(c.leaf_count[d * ens + j]);
      out << '\n';
    }
  }
  {
    auto out = open_out(dir / "beta_grid.csv");
    out << "draw,point,j,value\n";
    for (std::size_t d = 0; d < draws; ++d) {
      for (std::size_t g = 0; g < c.grid_size; ++g) {
        for (std::size_t j = 0; j < ens; ++j) {
          out << d + 1 << ',' << g + 1 << ',' << j << ',' << format_double(c.beta_at(d, j, g)) << '\n';
        }
      }
    }
  }
  json meta;
  meta["seed"] = c.seed;
  meta["stream"] = c.stream;
  meta["p"] = c.p;
  meta["r"] = c.r;
  meta["grid_size"] = c.grid_size;
  meta["draws"] = draws;
  meta["schedule"] = {{"iterations", c.schedule.iterations}, {"burn", c.schedule.burn}, {"thin", c.schedule.thin}};
  meta["response"] = {{"center", c.response.center}, {"scale", c.response.scale}};
  meta["hyper"] = hyper_json(c.hyper);
  meta["counters"] = counters_json(c.counters);
  meta["runtime_seconds"] = c.runtime_seconds;
  meta["seconds_per_sweep"] = c.seconds_per_sweep;
  open_out(dir / "meta.json") << meta.dump(2) << '\n';
}

ChainOutput read_chain(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("chain directory not found: " + dir.string());
  const json meta = read_json(dir / "meta.json");
  ChainOutput c;
  try {
    c.seed = meta.at("seed").get<std::uint64_t>();
    c.stream = meta.at("stream").get<std::uint64_t>();
    c.p = meta.at("p").get<std::size_t>();
    c.r = meta.at("r").get<std::size_t>();
    c.grid_size = meta.at("grid_size").get<std::size_t>();
    const auto& s = meta.at("schedule");
    c.schedule = {s.at("iterations").get<int>(), s.at("burn").get<int>(), s.at("thin").get<int>()};
    c.response = {meta.at("response").at("center").get<double>(), meta.at("response").at("scale").get<double>()};
    c.hyper = parse_config(meta.at("hyper").dump()).fit.hyper;
    c.counters = counters_from(meta.at("counters"));
    c.runtime_seconds = meta.at("runtime_seconds").get<double>();
    c.seconds_per_sweep = meta.at("seconds_per_sweep").get<double>();
  } catch (const json::exception& e) {
    throw DataError((dir / "meta.json").string() + ": " + e.what());
  }
  const std::size_t ens = c.p + 1;
  const Table params = read_table(dir / "params.csv");
  if (params.header.size() != 4 + 2 * ens) throw DataError("params.csv has the wrong number of columns");
  const std::size_t draws = params.rows.size();
  for (const auto& row : params.rows) {
    c.sigma2.push_back(row[1]);
    c.tau.push_back(row[2]);
    c.c2.push_back(row[3]);
    c.lambda.insert(c.lambda.end(), row.begin() + 4, row.begin() + 4 + static_cast<std::ptrdiff_t>(ens));
    c.eta.insert(c.eta.end(), row.begin() + 4 + static_cast<std::ptrdiff_t>(ens), row.end());
  }
  std::vector<Table> thetas;
  for (std::size_t j = 0; j < ens; ++j) {
    thetas.push_back(read_table(dir / ("theta_" + std::to_string(j) + ".csv")));
    if (thetas.back().rows.size() != draws || thetas.back().header.size() != c.r + 1) {
      throw DataError("theta_" + std::to_string(j) + ".csv does not match params.csv");
    }
  }
  c.theta.reserve(draws * ens * c.r);
  for (std::size_t d = 0; d < draws; ++d) {
    for (std::size_t j = 0; j < ens; ++j) {
      c.theta.insert(c.theta.end(), thetas[j].rows[d].begin() + 1, thetas[j].rows[d].end());
    }
  }
  const Table leaves = read_table(dir / "leaves.csv");
  if (leaves.rows.size() != draws) throw DataError("leaves.csv does not match params.csv");
  for (const auto& row : leaves.rows) c.leaf_count.insert(c.leaf_count.end(), row.begin() + 1, row.end());
  const Table beta = read_table(dir / "beta_grid.csv");
  if (beta.rows.size() != draws * ens * c.grid_size) throw DataError("beta_grid.csv does not match params.csv");
  c.beta.assign(draws * ens * c.grid_size, 0.0);
  for (const auto& row : beta.rows) {
    const auto d = static_cast<std::size_t>(row[0]) - 1;
    const auto g = static_cast<std::size_t>(row[1]) - 1;
    const auto j = static_cast<std::size_t>(row[2]);
    if (d >= draws || g >= c.grid_size || j >= ens) throw DataError("beta_grid.csv index out of range");
    c.beta[(d * ens + j) * c.grid_size + g] = row[3];
  }
  return c;
}

void write_run(const fs::path& dir, const RunConfig& config, const RunInfo& info, const Eigen::MatrixXd& grid,
               const std::vector<ChainOutput>& chains) {
  fs::create_directories(dir);
  {
    auto out = open_out(dir / "grid.csv");
    for (Eigen::Index k = 0; k < grid.cols(); ++k) out << (k ? "," : "") << "z_" << k + 1;
    out << '\n';
    for (Eigen::Index g = 0; g < grid.rows(); ++g) {
      for (Eigen::Index k = 0; k < grid.cols(); ++k) out << (k ? "," : "") << format_double(grid(g, k));
      out << '\n';
    }
  }
  json meta;
  meta["config"] = json::parse(config_to_json(config));
  meta["data_path"] = info.data_path;
  meta["grid_path"] = info.grid_path;
  meta["n"] = info.n;
  if (!info.z_min.empty()) {
    meta["z_min"] = info.z_min;
    meta["z_max"] = info.z_max;
  }
  meta["wall_seconds"] = info.wall_seconds;
  if (!info.error.empty()) meta["error"] = info.error;
  json list = json::array();
  for (std::size_t k = 0; k < chains.size(); ++k) {
    const auto name = "chain_" + std::to_string(k);
    write_chain(chains[k], dir / name);
    list.push_back({{"dir", name},
                    {"stream", chains[k].stream},
                    {"tree_acceptance", chains[k].counters.tree_acceptance()},
                    {"eta_acceptance", chains[k].counters.eta_acceptance()},
                    {"runtime_seconds", chains[k].runtime_seconds},
                    {"seconds_per_sweep", chains[k].seconds_per_sweep}});
  }
  meta["chains"] = list;
  if (!chains.empty()) meta["hyper"] = hyper_json(chains.front().hyper);
  open_out(dir / "meta.json") << meta.dump(2) << '\n';
}

std::vector<ChainOutput> read_run(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("run directory not found: " + dir.string());
  const json meta = read_json(dir / "meta.json");
  std::vector<ChainOutput> out;
  if (!meta.contains("chains")) throw DataError("run meta.json lists no chains");
  for (const auto& entry : meta["chains"]) out.push_back(read_chain(dir / entry.at("dir").get<std::string>()));
  if (out.empty()) throw DataError("run directory holds no chains");
  return out;
}

Eigen::MatrixXd read_grid(const fs::path& dir) {
  const Table t = read_table(dir / "grid.csv");
  Eigen::MatrixXd g(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(t.header.size()));
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    for (std::size_t k = 0; k < t.header.size(); ++k) {
      g(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = t.rows[i][k];
    }
  }
  return g;
}

RunConfig read_run_config(const fs::path& dir) {
  const json meta = read_json(dir / "meta.json");
  if (!meta.contains("config")) throw DataError("run meta.json has no config");
  return parse_config(meta["config"].dump());
}

}  // namespace vcshrink
