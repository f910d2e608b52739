#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "vcshrink/gibbs.hpp"

namespace vcshrink {

enum class Ablation { none, constant_shrinkage };

/// Everything needed to reproduce a fit. Serialized as a flat JSON object;
/// see README for the key list. Absent keys keep their defaults.
struct RunConfig {
  FitOptions fit;
  std::uint64_t seed = 1;
  int chains = 4;
  int threads = 1;
  Ablation ablation = Ablation::none;

  /// Sampler options after applying the ablation.
  FitOptions effective_fit() const;
  void validate() const;
};

/// Default worker count: VCSHRINK_THREADS when set, else 1.
int default_thread_count();

/// Overlays the keys of a JSON object onto `base`. Unknown keys and
/// ill-typed values raise ConfigError.
RunConfig parse_config(std::string_view json_text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});
std::string config_to_json(const RunConfig& config);

std::string to_string(Ablation a);
Ablation ablation_from_string(std::string_view s);

}  // namespace vcshrink
