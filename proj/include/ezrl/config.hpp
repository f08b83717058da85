#ifndef EZRL_CONFIG_HPP
#define EZRL_CONFIG_HPP

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "ezrl/agents.hpp"
#include "ezrl/env.hpp"

namespace ezrl {

/// Sectioned key-value document: [section] headers, key = value lines,
/// comments starting with # or ;. Sections and keys are kept sorted, so a
/// serialize/parse round trip is the identity.
struct IniDoc {
  std::map<std::string, std::map<std::string, std::string>> sections;
};

IniDoc parse_ini(std::istream& in);
IniDoc parse_ini_file(const std::string& path);
std::string serialize_ini(const IniDoc& doc);

/// One run description: data locations, split plan, environment block,
/// agent and network hyperparameters, and the run plan.
struct RunConfig {
  std::string prices_path;
  std::string out_dir = "out";

  int n_splits = 10;
  double ratio_min = 0.5;
  double ratio_max = 0.9;
  double winsor_q = 0.005;

  int num_assets = 0;  // 0 skips the count check
  EpisodeConfig episode;

  AgentConfig agent;

  std::vector<std::uint64_t> seeds{0};
  std::vector<int> split_filter;  // empty = every split in the manifest
  int workers = 1;

  void validate() const;
};

/// Typed view of an IniDoc; unknown sections or keys are rejected so typos
/// fail loudly. Missing keys keep their defaults.
RunConfig run_config_from_ini(const IniDoc& doc);
RunConfig load_run_config(const std::string& path);

/// Canonical serialization: every field, fixed section and key order.
IniDoc run_config_to_ini(const RunConfig& cfg);
std::string serialize_run_config(const RunConfig& cfg);

/// Deterministic per-job stream: one seed per (base seed, split) pair.
std::uint64_t job_seed(std::uint64_t base, int split_id);

}  // namespace ezrl

#endif  // EZRL_CONFIG_HPP
