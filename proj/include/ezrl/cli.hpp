#ifndef EZRL_CLI_HPP
#define EZRL_CLI_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "ezrl/config.hpp"
#include "ezrl/data.hpp"
#include "ezrl/metrics.hpp"

namespace ezrl {

/// Commands are plain functions over a RunConfig so they can be driven from
/// main(), from tests, and from the ablation grid alike. All artifacts land
/// under cfg.out_dir:
///
///   splits/manifest.csv, splits/split_01/{train,test,history}.csv
///   runs/<algo>_<objective>/split_01_seed_0/{checkpoint.txt,diagnostics.csv}
///   results/<algo>_<objective>/{split_01_seed_0_metrics.csv,aggregate.csv,aggregate.txt}
///   ablate/w<window>_k<K>/..., ablate/cells.csv, ablate/table.txt
///   report.txt

struct IngestResult {
  std::vector<SplitSpec> splits;
  std::string splits_dir;
  std::string manifest_path;
};

/// Prices -> per-split winsorized return files plus a manifest. Clamp
/// quantiles are fitted on each split's train range only and applied to both
/// ranges; history.csv repeats the train range as the warmup data that
/// evaluation prepends to the test segment.
IngestResult cmd_ingest(const RunConfig& cfg);

std::vector<SplitSpec> load_manifest(const std::string& manifest_path);

struct TrainResult {
  struct Item {
    int split_id = 0;
    std::uint64_t seed = 0;
    std::string checkpoint_path;
    std::string diagnostics_path;
    long frames = 0;
    double final_log_wealth = 0.0;
  };
  std::vector<Item> items;
};

/// One trainer per (split, seed), rng stream job_seed(seed, split); writes a
/// checkpoint and an update log per job. Rerunning with the same config and
/// seed reproduces the checkpoint byte for byte.
TrainResult cmd_train(const RunConfig& cfg);

struct EvaluateResult {
  struct Item {
    int split_id = 0;
    std::uint64_t seed = 0;
    MetricsReport metrics;
    std::string metrics_path;
  };
  std::vector<Item> items;
  AggregateReport aggregate;
  std::string results_dir;
};

/// One deterministic rollout per (split, seed): the policy mean over the
/// whole test segment, with the split's history prepended for the trailing
/// covariance and bootstrap windows. Writes per-item metrics files and the
/// cross-item aggregate.
EvaluateResult cmd_evaluate(const RunConfig& cfg);

struct AblateResult {
  struct Cell {
    int window = 0;
    int k = 0;
    AggregateReport aggregate;
  };
  std::vector<Cell> cells;
  std::string cells_path;
  std::string table_path;
};

/// Trains and evaluates the recursive PPO agent over the grid
/// (episode length window) x (CE sample count K), sharing the ingested
/// splits and the per-(split, seed) rng streams, so a 1x1 grid reproduces a
/// plain train + evaluate run at the same settings.
AblateResult cmd_ablate(const RunConfig& cfg,
                        const std::vector<int>& windows = {183, 122, 61, 21},
                        const std::vector<int>& ks = {1, 2, 5, 10, 20});

/// Renders the stored aggregates (runs table + ablation table if present)
/// without recomputing anything; returns the text and writes report.txt.
/// Throws std::runtime_error when out_dir holds no results.
std::string cmd_report(const std::string& out_dir);

/// Output directory precedence: --out flag, then the EZRL_OUT environment
/// variable, then the config value.
std::string resolve_out_dir(const RunConfig& cfg, const std::string& cli_out);

/// "<algorithm>_<objective>", the run directory name.
std::string run_tag(const AgentConfig& cfg);

}  // namespace ezrl

#endif  // EZRL_CLI_HPP
