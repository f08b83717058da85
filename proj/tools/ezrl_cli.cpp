#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ezrl/cli.hpp"
#include "ezrl/config.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  long seed = -1;
  int workers = 0;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required) {
  auto* c = cmd->add_option("--config", args.config_path, "run config file");
  if (config_required) c->required();
  cmd->add_option("--out", args.out_dir,
                  "output directory (overrides EZRL_OUT and the config)");
  cmd->add_option("--seed", args.seed, "replace the config seed list");
  cmd->add_option("--workers", args.workers, "parallel jobs (default: config)");
}

ezrl::RunConfig load_with_overrides(const CommonArgs& args) {
  ezrl::RunConfig cfg = ezrl::load_run_config(args.config_path);
  cfg.out_dir = ezrl::resolve_out_dir(cfg, args.out_dir);
  if (args.seed >= 0) cfg.seeds = {static_cast<std::uint64_t>(args.seed)};
  if (args.workers > 0) cfg.workers = args.workers;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"risk-sensitive portfolio RL pipeline"};
  app.require_subcommand(1);

  CommonArgs ingest_args, train_args, eval_args, ablate_args;
  std::string prices_override;
  std::vector<int> windows{183, 122, 61, 21};
  std::vector<int> ks{1, 2, 5, 10, 20};
  std::string report_dir;

  auto* ingest = app.add_subcommand("ingest", "prices -> per-split return files");
  add_common(ingest, ingest_args, true);
  ingest->add_option("--prices", prices_override, "price csv (overrides config)");

  auto* train = app.add_subcommand("train", "train one agent per (split, seed)");
  add_common(train, train_args, true);

  auto* evaluate = app.add_subcommand(
      "evaluate", "deterministic test rollouts + metrics");
  add_common(evaluate, eval_args, true);

  auto* ablate = app.add_subcommand(
      "ablate", "train/evaluate grid over episode window x CE samples");
  add_common(ablate, ablate_args, true);
  ablate->add_option("--windows", windows, "episode length grid");
  ablate->add_option("--ks", ks, "CE sample count grid");

  auto* report = app.add_subcommand("report", "render stored result tables");
  report->add_option("out_dir", report_dir, "output directory of earlier commands")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (ingest->parsed()) {
      ezrl::RunConfig cfg = load_with_overrides(ingest_args);
      if (!prices_override.empty()) cfg.prices_path = prices_override;
      const auto res = ezrl::cmd_ingest(cfg);
      std::printf("wrote %zu splits under %s\n", res.splits.size(),
                  res.splits_dir.c_str());
    } else if (train->parsed()) {
      const ezrl::RunConfig cfg = load_with_overrides(train_args);
      const auto res = ezrl::cmd_train(cfg);
      for (const auto& item : res.items)
        std::printf("split %02d seed %llu: %ld frames, final log wealth %.6f\n",
                    item.split_id,
                    static_cast<unsigned long long>(item.seed), item.frames,
                    item.final_log_wealth);
    } else if (evaluate->parsed()) {
      const ezrl::RunConfig cfg = load_with_overrides(eval_args);
      const auto res = ezrl::cmd_evaluate(cfg);
      std::printf("wrote %zu metric files under %s\n", res.items.size(),
                  res.results_dir.c_str());
    } else if (ablate->parsed()) {
      const ezrl::RunConfig cfg = load_with_overrides(ablate_args);
      const auto res = ezrl::cmd_ablate(cfg, windows, ks);
      std::printf("wrote %zu ablation cells, table at %s\n", res.cells.size(),
                  res.table_path.c_str());
    } else if (report->parsed()) {
      std::fputs(ezrl::cmd_report(report_dir).c_str(), stdout);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
