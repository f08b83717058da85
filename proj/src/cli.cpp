#include "ezrl/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "ezrl/agents.hpp"
#include "ezrl/env.hpp"
#include "ezrl/policy_prior.hpp"

namespace fs = std::filesystem;

namespace ezrl {

namespace {

std::string g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string opt17(const std::optional<double>& v) {
  return v.has_value() ? g17(*v) : std::string("NA");
}

std::string pad(const std::string& s, size_t w) {
  return s.size() >= w ? s + " " : s + std::string(w - s.size(), ' ');
}

std::ofstream open_out(const std::string& path) {
  fs::create_directories(fs::path(path).parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

std::string split_dir_name(int split_id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "split_%02d", split_id);
  return buf;
}

std::string job_dir_name(int split_id, std::uint64_t seed) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "split_%02d_seed_%llu", split_id,
                static_cast<unsigned long long>(seed));
  return buf;
}

void run_jobs(int workers, std::vector<std::function<void()>>& jobs) {
  if (workers <= 1 || jobs.size() <= 1) {
    for (auto& job : jobs) job();
    return;
  }
  std::atomic<size_t> next{0};
  std::vector<std::exception_ptr> errors(jobs.size());
  auto worker = [&] {
    for (size_t i = next.fetch_add(1); i < jobs.size(); i = next.fetch_add(1)) {
      try {
        jobs[i]();
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const size_t n = std::min<size_t>(size_t(workers), jobs.size());
  pool.reserve(n);
  for (size_t i = 0; i < n; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// The per-step reward must match the objective it trains, except for the
/// recursive objective where the reward is informational only.
EpisodeConfig episode_for(const RunConfig& cfg) {
  EpisodeConfig ep = cfg.episode;
  if (cfg.agent.objective == Objective::naive)
    ep.reward_kind = RewardKind::naive;
  else if (cfg.agent.objective == Objective::markowitz)
    ep.reward_kind = RewardKind::markowitz;
  return ep;
}

void check_assets(const RunConfig& cfg, const ReturnsTable& table,
                  const std::string& where) {
  if (cfg.num_assets > 0 && table.n_assets() != Index(cfg.num_assets))
    throw std::invalid_argument(where + ": table has " +
                                std::to_string(table.n_assets()) +
                                " assets, config expects " +
                                std::to_string(cfg.num_assets));
}

std::vector<SplitSpec> select_splits(const RunConfig& cfg,
                                     const std::string& splits_dir) {
  auto all = load_manifest(splits_dir + "/manifest.csv");
  if (cfg.split_filter.empty()) return all;
  std::vector<SplitSpec> out;
  for (int id : cfg.split_filter) {
    bool found = false;
    for (const auto& s : all)
      if (s.split_id == id) {
        out.push_back(s);
        found = true;
      }
    if (!found)
      throw std::invalid_argument("split " + std::to_string(id) +
                                  " is not in the manifest");
  }
  return out;
}

ReturnsTable concat_tables(const ReturnsTable& a, const ReturnsTable& b) {
  if (a.assets != b.assets)
    throw std::runtime_error("split files disagree on the asset list");
  ReturnsTable out;
  out.assets = a.assets;
  out.dates = a.dates;
  out.dates.insert(out.dates.end(), b.dates.begin(), b.dates.end());
  out.returns.resize(a.n_rows() + b.n_rows(), a.n_assets());
  out.returns.topRows(a.n_rows()) = a.returns;
  out.returns.bottomRows(b.n_rows()) = b.returns;
  out.validate();
  return out;
}

void write_metrics_csv(const MetricsReport& m, const std::string& path) {
  auto out = open_out(path);
  out << "metric,value\n";
  out << "sr," << opt17(m.sr) << "\n";
  out << "sortino," << opt17(m.sortino) << "\n";
  out << "calmar," << opt17(m.calmar) << "\n";
  out << "mdd_pct," << g17(m.mdd_pct) << "\n";
  out << "cr_pct," << g17(m.cr_pct) << "\n";
  out << "vol_pct," << opt17(m.vol_pct) << "\n";
  out << "ir," << opt17(m.ir) << "\n";
}

void write_aggregate_entry(std::ostream& out, const char* name,
                           const AggregateEntry& e) {
  out << name << ",";
  out << (e.mean.has_value() ? g17(*e.mean) : std::string("NA")) << ","
      << g17(e.std_dev) << "," << e.n_defined << "," << e.n_excluded << "\n";
}

void write_aggregate_csv(const AggregateReport& agg, const std::string& path) {
  auto out = open_out(path);
  out << "metric,mean,std,n_defined,n_excluded\n";
  write_aggregate_entry(out, "sr", agg.sr);
  write_aggregate_entry(out, "sortino", agg.sortino);
  write_aggregate_entry(out, "calmar", agg.calmar);
  write_aggregate_entry(out, "mdd_pct", agg.mdd_pct);
  write_aggregate_entry(out, "cr_pct", agg.cr_pct);
  write_aggregate_entry(out, "vol_pct", agg.vol_pct);
  write_aggregate_entry(out, "ir", agg.ir);
}

std::string agg_cell(const AggregateEntry& e) {
  if (!e.mean.has_value()) return "NA";
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%.4g +/- %.3g", *e.mean, e.std_dev);
  return buf;
}

/// Header and one row per run, the six reported columns in fixed order.
std::string render_runs_table(
    const std::vector<std::pair<std::string, AggregateReport>>& rows) {
  size_t name_w = 4;
  for (const auto& [name, agg] : rows) name_w = std::max(name_w, name.size());
  name_w += 2;
  const size_t col_w = 18;
  std::string out;
  out += pad("run", name_w);
  for (const char* h : {"SR", "Sortino", "Calmar", "MDD%", "CR%", "Vol%"})
    out += pad(h, col_w);
  out += "\n";
  for (const auto& [name, agg] : rows) {
    out += pad(name, name_w);
    out += pad(agg_cell(agg.sr), col_w);
    out += pad(agg_cell(agg.sortino), col_w);
    out += pad(agg_cell(agg.calmar), col_w);
    out += pad(agg_cell(agg.mdd_pct), col_w);
    out += pad(agg_cell(agg.cr_pct), col_w);
    out += pad(agg_cell(agg.vol_pct), col_w);
    out += "\n";
  }
  return out;
}

std::string render_ablation_table(const std::vector<AblateResult::Cell>& cells) {
  std::vector<int> windows, ks;
  for (const auto& c : cells) {
    if (std::find(windows.begin(), windows.end(), c.window) == windows.end())
      windows.push_back(c.window);
    if (std::find(ks.begin(), ks.end(), c.k) == ks.end()) ks.push_back(c.k);
  }
  const size_t col_w = 14;
  std::string out = pad("window", col_w);
  for (int k : ks) out += pad("k=" + std::to_string(k), col_w);
  out += "\n";
  for (int w : windows) {
    out += pad(std::to_string(w), col_w);
    for (int k : ks) {
      std::string cell = "NA";
      for (const auto& c : cells)
        if (c.window == w && c.k == k && c.aggregate.sr.mean.has_value()) {
          char buf[64];
          std::snprintf(buf, sizeof(buf), "%.4g", *c.aggregate.sr.mean);
          cell = buf;
        }
      out += pad(cell, col_w);
    }
    out += "\n";
  }
  return out;
}

std::vector<std::string> csv_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::stringstream ss(line);
  while (std::getline(ss, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

AggregateReport parse_aggregate_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::string line;
  std::getline(in, line);  // header
  AggregateReport agg;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = csv_fields(line);
    if (f.size() != 5)
      throw std::runtime_error("malformed aggregate row in " + path);
    AggregateEntry e;
    if (f[1] != "NA") e.mean = std::stod(f[1]);
    e.std_dev = std::stod(f[2]);
    e.n_defined = std::stoi(f[3]);
    e.n_excluded = std::stoi(f[4]);
    e.single = (e.n_defined == 1);
    if (f[0] == "sr") agg.sr = e;
    else if (f[0] == "sortino") agg.sortino = e;
    else if (f[0] == "calmar") agg.calmar = e;
    else if (f[0] == "mdd_pct") agg.mdd_pct = e;
    else if (f[0] == "cr_pct") agg.cr_pct = e;
    else if (f[0] == "vol_pct") agg.vol_pct = e;
    else if (f[0] == "ir") agg.ir = e;
    else throw std::runtime_error("unknown metric '" + f[0] + "' in " + path);
  }
  return agg;
}

TrainResult train_into(const RunConfig& cfg, const std::string& splits_dir,
                       const std::string& runs_dir) {
  cfg.validate();
  const auto splits = select_splits(cfg, splits_dir);
  TrainResult result;
  result.items.resize(splits.size() * cfg.seeds.size());

  std::vector<std::function<void()>> jobs;
  size_t idx = 0;
  for (const auto& split : splits) {
    for (std::uint64_t seed : cfg.seeds) {
      const size_t slot = idx++;
      jobs.push_back([&, split, seed, slot] {
        const std::string split_dir =
            splits_dir + "/" + split_dir_name(split.split_id);
        ReturnsTable table = read_returns_csv(split_dir + "/train.csv");
        check_assets(cfg, table, "cmd_train");
        const EpisodeConfig ep = episode_for(cfg);
        if (Index(ep.episode_length) > table.n_rows())
          throw std::invalid_argument(
              "cmd_train: split " + std::to_string(split.split_id) + " has " +
              std::to_string(table.n_rows()) +
              " train rows, shorter than episode_length " +
              std::to_string(ep.episode_length));

        AgentConfig acfg = cfg.agent;
        acfg.seed = job_seed(seed, split.split_id);
        PortfolioEnv env(table, 0, table.n_rows(), ep);
        Trainer trainer(acfg, std::move(env));
        if (acfg.init_from_prior && acfg.algorithm != Algorithm::random) {
          const PriorRule rule = trainer.fit_prior_from_history();
          trainer.init_actor_from_prior(rule, acfg.prior_init_steps);
        }

        const std::string job_dir =
            runs_dir + "/" + job_dir_name(split.split_id, seed);
        fs::create_directories(job_dir);
        auto diag = open_out(job_dir + "/diagnostics.csv");
        const auto updates = trainer.train(&diag);
        diag.close();
        trainer.save(job_dir + "/checkpoint.txt");

        auto& item = result.items[slot];
        item.split_id = split.split_id;
        item.seed = seed;
        item.checkpoint_path = job_dir + "/checkpoint.txt";
        item.diagnostics_path = job_dir + "/diagnostics.csv";
        item.frames = trainer.frames();
        item.final_log_wealth =
            updates.empty() ? 0.0 : updates.back().final_log_wealth;
      });
    }
  }
  run_jobs(cfg.workers, jobs);
  return result;
}

EvaluateResult evaluate_into(const RunConfig& cfg, const std::string& splits_dir,
                             const std::string& runs_dir,
                             const std::string& results_dir) {
  cfg.validate();
  const auto splits = select_splits(cfg, splits_dir);
  EvaluateResult result;
  result.results_dir = results_dir;
  result.items.resize(splits.size() * cfg.seeds.size());

  std::vector<std::function<void()>> jobs;
  size_t idx = 0;
  for (const auto& split : splits) {
    for (std::uint64_t seed : cfg.seeds) {
      const size_t slot = idx++;
      jobs.push_back([&, split, seed, slot] {
        const std::string split_dir =
            splits_dir + "/" + split_dir_name(split.split_id);
        const ReturnsTable history = read_returns_csv(split_dir + "/history.csv");
        const ReturnsTable test = read_returns_csv(split_dir + "/test.csv");
        check_assets(cfg, test, "cmd_evaluate");
        const ReturnsTable full = concat_tables(history, test);

        const std::string checkpoint = runs_dir + "/" +
                                       job_dir_name(split.split_id, seed) +
                                       "/checkpoint.txt";
        if (!fs::exists(checkpoint))
          throw std::runtime_error("cmd_evaluate: missing checkpoint " +
                                   checkpoint + "; run train first");

        AgentConfig acfg = cfg.agent;
        acfg.seed = job_seed(seed, split.split_id);
        const EpisodeConfig ep = episode_for(cfg);
        PortfolioEnv env(full, history.n_rows(), full.n_rows(), ep);
        Trainer trainer(acfg, env);
        trainer.load(checkpoint);

        std::mt19937 eval_rng(
            std::uint32_t(job_seed(seed, split.split_id) & 0xffffffffu));
        PolicyFn policy;
        if (acfg.algorithm == Algorithm::random) {
          policy = [&](const EnvState&) {
            return random_agent_action(full.n_assets(), acfg.random_action_std,
                                       eval_rng);
          };
        } else {
          policy = [&](const EnvState& s) { return trainer.act_mean(s); };
        }
        const Trajectory traj = run_episode(env, policy, EpisodeMode::eval,
                                            eval_rng);

        ReturnSeries series;
        series.returns.resize(traj.size());
        for (Index t = 0; t < traj.size(); ++t)
          series.returns[t] = traj.steps[size_t(t)].portfolio_return;
        const MetricsReport metrics = compute_metrics(series);

        const std::string path = results_dir + "/" +
                                 job_dir_name(split.split_id, seed) +
                                 "_metrics.csv";
        write_metrics_csv(metrics, path);

        auto& item = result.items[slot];
        item.split_id = split.split_id;
        item.seed = seed;
        item.metrics = metrics;
        item.metrics_path = path;
      });
    }
  }
  run_jobs(cfg.workers, jobs);

  std::vector<MetricsReport> reports;
  reports.reserve(result.items.size());
  for (const auto& item : result.items) reports.push_back(item.metrics);
  result.aggregate = aggregate_splits(reports);
  write_aggregate_csv(result.aggregate, results_dir + "/aggregate.csv");
  auto txt = open_out(results_dir + "/aggregate.txt");
  txt << render_runs_table({{run_tag(cfg.agent), result.aggregate}});
  return result;
}

}  // namespace

std::string run_tag(const AgentConfig& cfg) {
  return std::string(to_string(cfg.algorithm)) + "_" + to_string(cfg.objective);
}

std::string resolve_out_dir(const RunConfig& cfg, const std::string& cli_out) {
  if (!cli_out.empty()) return cli_out;
  if (const char* env = std::getenv("EZRL_OUT"); env != nullptr && *env != '\0')
    return env;
  return cfg.out_dir;
}

IngestResult cmd_ingest(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.prices_path.empty())
    throw std::invalid_argument("cmd_ingest: no prices file configured");
  const PriceTable prices = load_prices(cfg.prices_path);
  const ReturnsTable raw = compute_returns(prices, 0.0);
  check_assets(cfg, raw, "cmd_ingest");

  IngestResult result;
  result.splits = make_splits(raw, cfg.n_splits, cfg.ratio_min, cfg.ratio_max);
  result.splits_dir = cfg.out_dir + "/splits";
  result.manifest_path = result.splits_dir + "/manifest.csv";

  for (const auto& split : result.splits) {
    const Index tr0 = split.train_begin, tr1 = split.train_end;
    const Index te0 = split.test_begin, te1 = split.test_end;
    ReturnsTable train_t{
        {raw.dates.begin() + tr0, raw.dates.begin() + tr1},
        raw.assets,
        raw.returns.middleRows(tr0, tr1 - tr0)};
    ReturnsTable test_t{
        {raw.dates.begin() + te0, raw.dates.begin() + te1},
        raw.assets,
        raw.returns.middleRows(te0, te1 - te0)};
    if (cfg.winsor_q > 0.0) {
      const WinsorBounds bounds = fit_winsor_bounds(train_t.returns, cfg.winsor_q);
      train_t.returns = apply_winsor_bounds(train_t.returns, bounds);
      test_t.returns = apply_winsor_bounds(test_t.returns, bounds);
    }
    const std::string dir =
        result.splits_dir + "/" + split_dir_name(split.split_id);
    fs::create_directories(dir);
    write_returns_csv(train_t, dir + "/train.csv");
    write_returns_csv(test_t, dir + "/test.csv");
    write_returns_csv(train_t, dir + "/history.csv");
  }

  auto man = open_out(result.manifest_path);
  man << "split_id,train_ratio,train_begin,train_end,test_begin,test_end\n";
  for (const auto& s : result.splits)
    man << s.split_id << "," << g17(s.train_ratio) << "," << s.train_begin
        << "," << s.train_end << "," << s.test_begin << "," << s.test_end
        << "\n";
  return result;
}

std::vector<SplitSpec> load_manifest(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in)
    throw std::runtime_error("missing manifest " + manifest_path +
                             "; run ingest first");
  std::string line;
  std::getline(in, line);  // header
  std::vector<SplitSpec> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = csv_fields(line);
    if (f.size() != 6)
      throw std::runtime_error("malformed manifest row: " + line);
    SplitSpec s;
    s.split_id = std::stoi(f[0]);
    s.train_ratio = std::stod(f[1]);
    s.train_begin = std::stol(f[2]);
    s.train_end = std::stol(f[3]);
    s.test_begin = std::stol(f[4]);
    s.test_end = std::stol(f[5]);
    out.push_back(s);
  }
  if (out.empty())
    throw std::runtime_error("manifest " + manifest_path + " has no rows");
  return out;
}

TrainResult cmd_train(const RunConfig& cfg) {
  return train_into(cfg, cfg.out_dir + "/splits",
                    cfg.out_dir + "/runs/" + run_tag(cfg.agent));
}

EvaluateResult cmd_evaluate(const RunConfig& cfg) {
  const std::string tag = run_tag(cfg.agent);
  return evaluate_into(cfg, cfg.out_dir + "/splits",
                       cfg.out_dir + "/runs/" + tag,
                       cfg.out_dir + "/results/" + tag);
}

AblateResult cmd_ablate(const RunConfig& cfg, const std::vector<int>& windows,
                        const std::vector<int>& ks) {
  cfg.validate();
  if (windows.empty() || ks.empty())
    throw std::invalid_argument("cmd_ablate: the window and K lists must not be empty");
  for (int w : windows)
    if (w < 1) throw std::invalid_argument("cmd_ablate: windows must be >= 1");
  for (int k : ks)
    if (k < 1) throw std::invalid_argument("cmd_ablate: K must be >= 1");

  const std::string splits_dir = cfg.out_dir + "/splits";
  const std::string ablate_dir = cfg.out_dir + "/ablate";

  AblateResult result;
  result.cells.resize(windows.size() * ks.size());
  result.cells_path = ablate_dir + "/cells.csv";
  result.table_path = ablate_dir + "/table.txt";

  std::vector<std::function<void()>> jobs;
  size_t idx = 0;
  for (int w : windows) {
    for (int k : ks) {
      const size_t slot = idx++;
      jobs.push_back([&, w, k, slot] {
        RunConfig cell = cfg;
        cell.agent.algorithm = Algorithm::ppo;
        cell.agent.objective = Objective::recursive;
        cell.episode.episode_length = w;
        cell.agent.ez.ce_samples = k;
        cell.workers = 1;
        const std::string cell_dir =
            ablate_dir + "/w" + std::to_string(w) + "_k" + std::to_string(k);
        train_into(cell, splits_dir, cell_dir + "/runs");
        const EvaluateResult ev =
            evaluate_into(cell, splits_dir, cell_dir + "/runs",
                          cell_dir + "/results");
        result.cells[slot] = AblateResult::Cell{w, k, ev.aggregate};
      });
    }
  }
  run_jobs(cfg.workers, jobs);

  auto cells = open_out(result.cells_path);
  cells << "window,k,sr_mean,sr_std,n_defined,n_excluded\n";
  for (const auto& c : result.cells) {
    cells << c.window << "," << c.k << ","
          << (c.aggregate.sr.mean.has_value() ? g17(*c.aggregate.sr.mean)
                                              : std::string("NA"))
          << "," << g17(c.aggregate.sr.std_dev) << "," << c.aggregate.sr.n_defined
          << "," << c.aggregate.sr.n_excluded << "\n";
  }
  cells.close();

  auto table = open_out(result.table_path);
  table << render_ablation_table(result.cells);
  return result;
}

std::string cmd_report(const std::string& out_dir) {
  const std::string results_root = out_dir + "/results";
  std::vector<std::pair<std::string, AggregateReport>> rows;
  if (fs::is_directory(results_root)) {
    std::vector<std::string> tags;
    for (const auto& entry : fs::directory_iterator(results_root))
      if (entry.is_directory()) tags.push_back(entry.path().filename().string());
    std::sort(tags.begin(), tags.end());
    for (const auto& tag : tags) {
      const std::string agg_path = results_root + "/" + tag + "/aggregate.csv";
      if (fs::exists(agg_path)) rows.emplace_back(tag, parse_aggregate_csv(agg_path));
    }
  }

  std::vector<AblateResult::Cell> cells;
  const std::string cells_path = out_dir + "/ablate/cells.csv";
  if (fs::exists(cells_path)) {
    std::ifstream in(cells_path);
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto f = csv_fields(line);
      if (f.size() != 6)
        throw std::runtime_error("malformed ablation row: " + line);
      AblateResult::Cell c;
      c.window = std::stoi(f[0]);
      c.k = std::stoi(f[1]);
      if (f[2] != "NA") {
        c.aggregate.sr.mean = std::stod(f[2]);
        c.aggregate.sr.std_dev = std::stod(f[3]);
      }
      c.aggregate.sr.n_defined = std::stoi(f[4]);
      c.aggregate.sr.n_excluded = std::stoi(f[5]);
      cells.push_back(c);
    }
  }

  if (rows.empty() && cells.empty())
    throw std::runtime_error("cmd_report: no results under " + out_dir);

  std::string text;
  if (!rows.empty()) {
    text += "run results (mean +/- sample std over split x seed runs)\n\n";
    text += render_runs_table(rows);
  }
  if (!cells.empty()) {
    if (!text.empty()) text += "\n";
    text += "ablation: mean SR by training window (rows) and CE samples (columns)\n\n";
    text += render_ablation_table(cells);
  }

  auto out = open_out(out_dir + "/report.txt");
  out << text;
  return text;
}

}  // namespace ezrl
