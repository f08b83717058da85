#include "ezrl/config.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ezrl {

namespace {

std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double to_double(const std::string& section, const std::string& key,
                 const std::string& v) {
  try {
    size_t pos = 0;
    double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return x;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: [" + section + "] " + key +
                                " is not a number: '" + v + "'");
  }
}

long to_long(const std::string& section, const std::string& key,
             const std::string& v) {
  try {
    size_t pos = 0;
    long x = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return x;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: [" + section + "] " + key +
                                " is not an integer: '" + v + "'");
  }
}

bool to_bool(const std::string& section, const std::string& key,
             const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("config: [" + section + "] " + key +
                              " is not a boolean: '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string cur;
  std::stringstream ss(v);
  while (std::getline(ss, cur, ',')) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

template <typename T>
std::string join_list(const std::vector<T>& xs) {
  std::string out;
  for (size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(xs[i]);
  }
  return out;
}

}  // namespace

IniDoc parse_ini(std::istream& in) {
  IniDoc doc;
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw std::runtime_error("config: unterminated section header at line " +
                                 std::to_string(lineno));
      section = trim(t.substr(1, t.size() - 2));
      if (section.empty())
        throw std::runtime_error("config: empty section name at line " +
                                 std::to_string(lineno));
      doc.sections[section];
      continue;
    }
    const size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config: expected key = value at line " +
                               std::to_string(lineno));
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty())
      throw std::runtime_error("config: empty key at line " +
                               std::to_string(lineno));
    if (section.empty())
      throw std::runtime_error("config: key before any section at line " +
                               std::to_string(lineno));
    doc.sections[section][key] = value;
  }
  return doc;
}

IniDoc parse_ini_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  return parse_ini(in);
}

std::string serialize_ini(const IniDoc& doc) {
  std::string out;
  bool first = true;
  for (const auto& [name, kv] : doc.sections) {
    if (!first) out += "\n";
    first = false;
    out += "[" + name + "]\n";
    for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  }
  return out;
}

void RunConfig::validate() const {
  episode.validate();
  agent.validate();
  if (n_splits < 1)
    throw std::invalid_argument("RunConfig: splits must be >= 1");
  if (!(ratio_min > 0.0 && ratio_min < 1.0) ||
      !(ratio_max > 0.0 && ratio_max < 1.0) || ratio_min > ratio_max)
    throw std::invalid_argument(
        "RunConfig: need 0 < ratio_min <= ratio_max < 1");
  if (!(winsor_q >= 0.0 && winsor_q < 0.5))
    throw std::invalid_argument("RunConfig: winsor_q must lie in [0, 0.5)");
  if (num_assets < 0)
    throw std::invalid_argument("RunConfig: num_assets must be >= 0");
  if (workers < 1)
    throw std::invalid_argument("RunConfig: workers must be >= 1");
  if (seeds.empty())
    throw std::invalid_argument("RunConfig: seeds must not be empty");
  for (int s : split_filter)
    if (s < 1)
      throw std::invalid_argument("RunConfig: split ids are 1-based");
}

namespace {

using Section = std::map<std::string, std::string>;

class SectionReader {
 public:
  SectionReader(const IniDoc& doc, std::string name) : name_(std::move(name)) {
    auto it = doc.sections.find(name_);
    if (it != doc.sections.end()) kv_ = &it->second;
  }

  bool has(const std::string& key) const {
    if (kv_ && kv_->count(key)) {
      seen_.push_back(key);
      return true;
    }
    return false;
  }
  std::string str(const std::string& key) const { return kv_->at(key); }
  double num(const std::string& key) const {
    return to_double(name_, key, kv_->at(key));
  }
  long integer(const std::string& key) const {
    return to_long(name_, key, kv_->at(key));
  }
  bool boolean(const std::string& key) const {
    return to_bool(name_, key, kv_->at(key));
  }

  void check_consumed() const {
    if (!kv_) return;
    for (const auto& [k, v] : *kv_) {
      bool ok = false;
      for (const auto& s : seen_)
        if (s == k) ok = true;
      if (!ok)
        throw std::invalid_argument("config: unknown key '" + k +
                                    "' in section [" + name_ + "]");
    }
  }

 private:
  std::string name_;
  const Section* kv_ = nullptr;
  mutable std::vector<std::string> seen_;
};

RewardKind parse_reward(const std::string& v) {
  if (v == "naive") return RewardKind::naive;
  if (v == "markowitz") return RewardKind::markowitz;
  if (v == "none") return RewardKind::none;
  throw std::invalid_argument("config: unknown reward kind '" + v + "'");
}

const char* reward_name(RewardKind k) {
  switch (k) {
    case RewardKind::naive: return "naive";
    case RewardKind::markowitz: return "markowitz";
    case RewardKind::none: return "none";
  }
  return "naive";
}

}  // namespace

RunConfig run_config_from_ini(const IniDoc& doc) {
  static const std::vector<std::string> known = {
      "data", "env", "agent", "ppo", "recursive", "network", "run"};
  for (const auto& [name, kv] : doc.sections) {
    bool ok = false;
    for (const auto& k : known)
      if (k == name) ok = true;
    if (!ok)
      throw std::invalid_argument("config: unknown section [" + name + "]");
  }

  RunConfig cfg;

  SectionReader data(doc, "data");
  if (data.has("prices")) cfg.prices_path = data.str("prices");
  data.check_consumed();

  SectionReader env(doc, "env");
  if (env.has("max_frame")) cfg.agent.max_frames = env.integer("max_frame");
  if (env.has("episode_length"))
    cfg.episode.episode_length = int(env.integer("episode_length"));
  if (env.has("num_assets")) cfg.num_assets = int(env.integer("num_assets"));
  if (env.has("reward")) cfg.episode.reward_kind = parse_reward(env.str("reward"));
  if (env.has("markowitz_lambda"))
    cfg.episode.markowitz_lambda = env.num("markowitz_lambda");
  if (env.has("varcov_window"))
    cfg.episode.varcov_window = int(env.integer("varcov_window"));
  env.check_consumed();

  SectionReader agent(doc, "agent");
  if (agent.has("algorithm"))
    cfg.agent.algorithm = parse_algorithm(agent.str("algorithm"));
  if (agent.has("objective"))
    cfg.agent.objective = parse_objective(agent.str("objective"));
  agent.check_consumed();

  SectionReader ppo(doc, "ppo");
  if (ppo.has("gamma")) cfg.agent.discount = ppo.num("gamma");
  if (ppo.has("lam")) cfg.agent.lambda = ppo.num("lam");
  if (ppo.has("clip_eps")) cfg.agent.clip_eps = ppo.num("clip_eps");
  if (ppo.has("time_horizon"))
    cfg.agent.time_horizon = int(ppo.integer("time_horizon"));
  if (ppo.has("minibatch_size"))
    cfg.agent.minibatch_size = int(ppo.integer("minibatch_size"));
  if (ppo.has("training_epoch"))
    cfg.agent.training_epochs = int(ppo.integer("training_epoch"));
  if (ppo.has("val_loss_coef"))
    cfg.agent.value_loss_coef = ppo.num("val_loss_coef");
  if (ppo.has("entropy_coef")) cfg.agent.entropy_coef = ppo.num("entropy_coef");
  ppo.check_consumed();

  SectionReader rec(doc, "recursive");
  if (rec.has("beta")) cfg.agent.ez.beta = rec.num("beta");
  if (rec.has("gamma")) cfg.agent.ez.gamma = rec.num("gamma");
  if (rec.has("psi")) cfg.agent.ez.psi = rec.num("psi");
  if (rec.has("kappa_init")) cfg.agent.ez.kappa = rec.num("kappa_init");
  if (rec.has("ce_samples"))
    cfg.agent.ez.ce_samples = int(rec.integer("ce_samples"));
  if (rec.has("ce_window")) cfg.agent.ce_window = int(rec.integer("ce_window"));
  if (rec.has("learn_kappa")) cfg.agent.learn_kappa = rec.boolean("learn_kappa");
  rec.check_consumed();

  SectionReader net(doc, "network");
  if (net.has("hid_layers")) {
    cfg.agent.hid_layers.clear();
    for (const auto& tok : split_list(net.str("hid_layers")))
      cfg.agent.hid_layers.push_back(Index(to_long("network", "hid_layers", tok)));
  }
  if (net.has("lr")) cfg.agent.lr = net.num("lr");
  if (net.has("init_log_std")) cfg.agent.init_log_std = net.num("init_log_std");
  net.check_consumed();

  SectionReader run(doc, "run");
  if (run.has("out_dir")) cfg.out_dir = run.str("out_dir");
  if (run.has("splits")) cfg.n_splits = int(run.integer("splits"));
  if (run.has("ratio_min")) cfg.ratio_min = run.num("ratio_min");
  if (run.has("ratio_max")) cfg.ratio_max = run.num("ratio_max");
  if (run.has("winsor_q")) cfg.winsor_q = run.num("winsor_q");
  if (run.has("seeds")) {
    cfg.seeds.clear();
    for (const auto& tok : split_list(run.str("seeds")))
      cfg.seeds.push_back(std::uint64_t(to_long("run", "seeds", tok)));
  }
  if (run.has("split_filter")) {
    cfg.split_filter.clear();
    for (const auto& tok : split_list(run.str("split_filter")))
      cfg.split_filter.push_back(int(to_long("run", "split_filter", tok)));
  }
  if (run.has("workers")) cfg.workers = int(run.integer("workers"));
  if (run.has("normalize_advantages"))
    cfg.agent.normalize_advantages = run.boolean("normalize_advantages");
  if (run.has("init_from_prior"))
    cfg.agent.init_from_prior = run.boolean("init_from_prior");
  if (run.has("prior_init_steps"))
    cfg.agent.prior_init_steps = int(run.integer("prior_init_steps"));
  if (run.has("prior_window"))
    cfg.agent.prior_window = int(run.integer("prior_window"));
  if (run.has("random_action_std"))
    cfg.agent.random_action_std = run.num("random_action_std");
  run.check_consumed();

  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  return run_config_from_ini(parse_ini_file(path));
}

IniDoc run_config_to_ini(const RunConfig& cfg) {
  IniDoc doc;
  auto& data = doc.sections["data"];
  data["prices"] = cfg.prices_path;

  auto& env = doc.sections["env"];
  env["max_frame"] = std::to_string(cfg.agent.max_frames);
  env["episode_length"] = std::to_string(cfg.episode.episode_length);
  env["num_assets"] = std::to_string(cfg.num_assets);
  env["reward"] = reward_name(cfg.episode.reward_kind);
  env["markowitz_lambda"] = fmt_double(cfg.episode.markowitz_lambda);
  env["varcov_window"] = std::to_string(cfg.episode.varcov_window);

  auto& agent = doc.sections["agent"];
  agent["algorithm"] = to_string(cfg.agent.algorithm);
  agent["objective"] = to_string(cfg.agent.objective);

  auto& ppo = doc.sections["ppo"];
  ppo["gamma"] = fmt_double(cfg.agent.discount);
  ppo["lam"] = fmt_double(cfg.agent.lambda);
  ppo["clip_eps"] = fmt_double(cfg.agent.clip_eps);
  ppo["time_horizon"] = std::to_string(cfg.agent.time_horizon);
  ppo["minibatch_size"] = std::to_string(cfg.agent.minibatch_size);
  ppo["training_epoch"] = std::to_string(cfg.agent.training_epochs);
  ppo["val_loss_coef"] = fmt_double(cfg.agent.value_loss_coef);
  ppo["entropy_coef"] = fmt_double(cfg.agent.entropy_coef);

  auto& rec = doc.sections["recursive"];
  rec["beta"] = fmt_double(cfg.agent.ez.beta);
  rec["gamma"] = fmt_double(cfg.agent.ez.gamma);
  rec["psi"] = fmt_double(cfg.agent.ez.psi);
  rec["kappa_init"] = fmt_double(cfg.agent.ez.kappa);
  rec["ce_samples"] = std::to_string(cfg.agent.ez.ce_samples);
  rec["ce_window"] = std::to_string(cfg.agent.ce_window);
  rec["learn_kappa"] = cfg.agent.learn_kappa ? "true" : "false";

  auto& net = doc.sections["network"];
  net["hid_layers"] = join_list(cfg.agent.hid_layers);
  net["lr"] = fmt_double(cfg.agent.lr);
  net["init_log_std"] = fmt_double(cfg.agent.init_log_std);

  auto& run = doc.sections["run"];
  run["out_dir"] = cfg.out_dir;
  run["splits"] = std::to_string(cfg.n_splits);
  run["ratio_min"] = fmt_double(cfg.ratio_min);
  run["ratio_max"] = fmt_double(cfg.ratio_max);
  run["winsor_q"] = fmt_double(cfg.winsor_q);
  run["seeds"] = join_list(cfg.seeds);
  run["split_filter"] = join_list(cfg.split_filter);
  run["workers"] = std::to_string(cfg.workers);
  run["normalize_advantages"] = cfg.agent.normalize_advantages ? "true" : "false";
  run["init_from_prior"] = cfg.agent.init_from_prior ? "true" : "false";
  run["prior_init_steps"] = std::to_string(cfg.agent.prior_init_steps);
  run["prior_window"] = std::to_string(cfg.agent.prior_window);
  run["random_action_std"] = fmt_double(cfg.agent.random_action_std);

  return doc;
}

std::string serialize_run_config(const RunConfig& cfg) {
  return serialize_ini(run_config_to_ini(cfg));
}

std::uint64_t job_seed(std::uint64_t base, int split_id) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (std::uint64_t(split_id) + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace ezrl
