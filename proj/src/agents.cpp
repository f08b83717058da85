#include "ezrl/agents.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <utility>

namespace ezrl {

Algorithm parse_algorithm(const std::string& name) {
  if (name == "ppo") return Algorithm::ppo;
  if (name == "a2c") return Algorithm::a2c;
  if (name == "reinforce") return Algorithm::reinforce;
  if (name == "random") return Algorithm::random;
  throw std::invalid_argument("unknown algorithm '" + name +
                              "' (expected ppo, a2c, reinforce, or random)");
}

Objective parse_objective(const std::string& name) {
  if (name == "naive") return Objective::naive;
  if (name == "markowitz") return Objective::markowitz;
  if (name == "recursive") return Objective::recursive;
  throw std::invalid_argument("unknown objective '" + name +
                              "' (expected naive, markowitz, or recursive)");
}

const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::ppo: return "ppo";
    case Algorithm::a2c: return "a2c";
    case Algorithm::reinforce: return "reinforce";
    case Algorithm::random: return "random";
  }
  return "?";
}

const char* to_string(Objective o) {
  switch (o) {
    case Objective::naive: return "naive";
    case Objective::markowitz: return "markowitz";
    case Objective::recursive: return "recursive";
  }
  return "?";
}

void AgentConfig::validate() const {
  if (objective == Objective::recursive && !critic_based())
    throw std::invalid_argument(
        "AgentConfig: the recursive objective needs a critic and pairs only with ppo or a2c");
  if (!(discount >= 0.0 && discount <= 1.0))
    throw std::invalid_argument("AgentConfig: discount must lie in [0,1]");
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw std::invalid_argument("AgentConfig: lambda must lie in [0,1]");
  if (!(clip_eps > 0.0 && clip_eps < 1.0))
    throw std::invalid_argument("AgentConfig: clip_eps must lie in (0,1)");
  if (time_horizon < 1) throw std::invalid_argument("AgentConfig: time_horizon must be >= 1");
  if (minibatch_size < 1) throw std::invalid_argument("AgentConfig: minibatch_size must be >= 1");
  if (training_epochs < 1) throw std::invalid_argument("AgentConfig: training_epochs must be >= 1");
  if (!(value_loss_coef >= 0.0))
    throw std::invalid_argument("AgentConfig: value_loss_coef must be >= 0");
  if (!(entropy_coef >= 0.0)) throw std::invalid_argument("AgentConfig: entropy_coef must be >= 0");
  if (max_frames < 1) throw std::invalid_argument("AgentConfig: max_frames must be >= 1");
  if (!(lr > 0.0)) throw std::invalid_argument("AgentConfig: lr must be positive");
  if (ce_window < 1) throw std::invalid_argument("AgentConfig: ce_window must be >= 1");
  if (prior_window < 1) throw std::invalid_argument("AgentConfig: prior_window must be >= 1");
  if (prior_init_steps < 0)
    throw std::invalid_argument("AgentConfig: prior_init_steps must be >= 0");
  if (!(random_action_std >= 0.0))
    throw std::invalid_argument("AgentConfig: random_action_std must be >= 0");
  for (Index h : hid_layers)
    if (h < 1) throw std::invalid_argument("AgentConfig: hidden widths must be >= 1");
  ez.validate();
}

VectorXd encode_observation(const EnvState& s) {
  VectorXd obs(s.prev_weights.size() + 1);
  obs(0) = s.log_wealth;
  obs.tail(s.prev_weights.size()) = s.prev_weights;
  return obs;
}

void fill_critic_targets(Rollout& roll, const AgentConfig& cfg) {
  for (auto& st : roll.steps) {
    if (cfg.objective == Objective::recursive) {
      if (!(st.ez_target > 0.0))
        throw std::invalid_argument("fill_critic_targets: missing recursive target");
      st.target = st.ez_target;
    } else {
      st.target = st.reward + cfg.discount * st.next_value * (st.done ? 0.0 : 1.0);
    }
  }
}

void fill_advantages(Rollout& roll, const AgentConfig& cfg) {
  const Index t_count = roll.size();
  if (t_count == 0) throw std::invalid_argument("fill_advantages: empty rollout");
  VectorXd adv(t_count);
  if (cfg.objective == Objective::recursive) {
    std::vector<StepRecord> recs(static_cast<size_t>(t_count));
    for (Index t = 0; t < t_count; ++t) {
      const RolloutStep& st = roll.steps[size_t(t)];
      recs[size_t(t)] = StepRecord{st.value, st.ez_target, st.reward, st.next_value, st.done};
    }
    AaeConfig acfg;
    acfg.beta = cfg.ez.beta;
    acfg.lambda = cfg.lambda;
    acfg.gamma_risk = cfg.ez.gamma;
    acfg.psi = cfg.ez.psi;
    adv = aae(recs, acfg);
  } else {
    VectorXd rewards(t_count), values(t_count), next_values(t_count);
    std::vector<bool> dones(static_cast<size_t>(t_count));
    for (Index t = 0; t < t_count; ++t) {
      const RolloutStep& st = roll.steps[size_t(t)];
      rewards(t) = st.reward;
      values(t) = st.value;
      next_values(t) = st.next_value;
      dones[size_t(t)] = st.done;
    }
    adv = gae(rewards, values, next_values, dones, cfg.discount, cfg.lambda);
  }
  if (cfg.normalize_advantages) adv = normalize_advantages(adv);
  for (Index t = 0; t < t_count; ++t) roll.steps[size_t(t)].advantage = adv(t);
}

double ez_target_kappa_grad(double log_wealth, double ce, const EzParams& p,
                            double kappa) {
  p.validate();
  if (!(kappa > 0.0)) throw std::domain_error("ez_target_kappa_grad: kappa must be positive");
  if (!(ce > 0.0)) throw std::domain_error("ez_target_kappa_grad: ce must be positive");
  const double rho = p.rho();
  const double log_c = std::log(kappa) + log_wealth;
  const double target = ces_aggregate(std::exp(log_c), ce, p);
  if (std::abs(rho) < kEpsRho) return (1.0 - p.beta) * target / kappa;
  const double log_grad = std::log(1.0 - p.beta) + (1.0 - rho) * std::log(target) +
                          rho * log_c - std::log(kappa);
  return std::exp(log_grad);
}

ActionIncrement random_agent_action(Index n_assets, double std_dev,
                                    std::mt19937& rng) {
  if (n_assets < 1) throw std::invalid_argument("random_agent_action: need at least one asset");
  if (!(std_dev >= 0.0))
    throw std::invalid_argument("random_agent_action: std_dev must be >= 0");
  std::normal_distribution<double> unit(0.0, 1.0);
  VectorXd delta(n_assets);
  for (Index i = 0; i < n_assets; ++i) delta(i) = std_dev * unit(rng);
  return ActionIncrement{delta};
}

void write_diagnostics_header(std::ostream& out) {
  out << "update,frames,policy_loss,value_loss,entropy,clip_fraction,approx_kl,"
         "mean_advantage,mean_value,mean_target,final_log_wealth\n";
}

void write_diagnostics_row(std::ostream& out, const UpdateDiagnostics& d) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "%d,%ld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                d.update_index, d.frames, d.policy_loss, d.value_loss, d.entropy,
                d.clip_fraction, d.approx_kl, d.mean_advantage, d.mean_value,
                d.mean_target, d.final_log_wealth);
  out << buf;
}

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

MatrixXd obs_matrix(const std::vector<const RolloutStep*>& batch) {
  MatrixXd x(batch.front()->obs.size(), Index(batch.size()));
  for (size_t b = 0; b < batch.size(); ++b) x.col(Index(b)) = batch[b]->obs;
  return x;
}

}  // namespace

Trainer::Trainer(AgentConfig cfg, PortfolioEnv env)
    : cfg_(std::move(cfg)),
      env_(std::move(env)),
      rng_(std::mt19937::result_type(cfg_.seed)),
      actor_opt_(cfg_.lr),
      critic_opt_(cfg_.lr) {
  cfg_.validate();
  n_assets_ = env_.n_assets();
  const Index obs_dim = n_assets_ + 1;
  const Index actor_out = n_assets_ + (cfg_.learn_kappa ? 1 : 0);
  actor_ = Mlp(obs_dim, cfg_.hid_layers, actor_out);
  critic_ = Mlp(obs_dim, cfg_.hid_layers, 1);
  head_ = GaussianPolicyHead(n_assets_, cfg_.init_log_std);
  actor_.init(rng_);
  critic_.init(rng_);
}

PriorRule Trainer::fit_prior_from_history() const {
  const MatrixXd rets = env_.table().returns.topRows(env_.seg_end());
  const MatrixXd xs = build_state_series(rets, cfg_.prior_window);
  const MatrixXd logs = log_excess_returns(rets);
  PriorRule rule;
  rule.model = fit_var(xs, logs);
  const MatrixXd centered = rets.rowwise() - rets.colwise().mean();
  rule.sigma = centered.transpose() * centered / double(std::max<Index>(1, rets.rows() - 1));
  rule.params = cfg_.ez;
  return rule;
}

void Trainer::init_actor_from_prior(const PriorRule& rule, int steps) {
  if (steps <= 0) return;
  const MatrixXd xs = build_state_series(env_.table().returns, cfg_.prior_window);
  const Index lo = env_.seg_begin();
  const Index span = env_.seg_end() - lo;
  Adam pre_opt(cfg_.lr);
  VectorXd alpha_prev = VectorXd::Constant(n_assets_, 1.0 / double(n_assets_));
  EnvState s = initial_state(n_assets_);
  for (int it = 0; it < steps; ++it) {
    const Index t = lo + Index(it) % span;
    const VectorXd x = xs.row(std::max<Index>(0, t - 1)).transpose();
    const VectorXd alpha_target = project_simplex(rule.weights(x));
    s.prev_weights = alpha_prev;
    const VectorXd obs = encode_observation(s);
    actor_.zero_grad();
    const MatrixXd out = actor_.forward(obs);
    MatrixXd grad = MatrixXd::Zero(out.rows(), 1);
    grad.col(0).head(n_assets_) =
        out.col(0).head(n_assets_) - (alpha_target - alpha_prev);
    actor_.backward(grad);
    pre_opt.step(actor_.params());
    alpha_prev = alpha_target;
  }
}

double Trainer::critic_value(const VectorXd& obs) const {
  return positive_value(critic_.forward_inference(obs)(0, 0));
}

VectorXd Trainer::actor_mean(const VectorXd& obs) const {
  return actor_.forward_inference(obs).col(0).head(n_assets_);
}

double Trainer::value_of(const EnvState& s) const {
  return critic_value(encode_observation(s));
}

ActionIncrement Trainer::act_mean(const EnvState& s) const {
  if (cfg_.algorithm == Algorithm::random)
    return ActionIncrement{VectorXd::Zero(n_assets_)};
  return ActionIncrement{actor_mean(encode_observation(s))};
}

ActionIncrement Trainer::act_sample(const EnvState& s) {
  if (cfg_.algorithm == Algorithm::random)
    return random_agent_action(n_assets_, cfg_.random_action_std, rng_);
  return ActionIncrement{head_.sample(actor_mean(encode_observation(s)), rng_).action};
}

double Trainer::kappa_of(const EnvState& s) const {
  if (!cfg_.learn_kappa) return cfg_.ez.kappa;
  const MatrixXd out = actor_.forward_inference(encode_observation(s));
  return sigmoid(out(n_assets_, 0));
}

void Trainer::ensure_episode() {
  if (episode_started_ && !env_.episode_over()) return;
  const Index span = env_.seg_end() - env_.seg_begin();
  const Index slack = span - Index(env_.config().episode_length);
  if (slack < 0)
    throw std::invalid_argument("Trainer: segment shorter than one episode");
  std::uniform_int_distribution<Index> offset(0, slack);
  env_.reset(offset(rng_));
  episode_started_ = true;
}

Rollout Trainer::collect(int horizon) {
  if (horizon < 1) throw std::invalid_argument("collect: horizon must be >= 1");
  const bool recursive = cfg_.objective == Objective::recursive;
  const bool with_critic = cfg_.critic_based();
  Rollout roll;
  roll.steps.reserve(size_t(horizon));
  for (int i = 0; i < horizon; ++i) {
    ensure_episode();
    RolloutStep st;
    const EnvState s = env_.state();
    st.obs = encode_observation(s);
    st.log_wealth = s.log_wealth;
    st.kappa = cfg_.ez.kappa;

    if (cfg_.algorithm == Algorithm::random) {
      st.action = random_agent_action(n_assets_, cfg_.random_action_std, rng_).delta_weights;
    } else {
      const VectorXd out = actor_.forward_inference(st.obs).col(0);
      const auto smp = head_.sample(out.head(n_assets_), rng_);
      st.action = smp.action;
      st.log_prob = smp.log_prob;
      if (cfg_.learn_kappa) st.kappa = sigmoid(out(n_assets_));
    }

    if (with_critic) st.value = critic_value(st.obs);

    if (recursive) {
      const VectorXd applied = project_simplex(s.prev_weights + st.action);
      const Index t_now = std::max<Index>(0, env_.cursor() - 1);
      const MatrixXd rows = sample_return_rows(env_.table(), cfg_.ce_window, t_now,
                                               cfg_.ez.ce_samples, rng_);
      const auto candidates = env_.peek_next_states(applied, rows);
      VectorXd vals(Index(candidates.size()));
      for (size_t k = 0; k < candidates.size(); ++k)
        vals(Index(k)) = critic_value(encode_observation(candidates[k]));
      st.next_value_samples = vals;
      st.ce = ce_sample(vals, cfg_.ez.gamma);
      st.ez_target = ez_target(s.log_wealth, vals, cfg_.ez, st.kappa);
    }

    const auto res = env_.step(ActionIncrement{st.action});
    st.applied_weights = res.applied_weights;
    st.reward = res.reward;
    st.portfolio_return = res.portfolio_return;
    st.done = res.done;
    if (with_critic) st.next_value = critic_value(encode_observation(res.next));
    roll.final_log_wealth = res.next.log_wealth;
    roll.steps.push_back(std::move(st));
    frames_ += 1;
  }
  return roll;
}

double critic_mse_and_backward(Mlp& critic, const MatrixXd& obs,
                               const VectorXd& targets, double grad_scale) {
  const Index b_count = obs.cols();
  if (targets.size() != b_count)
    throw std::invalid_argument("critic_mse_and_backward: target count mismatch");
  const MatrixXd raw = critic.forward(obs);
  MatrixXd grad(1, b_count);
  double mse = 0.0;
  for (Index b = 0; b < b_count; ++b) {
    const double v = positive_value(raw(0, b));
    const double resid = v - targets(b);
    mse += resid * resid;
    grad(0, b) =
        grad_scale * 2.0 * resid * positive_value_grad(raw(0, b)) / double(b_count);
  }
  critic.backward(grad);
  return mse / double(b_count);
}

double Trainer::critic_batch(const std::vector<const RolloutStep*>& batch) {
  VectorXd targets(Index(batch.size()));
  for (size_t b = 0; b < batch.size(); ++b) targets(Index(b)) = batch[b]->target;
  return critic_mse_and_backward(critic_, obs_matrix(batch), targets,
                                 cfg_.value_loss_coef);
}

void Trainer::ppo_minibatch(const std::vector<const RolloutStep*>& batch,
                            bool record_first, UpdateDiagnostics& diag,
                            int& batches) {
  const Index b_count = Index(batch.size());
  actor_.zero_grad();
  head_.d_log_std.setZero();
  critic_.zero_grad();

  const MatrixXd out = actor_.forward(obs_matrix(batch));
  MatrixXd grad = MatrixXd::Zero(out.rows(), b_count);
  double surrogate = 0.0, kl = 0.0, clipped = 0.0, max_dev = 0.0;
  for (Index b = 0; b < b_count; ++b) {
    const RolloutStep& st = *batch[size_t(b)];
    const VectorXd mu = out.col(b).head(n_assets_);
    const double lp_new = head_.log_prob(mu, st.action);
    const double ratio = std::exp(lp_new - st.log_prob);
    const double unclipped = ratio * st.advantage;
    const double clipped_ratio =
        std::clamp(ratio, 1.0 - cfg_.clip_eps, 1.0 + cfg_.clip_eps);
    const double clipped_obj = clipped_ratio * st.advantage;
    surrogate += std::min(unclipped, clipped_obj);
    kl += (ratio - 1.0) - std::log(ratio);
    if (std::abs(ratio - 1.0) > cfg_.clip_eps) clipped += 1.0;
    max_dev = std::max(max_dev, std::abs(ratio - 1.0));
    if (unclipped <= clipped_obj) {
      const double coeff = -(st.advantage * ratio) / double(b_count);
      grad.col(b).head(n_assets_) = coeff * head_.log_prob_grad_mean(mu, st.action);
      head_.d_log_std += coeff * head_.log_prob_grad_log_std(mu, st.action);
    }
    if (cfg_.learn_kappa && cfg_.objective == Objective::recursive) {
      const double logit = out(n_assets_, b);
      const double kap = sigmoid(logit);
      const double d_target = ez_target_kappa_grad(st.log_wealth, st.ce, cfg_.ez, kap);
      grad(n_assets_, b) = -(d_target * kap * (1.0 - kap)) / double(b_count);
    }
  }
  const double entropy = head_.entropy();
  if (cfg_.entropy_coef != 0.0)
    head_.d_log_std -= cfg_.entropy_coef * head_.entropy_grad_log_std();
  actor_.backward(grad);
  const double value_loss = critic_batch(batch);

  const double policy_loss = -surrogate / double(b_count);
  const double total =
      policy_loss + cfg_.value_loss_coef * value_loss - cfg_.entropy_coef * entropy;
  if (!std::isfinite(total)) {
    char msg[256];
    std::snprintf(msg, sizeof msg,
                  "ppo_update: non-finite loss (policy %.6g, value %.6g) at update %d",
                  policy_loss, value_loss, updates_);
    throw std::runtime_error(msg);
  }

  auto blocks = actor_.params();
  const auto head_blocks = head_.params();
  blocks.insert(blocks.end(), head_blocks.begin(), head_blocks.end());
  actor_opt_.step(blocks);
  critic_opt_.step(critic_.params());

  diag.policy_loss += policy_loss;
  diag.value_loss += value_loss;
  diag.entropy += entropy;
  diag.clip_fraction += clipped / double(b_count);
  diag.approx_kl += kl / double(b_count);
  if (record_first) diag.first_batch_ratio_dev = max_dev;
  batches += 1;
}

UpdateDiagnostics Trainer::ppo_update(const Rollout& roll) {
  UpdateDiagnostics diag;
  std::vector<size_t> order(size_t(roll.size()));
  std::iota(order.begin(), order.end(), size_t(0));
  int batches = 0;
  bool first = true;
  for (int epoch = 0; epoch < cfg_.training_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng_);
    for (size_t lo = 0; lo < order.size(); lo += size_t(cfg_.minibatch_size)) {
      const size_t hi = std::min(order.size(), lo + size_t(cfg_.minibatch_size));
      std::vector<const RolloutStep*> batch;
      batch.reserve(hi - lo);
      for (size_t k = lo; k < hi; ++k) batch.push_back(&roll.steps[order[k]]);
      ppo_minibatch(batch, first, diag, batches);
      first = false;
    }
  }
  diag.policy_loss /= batches;
  diag.value_loss /= batches;
  diag.entropy /= batches;
  diag.clip_fraction /= batches;
  diag.approx_kl /= batches;
  return diag;
}

UpdateDiagnostics Trainer::a2c_update(const Rollout& roll) {
  UpdateDiagnostics diag;
  const Index b_count = roll.size();
  std::vector<const RolloutStep*> batch;
  batch.reserve(size_t(b_count));
  for (const auto& st : roll.steps) batch.push_back(&st);

  actor_.zero_grad();
  head_.d_log_std.setZero();
  critic_.zero_grad();

  const MatrixXd out = actor_.forward(obs_matrix(batch));
  MatrixXd grad = MatrixXd::Zero(out.rows(), b_count);
  double weighted = 0.0;
  for (Index b = 0; b < b_count; ++b) {
    const RolloutStep& st = *batch[size_t(b)];
    const VectorXd mu = out.col(b).head(n_assets_);
    weighted += st.advantage * head_.log_prob(mu, st.action);
    const double coeff = -st.advantage / double(b_count);
    grad.col(b).head(n_assets_) = coeff * head_.log_prob_grad_mean(mu, st.action);
    head_.d_log_std += coeff * head_.log_prob_grad_log_std(mu, st.action);
    if (cfg_.learn_kappa && cfg_.objective == Objective::recursive) {
      const double kap = sigmoid(out(n_assets_, b));
      const double d_target = ez_target_kappa_grad(st.log_wealth, st.ce, cfg_.ez, kap);
      grad(n_assets_, b) = -(d_target * kap * (1.0 - kap)) / double(b_count);
    }
  }
  const double entropy = head_.entropy();
  if (cfg_.entropy_coef != 0.0)
    head_.d_log_std -= cfg_.entropy_coef * head_.entropy_grad_log_std();
  actor_.backward(grad);
  const double value_loss = critic_batch(batch);

  const double policy_loss = -weighted / double(b_count);
  const double total =
      policy_loss + cfg_.value_loss_coef * value_loss - cfg_.entropy_coef * entropy;
  if (!std::isfinite(total)) {
    char msg[256];
    std::snprintf(msg, sizeof msg,
                  "a2c_update: non-finite loss (policy %.6g, value %.6g) at update %d",
                  policy_loss, value_loss, updates_);
    throw std::runtime_error(msg);
  }

  auto blocks = actor_.params();
  const auto head_blocks = head_.params();
  blocks.insert(blocks.end(), head_blocks.begin(), head_blocks.end());
  actor_opt_.step(blocks);
  critic_opt_.step(critic_.params());

  diag.policy_loss = policy_loss;
  diag.value_loss = value_loss;
  diag.entropy = entropy;
  return diag;
}

UpdateDiagnostics Trainer::reinforce_update(const Rollout& roll) {
  UpdateDiagnostics diag;
  const Index b_count = roll.size();
  VectorXd rets(b_count);
  double running = 0.0;
  for (Index t = b_count - 1; t >= 0; --t) {
    const RolloutStep& st = roll.steps[size_t(t)];
    if (st.done) running = 0.0;
    running = st.reward + cfg_.discount * running;
    rets(t) = running;
  }
  const double baseline = rets.mean();

  std::vector<const RolloutStep*> batch;
  batch.reserve(size_t(b_count));
  for (const auto& st : roll.steps) batch.push_back(&st);

  actor_.zero_grad();
  head_.d_log_std.setZero();
  const MatrixXd out = actor_.forward(obs_matrix(batch));
  MatrixXd grad = MatrixXd::Zero(out.rows(), b_count);
  double weighted = 0.0;
  for (Index b = 0; b < b_count; ++b) {
    const RolloutStep& st = *batch[size_t(b)];
    const VectorXd mu = out.col(b).head(n_assets_);
    const double w = rets(b) - baseline;
    weighted += w * head_.log_prob(mu, st.action);
    const double coeff = -w / double(b_count);
    grad.col(b).head(n_assets_) = coeff * head_.log_prob_grad_mean(mu, st.action);
    head_.d_log_std += coeff * head_.log_prob_grad_log_std(mu, st.action);
  }
  const double entropy = head_.entropy();
  if (cfg_.entropy_coef != 0.0)
    head_.d_log_std -= cfg_.entropy_coef * head_.entropy_grad_log_std();
  actor_.backward(grad);

  const double policy_loss = -weighted / double(b_count);
  if (!std::isfinite(policy_loss))
    throw std::runtime_error("reinforce_update: non-finite loss");

  auto blocks = actor_.params();
  const auto head_blocks = head_.params();
  blocks.insert(blocks.end(), head_blocks.begin(), head_blocks.end());
  actor_opt_.step(blocks);

  diag.policy_loss = policy_loss;
  diag.entropy = entropy;
  diag.mean_advantage = 0.0;
  return diag;
}

UpdateDiagnostics Trainer::update(Rollout& roll) {
  if (roll.size() == 0) throw std::invalid_argument("update: empty rollout");
  UpdateDiagnostics diag;
  switch (cfg_.algorithm) {
    case Algorithm::random:
      break;
    case Algorithm::reinforce:
      diag = reinforce_update(roll);
      break;
    case Algorithm::ppo:
    case Algorithm::a2c: {
      fill_critic_targets(roll, cfg_);
      fill_advantages(roll, cfg_);
      diag = cfg_.algorithm == Algorithm::ppo ? ppo_update(roll) : a2c_update(roll);
      double sum_adv = 0.0, sum_val = 0.0, sum_tgt = 0.0;
      for (const auto& st : roll.steps) {
        sum_adv += st.advantage;
        sum_val += st.value;
        sum_tgt += st.target;
      }
      diag.mean_advantage = sum_adv / double(roll.size());
      diag.mean_value = sum_val / double(roll.size());
      diag.mean_target = sum_tgt / double(roll.size());
      break;
    }
  }
  diag.update_index = updates_;
  updates_ += 1;
  diag.frames = frames_;
  diag.final_log_wealth = roll.final_log_wealth;
  return diag;
}

std::vector<UpdateDiagnostics> Trainer::train(std::ostream* diag_log) {
  std::vector<UpdateDiagnostics> history;
  if (diag_log) write_diagnostics_header(*diag_log);
  while (!training_done()) {
    Rollout roll = collect(cfg_.time_horizon);
    const UpdateDiagnostics diag = update(roll);
    if (diag_log) write_diagnostics_row(*diag_log, diag);
    history.push_back(diag);
  }
  return history;
}

void Trainer::save(const std::string& path) {
  std::vector<std::pair<std::string, const MatrixXd*>> tensors;
  for (auto& [name, ptr] : actor_.named_tensors())
    tensors.emplace_back("actor." + name, ptr);
  for (auto& [name, ptr] : head_.named_tensors())
    tensors.emplace_back("actor." + name, ptr);
  for (auto& [name, ptr] : critic_.named_tensors())
    tensors.emplace_back("critic." + name, ptr);
  save_checkpoint(path, tensors);
}

void Trainer::load(const std::string& path) {
  const auto ckpt = load_checkpoint(path);
  std::vector<std::pair<std::string, MatrixXd*>> dests;
  for (auto& [name, ptr] : actor_.named_tensors())
    dests.emplace_back("actor." + name, ptr);
  for (auto& [name, ptr] : head_.named_tensors())
    dests.emplace_back("actor." + name, ptr);
  for (auto& [name, ptr] : critic_.named_tensors())
    dests.emplace_back("critic." + name, ptr);
  restore_tensors(ckpt, dests);
}

}  // namespace ezrl
