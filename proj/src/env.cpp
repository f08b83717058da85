#include "ezrl/env.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace ezrl {

void EnvState::validate() const {
  if (prev_weights.size() < 1)
    throw std::invalid_argument("EnvState: needs at least one asset");
  if (!std::isfinite(log_wealth))
    throw std::invalid_argument("EnvState: non-finite log wealth");
  if (!prev_weights.allFinite() || (prev_weights.array() < 0.0).any())
    throw std::invalid_argument("EnvState: weights must be finite and nonnegative");
  if (std::abs(prev_weights.sum() - 1.0) > 1e-9)
    throw std::invalid_argument("EnvState: weights must sum to 1");
  if (t < 0) throw std::invalid_argument("EnvState: negative step index");
}

EnvState initial_state(Index n_assets) {
  if (n_assets < 1) throw std::invalid_argument("initial_state: n_assets < 1");
  EnvState s;
  s.log_wealth = 0.0;
  s.prev_weights = VectorXd::Constant(n_assets, 1.0 / double(n_assets));
  s.t = 0;
  return s;
}

void EpisodeConfig::validate() const {
  if (episode_length < 1)
    throw std::invalid_argument("EpisodeConfig: episode_length must be >= 1");
  if (!(markowitz_lambda >= 0.0))
    throw std::invalid_argument("EpisodeConfig: markowitz_lambda must be >= 0");
  if (varcov_window < 1)
    throw std::invalid_argument("EpisodeConfig: varcov_window must be >= 1");
}

VectorXd project_simplex(const VectorXd& weights_raw) {
  if (weights_raw.size() < 1)
    throw std::invalid_argument("project_simplex: empty input");
  if (!weights_raw.allFinite())
    throw std::domain_error("project_simplex: non-finite input");
  VectorXd clipped = weights_raw.cwiseMax(0.0).cwiseMin(1.0);
  const double total = clipped.sum();
  if (total <= 0.0)
    return VectorXd::Constant(weights_raw.size(),
                              1.0 / double(weights_raw.size()));
  return clipped / total;
}

PortfolioEnv::PortfolioEnv(ReturnsTable table, Index seg_begin, Index seg_end,
                           EpisodeConfig cfg)
    : table_(std::move(table)), seg_begin_(seg_begin), seg_end_(seg_end),
      cfg_(cfg) {
  table_.validate();
  cfg_.validate();
  if (seg_begin_ < 0 || seg_end_ > table_.n_rows() || seg_begin_ >= seg_end_)
    throw std::invalid_argument("PortfolioEnv: bad segment range");
  state_ = initial_state(table_.n_assets());
  cursor_ = seg_begin_;
  max_steps_ = cfg_.episode_length;
}

const EnvState& PortfolioEnv::reset(Index offset, int max_steps) {
  if (offset < 0 || seg_begin_ + offset >= seg_end_)
    throw std::invalid_argument("PortfolioEnv::reset: offset outside segment");
  state_ = initial_state(table_.n_assets());
  cursor_ = seg_begin_ + offset;
  max_steps_ = max_steps < 0 ? cfg_.episode_length : max_steps;
  if (max_steps_ < 1)
    throw std::invalid_argument("PortfolioEnv::reset: max_steps must be >= 1");
  active_ = true;
  return state_;
}

bool PortfolioEnv::episode_over() const {
  return !active_ || state_.t >= max_steps_ || cursor_ >= seg_end_;
}

MatrixXd PortfolioEnv::trailing_covariance() const {
  const Index n = table_.n_assets();
  const Index end = cursor_;
  const Index begin = std::max(Index(0), end - Index(cfg_.varcov_window));
  const Index rows = end - begin;
  if (rows < 2) return MatrixXd::Zero(n, n);
  const MatrixXd window = table_.returns.middleRows(begin, rows);
  const RowVectorXd mean = window.colwise().mean();
  const MatrixXd centered = window.rowwise() - mean;
  return centered.transpose() * centered / double(rows - 1);
}

PortfolioEnv::StepResult PortfolioEnv::step(const ActionIncrement& action) {
  if (episode_over())
    throw std::logic_error("PortfolioEnv::step: episode already over");
  if (action.delta_weights.size() != table_.n_assets())
    throw std::invalid_argument("PortfolioEnv::step: action size mismatch");

  const VectorXd applied =
      project_simplex(state_.prev_weights + action.delta_weights);
  const VectorXd realized = table_.returns.row(cursor_).transpose();
  const double r_port = applied.dot(realized);
  if (!(1.0 + r_port > 0.0))
    throw std::domain_error("PortfolioEnv::step: bankrupt portfolio (1 + R <= 0)");

  StepResult out;
  out.applied_weights = applied;
  out.portfolio_return = r_port;
  switch (cfg_.reward_kind) {
    case RewardKind::naive:
      out.reward = r_port;
      break;
    case RewardKind::markowitz: {
      const MatrixXd cov = trailing_covariance();
      out.reward = r_port - cfg_.markowitz_lambda * applied.dot(cov * applied);
      break;
    }
    case RewardKind::none:
      out.reward = 0.0;
      break;
  }

  out.next.log_wealth = state_.log_wealth + std::log1p(r_port);
  out.next.prev_weights = applied;
  out.next.t = state_.t + 1;
  state_ = out.next;
  ++cursor_;
  out.done = episode_over();
  return out;
}

std::vector<EnvState> PortfolioEnv::peek_next_states(
    const VectorXd& applied_weights, const MatrixXd& sampled_returns) const {
  if (sampled_returns.rows() < 1)
    throw std::invalid_argument("peek_next_states: need at least one sample");
  if (sampled_returns.cols() != table_.n_assets() ||
      applied_weights.size() != table_.n_assets())
    throw std::invalid_argument("peek_next_states: size mismatch");
  std::vector<EnvState> out;
  out.reserve(size_t(sampled_returns.rows()));
  for (Index k = 0; k < sampled_returns.rows(); ++k) {
    const double r_port = applied_weights.dot(sampled_returns.row(k).transpose());
    if (!(1.0 + r_port > 0.0))
      throw std::domain_error("peek_next_states: candidate implies bankruptcy");
    EnvState s;
    s.log_wealth = state_.log_wealth + std::log1p(r_port);
    s.prev_weights = applied_weights;
    s.t = state_.t + 1;
    out.push_back(std::move(s));
  }
  return out;
}

MatrixXd sample_return_rows(const ReturnsTable& table, int window, Index t_now,
                            int K, std::mt19937& rng) {
  if (window < 1) throw std::invalid_argument("sample_return_rows: window < 1");
  if (K < 1) throw std::invalid_argument("sample_return_rows: K < 1");
  if (t_now < 0 || t_now >= table.n_rows())
    throw std::invalid_argument("sample_return_rows: t_now outside table");
  const Index lo = std::max(Index(0), t_now + 1 - Index(window));
  std::uniform_int_distribution<Index> pick(lo, t_now);
  MatrixXd out(K, table.n_assets());
  for (int k = 0; k < K; ++k) out.row(k) = table.returns.row(pick(rng));
  return out;
}

Trajectory run_episode(PortfolioEnv& env, const PolicyFn& policy,
                       EpisodeMode mode, std::mt19937& rng) {
  const Index seg_len = env.seg_end() - env.seg_begin();
  if (mode == EpisodeMode::train) {
    const Index steps = Index(env.config().episode_length);
    if (seg_len < steps)
      throw std::invalid_argument("run_episode: segment shorter than an episode");
    std::uniform_int_distribution<Index> pick(0, seg_len - steps);
    env.reset(pick(rng));
  } else {
    env.reset(0, int(seg_len));
  }

  Trajectory traj;
  while (!env.episode_over()) {
    TrajectoryStep rec;
    rec.state = env.state();
    const ActionIncrement act = policy(rec.state);
    rec.action_increment = act.delta_weights;
    const auto result = env.step(act);
    rec.applied_weights = result.applied_weights;
    rec.reward = result.reward;
    rec.portfolio_return = result.portfolio_return;
    rec.next_state = result.next;
    rec.done = result.done;
    traj.steps.push_back(std::move(rec));
  }
  traj.final_log_wealth = env.state().log_wealth;
  return traj;
}

void write_trajectory_csv(const Trajectory& traj, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_trajectory_csv: cannot open " + path);
  const Index n = traj.steps.empty() ? 0 : traj.steps.front().applied_weights.size();
  out << "step";
  for (Index c = 0; c < n; ++c) out << ",w" << c;
  out << ",reward,log_wealth\n";
  char buf[64];
  for (size_t i = 0; i < traj.steps.size(); ++i) {
    const auto& s = traj.steps[i];
    out << i;
    for (Index c = 0; c < n; ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", s.applied_weights[c]);
      out << ',' << buf;
    }
    std::snprintf(buf, sizeof buf, "%.17g", s.reward);
    out << ',' << buf;
    std::snprintf(buf, sizeof buf, "%.17g", s.next_state.log_wealth);
    out << ',' << buf << '\n';
  }
}

}  // namespace ezrl
