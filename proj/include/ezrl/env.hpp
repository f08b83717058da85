#ifndef EZRL_ENV_HPP
#define EZRL_ENV_HPP

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "ezrl/data.hpp"
#include "ezrl/types.hpp"

namespace ezrl {

/// Portfolio state: log wealth w = log W, the weights applied at the
/// previous step, and the step index within the episode.
struct EnvState {
  double log_wealth = 0.0;
  VectorXd prev_weights;
  int t = 0;

  Index n_assets() const { return prev_weights.size(); }
  void validate() const;
};

/// Fresh episode state: unit wealth, equal weights.
EnvState initial_state(Index n_assets);

/// Raw policy output; unconstrained until projected onto the simplex.
struct ActionIncrement {
  VectorXd delta_weights;
};

enum class RewardKind { naive, markowitz, none };

struct EpisodeConfig {
  int episode_length = 252;
  RewardKind reward_kind = RewardKind::naive;
  double markowitz_lambda = 1.0;
  int varcov_window = 60;

  void validate() const;
};

/// Clip each component to [0,1], then normalize by the sum; an all-zero
/// clip result falls back to equal weights. Throws std::domain_error on
/// non-finite input.
VectorXd project_simplex(const VectorXd& weights_raw);

/// The portfolio MDP over one contiguous row range of a returns table.
/// Rows before the active range (earlier data) feed the trailing
/// covariance window and the bootstrap sampler, so no step ever reads at or
/// past the current cursor.
class PortfolioEnv {
 public:
  struct StepResult {
    EnvState next;
    double reward = 0.0;
    VectorXd applied_weights;
    double portfolio_return = 0.0;
    bool done = false;
  };

  PortfolioEnv(ReturnsTable table, Index seg_begin, Index seg_end,
               EpisodeConfig cfg);

  /// Starts an episode at seg_begin + offset. max_steps < 0 means the
  /// configured episode_length; the episode also ends where the segment does.
  const EnvState& reset(Index offset = 0, int max_steps = -1);

  /// Consumes the row at the cursor. Throws std::logic_error when called
  /// after the episode ended and std::domain_error on bankruptcy
  /// (1 + portfolio return <= 0).
  StepResult step(const ActionIncrement& action);

  /// Hypothetical next states for K sampled return rows; the environment
  /// itself is untouched.
  std::vector<EnvState> peek_next_states(const VectorXd& applied_weights,
                                         const MatrixXd& sampled_returns) const;

  const EnvState& state() const { return state_; }
  const ReturnsTable& table() const { return table_; }
  const EpisodeConfig& config() const { return cfg_; }
  Index cursor() const { return cursor_; }
  Index seg_begin() const { return seg_begin_; }
  Index seg_end() const { return seg_end_; }
  Index n_assets() const { return table_.n_assets(); }
  bool episode_over() const;

  /// Sample covariance of the rows in the trailing window strictly before
  /// the cursor; zero matrix when fewer than 2 rows are available.
  MatrixXd trailing_covariance() const;

 private:
  ReturnsTable table_;
  Index seg_begin_, seg_end_;
  EpisodeConfig cfg_;
  EnvState state_;
  Index cursor_ = 0;
  int max_steps_ = 0;
  bool active_ = false;
};

/// K rows drawn i.i.d. uniformly with replacement from the trailing
/// `window` rows of `table` ending at row t_now (inclusive).
MatrixXd sample_return_rows(const ReturnsTable& table, int window, Index t_now,
                            int K, std::mt19937& rng);

/// Per-step record of one rollout. The env fills the dynamics fields; the
/// training side annotates value, target, advantage, and log-probability.
struct TrajectoryStep {
  EnvState state;
  VectorXd action_increment;
  VectorXd applied_weights;
  double reward = 0.0;
  double portfolio_return = 0.0;
  EnvState next_state;
  bool done = false;

  double value = 0.0;
  double ez_target = 0.0;
  double advantage = 0.0;
  double log_prob = 0.0;
};

struct Trajectory {
  std::vector<TrajectoryStep> steps;
  double final_log_wealth = 0.0;

  Index size() const { return Index(steps.size()); }
};

enum class EpisodeMode { train, eval };

using PolicyFn = std::function<ActionIncrement(const EnvState&)>;

/// Rolls one episode. Training mode starts at a uniformly random offset
/// that leaves room for a full episode; evaluation consumes the whole
/// segment once from its start.
Trajectory run_episode(PortfolioEnv& env, const PolicyFn& policy,
                       EpisodeMode mode, std::mt19937& rng);

/// Debug dump: step, weights, reward, log wealth, one row per step.
void write_trajectory_csv(const Trajectory& traj, const std::string& path);

}  // namespace ezrl

#endif  // EZRL_ENV_HPP
