#ifndef EZRL_AGENTS_HPP
#define EZRL_AGENTS_HPP

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "ezrl/advantage.hpp"
#include "ezrl/env.hpp"
#include "ezrl/nn.hpp"
#include "ezrl/policy_prior.hpp"
#include "ezrl/utility.hpp"

namespace ezrl {

enum class Algorithm { ppo, a2c, reinforce, random };
enum class Objective { naive, markowitz, recursive };

Algorithm parse_algorithm(const std::string& name);
Objective parse_objective(const std::string& name);
const char* to_string(Algorithm a);
const char* to_string(Objective o);

/// Everything one trainer needs. The recursive objective requires a critic,
/// so it pairs only with ppo and a2c; validate() enforces that along with
/// the usual range checks.
struct AgentConfig {
  Algorithm algorithm = Algorithm::ppo;
  Objective objective = Objective::recursive;

  double discount = 0.99;
  double lambda = 0.95;
  double clip_eps = 0.2;
  int time_horizon = 128;
  int minibatch_size = 64;
  int training_epochs = 4;
  double value_loss_coef = 0.1;
  double entropy_coef = 0.0;
  long max_frames = 2520;
  EzParams ez;
  std::uint64_t seed = 0;

  std::vector<Index> hid_layers{128, 128};
  double lr = 0.02;
  int ce_window = 60;            // bootstrap window for the sampled return rows
  int prior_window = 60;         // trailing window of the rule's predictor state
  double init_log_std = -1.0;
  double random_action_std = 0.01;
  bool normalize_advantages = true;
  bool learn_kappa = false;      // sigmoid head on the actor instead of a constant
  bool init_from_prior = true;
  int prior_init_steps = 200;

  bool critic_based() const {
    return algorithm == Algorithm::ppo || algorithm == Algorithm::a2c;
  }
  void validate() const;
};

/// Observation fed to both networks: [log wealth, previous weights].
VectorXd encode_observation(const EnvState& s);

/// One collected step. Dynamics fields come from the env; value fields are
/// evaluated with the critic as of collection time and never recomputed, so
/// every regression target inside an update is a frozen constant.
struct RolloutStep {
  VectorXd obs;
  VectorXd action;
  VectorXd applied_weights;
  double log_prob = 0.0;
  double reward = 0.0;
  double portfolio_return = 0.0;
  bool done = false;
  double log_wealth = 0.0;

  double value = 0.0;
  double next_value = 0.0;
  VectorXd next_value_samples;  // K critic values on peeked states (recursive)
  double kappa = std::numeric_limits<double>::quiet_NaN();
  double ce = std::numeric_limits<double>::quiet_NaN();
  double ez_target = std::numeric_limits<double>::quiet_NaN();

  double target = 0.0;
  double advantage = 0.0;
};

struct Rollout {
  std::vector<RolloutStep> steps;
  double final_log_wealth = 0.0;

  Index size() const { return Index(steps.size()); }
};

/// Frozen critic regression targets: the stored one-step aggregate for the
/// recursive objective, r + discount * V(s') * (1 - done) otherwise.
void fill_critic_targets(Rollout& roll, const AgentConfig& cfg);

/// Weighted-residual advantages for the recursive objective, standard
/// lambda-weighted temporal differences otherwise; optionally normalized to
/// zero mean and unit variance across the rollout.
void fill_advantages(Rollout& roll, const AgentConfig& cfg);

/// Mean squared error of the positivity-transformed critic against frozen
/// targets (one observation per column); accumulates critic gradients
/// scaled by grad_scale and returns the unscaled loss.
double critic_mse_and_backward(Mlp& critic, const MatrixXd& obs,
                               const VectorXd& targets, double grad_scale);

/// Derivative of the one-step aggregate target with respect to kappa at
/// fixed log wealth and certainty equivalent.
double ez_target_kappa_grad(double log_wealth, double ce, const EzParams& p,
                            double kappa);

/// Zero-mean Gaussian weight increments with the given standard deviation.
ActionIncrement random_agent_action(Index n_assets, double std_dev,
                                    std::mt19937& rng);

struct UpdateDiagnostics {
  int update_index = 0;
  long frames = 0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
  double first_batch_ratio_dev = 0.0;  // max |ratio - 1| over the first minibatch
  double mean_advantage = 0.0;
  double mean_value = 0.0;
  double mean_target = 0.0;
  double final_log_wealth = 0.0;
};

void write_diagnostics_header(std::ostream& out);
void write_diagnostics_row(std::ostream& out, const UpdateDiagnostics& d);

/// One agent bound to one environment segment. Owns the networks, the
/// optimizers, and a single RNG stream, so a fixed (config, data) pair
/// reproduces the same parameter trajectory bit for bit.
class Trainer {
 public:
  Trainer(AgentConfig cfg, PortfolioEnv env);

  /// Fits the approximate portfolio rule on all rows before the segment end
  /// (the data a training segment is allowed to see).
  PriorRule fit_prior_from_history() const;

  /// Supervised pre-training of the actor mean toward the projected rule's
  /// weight increments along the segment.
  void init_actor_from_prior(const PriorRule& rule, int steps);

  /// Collects `horizon` steps, resetting the env at random offsets whenever
  /// an episode ends. Values, bootstrapped targets, and log-probs are
  /// recorded with the current networks.
  Rollout collect(int horizon);

  /// Fills targets and advantages, then dispatches on the algorithm.
  UpdateDiagnostics update(Rollout& roll);

  /// collect + update until max_frames, appending diagnostics rows to the
  /// optional log stream.
  std::vector<UpdateDiagnostics> train(std::ostream* diag_log = nullptr);

  double value_of(const EnvState& s) const;
  ActionIncrement act_mean(const EnvState& s) const;
  ActionIncrement act_sample(const EnvState& s);
  double kappa_of(const EnvState& s) const;

  void save(const std::string& path);
  void load(const std::string& path);

  long frames() const { return frames_; }
  int updates_done() const { return updates_; }
  bool training_done() const { return frames_ >= cfg_.max_frames; }

  const AgentConfig& config() const { return cfg_; }
  PortfolioEnv& env() { return env_; }
  Mlp& actor() { return actor_; }
  Mlp& critic() { return critic_; }
  GaussianPolicyHead& head() { return head_; }
  std::mt19937& rng() { return rng_; }

 private:
  void ensure_episode();
  double critic_value(const VectorXd& obs) const;
  VectorXd actor_mean(const VectorXd& obs) const;
  UpdateDiagnostics ppo_update(const Rollout& roll);
  UpdateDiagnostics a2c_update(const Rollout& roll);
  UpdateDiagnostics reinforce_update(const Rollout& roll);
  void ppo_minibatch(const std::vector<const RolloutStep*>& batch,
                     bool record_first, UpdateDiagnostics& diag, int& batches);
  double critic_batch(const std::vector<const RolloutStep*>& batch);

  AgentConfig cfg_;
  PortfolioEnv env_;
  std::mt19937 rng_;
  Index n_assets_ = 0;
  Mlp actor_;
  Mlp critic_;
  GaussianPolicyHead head_;
  Adam actor_opt_;
  Adam critic_opt_;
  long frames_ = 0;
  int updates_ = 0;
  bool episode_started_ = false;
};

}  // namespace ezrl

#endif  // EZRL_AGENTS_HPP
