#ifndef EZRL_ADVANTAGE_HPP
#define EZRL_ADVANTAGE_HPP

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "ezrl/types.hpp"
#include "ezrl/utility.hpp"

namespace ezrl {

/// One buffered transition, as consumed by the advantage estimators. A
/// recursive-utility record carries a positive critic value and target;
/// a reward-objective record carries the reward instead.
struct StepRecord {
  double value = std::numeric_limits<double>::quiet_NaN();
  double ez_target = std::numeric_limits<double>::quiet_NaN();
  double reward = 0.0;
  double next_value = std::numeric_limits<double>::quiet_NaN();
  bool done = false;
};

/// Parameters of the weighted multi-step advantage recursion.
struct AaeConfig {
  double beta = 0.99;
  double lambda = 0.95;
  double gamma_risk = 5.0;
  double psi = 1.0;

  void validate() const {
    if (!(lambda >= 0.0 && lambda <= 1.0))
      throw std::invalid_argument("AaeConfig: lambda must lie in [0,1]");
    if (!(beta > 0.0 && beta < 1.0))
      throw std::invalid_argument("AaeConfig: beta must lie in (0,1)");
    if (!(gamma_risk > 0.0) || std::abs(gamma_risk - 1.0) <= kEpsGamma)
      throw std::invalid_argument("AaeConfig: gamma_risk must be positive and != 1");
    if (!(psi > 0.0))
      throw std::invalid_argument("AaeConfig: psi must be positive");
  }
};

/// One-step Bellman residual of the recursive objective: target minus value.
inline double td_error_ez(const StepRecord& rec) {
  if (!(rec.ez_target > 0.0))
    throw std::invalid_argument("td_error_ez: record has no positive target");
  if (!(rec.value > 0.0))
    throw std::invalid_argument("td_error_ez: record has no positive value");
  return rec.ez_target - rec.value;
}

/// State-dependent discount weight applied to downstream residuals:
///   omega = beta * (V^(1-gamma))^(((1-1/psi)/(1-gamma)) - 1) * V^(-gamma) * (1-gamma).
/// Evaluated factor by factor in log magnitude so extreme critic values
/// stay finite; the sign comes from the (1-gamma) factor alone, since every
/// power of a positive V is positive.
inline double omega_weight(double next_value, const AaeConfig& cfg) {
  cfg.validate();
  if (!(next_value > 0.0) || !std::isfinite(next_value))
    throw std::domain_error("omega_weight: next_value must be positive and finite");
  const double one_minus_gamma = 1.0 - cfg.gamma_risk;
  const double outer_exponent = (1.0 - 1.0 / cfg.psi) / one_minus_gamma - 1.0;
  const double log_v = std::log(next_value);
  const double log_beta = std::log(cfg.beta);
  const double log_power_term = outer_exponent * (one_minus_gamma * log_v);
  const double log_v_neg_gamma = -cfg.gamma_risk * log_v;
  const double log_magnitude =
      log_beta + log_power_term + log_v_neg_gamma + std::log(std::abs(one_minus_gamma));
  const double sign = one_minus_gamma < 0.0 ? -1.0 : 1.0;
  return sign * std::exp(log_magnitude);
}

/// Backward recursion A_t = delta_t + beta*lambda*omega_t*A_{t+1} with
/// A_T = 0 and a reset to zero continuation across done boundaries.
inline VectorXd aae_from_components(const VectorXd& deltas, const VectorXd& omegas,
                                    const std::vector<bool>& dones, double beta,
                                    double lambda) {
  const Index T = deltas.size();
  if (T == 0) throw std::invalid_argument("aae_from_components: empty input");
  if (omegas.size() != T || Index(dones.size()) != T)
    throw std::invalid_argument("aae_from_components: length mismatch");
  VectorXd adv(T);
  double cont = 0.0;
  for (Index t = T - 1; t >= 0; --t) {
    if (dones[size_t(t)]) cont = 0.0;
    adv[t] = deltas[t] + beta * lambda * omegas[t] * cont;
    cont = adv[t];
  }
  return adv;
}

/// Multi-step advantages for the recursive objective over one time-ordered
/// buffer of records.
inline VectorXd aae(const std::vector<StepRecord>& records, const AaeConfig& cfg) {
  cfg.validate();
  const Index T = Index(records.size());
  if (T == 0) throw std::invalid_argument("aae: empty input");
  VectorXd deltas(T), omegas(T);
  std::vector<bool> dones(records.size());
  for (Index t = 0; t < T; ++t) {
    const auto& rec = records[size_t(t)];
    deltas[t] = td_error_ez(rec);
    omegas[t] = omega_weight(rec.next_value, cfg);
    dones[size_t(t)] = rec.done;
  }
  return aae_from_components(deltas, omegas, dones, cfg.beta, cfg.lambda);
}

/// Generalized advantage estimation for discounted-sum objectives:
///   delta_t = r_t + discount * V(s_{t+1}) * (1 - done_t) - V(s_t),
///   A_t = delta_t + discount * lambda * (1 - done_t) * A_{t+1}.
inline VectorXd gae(const VectorXd& rewards, const VectorXd& values,
                    const VectorXd& next_values, const std::vector<bool>& dones,
                    double discount, double lambda) {
  const Index T = rewards.size();
  if (T == 0) throw std::invalid_argument("gae: empty input");
  if (values.size() != T || next_values.size() != T || Index(dones.size()) != T)
    throw std::invalid_argument("gae: length mismatch");
  if (!(discount >= 0.0 && discount <= 1.0) || !(lambda >= 0.0 && lambda <= 1.0))
    throw std::invalid_argument("gae: discount and lambda must lie in [0,1]");
  VectorXd adv(T);
  double cont = 0.0;
  for (Index t = T - 1; t >= 0; --t) {
    const double not_done = dones[size_t(t)] ? 0.0 : 1.0;
    const double delta =
        rewards[t] + discount * next_values[t] * not_done - values[t];
    adv[t] = delta + discount * lambda * not_done * cont;
    cont = adv[t];
  }
  return adv;
}

inline VectorXd gae(const VectorXd& rewards, const VectorXd& values,
                    const VectorXd& next_values, double discount, double lambda) {
  return gae(rewards, values, next_values,
             std::vector<bool>(size_t(rewards.size()), false), discount, lambda);
}

/// Shifts and scales a batch of advantages to zero mean and unit variance.
/// A near-constant batch is only centered.
inline VectorXd normalize_advantages(const VectorXd& adv) {
  if (adv.size() == 0) throw std::invalid_argument("normalize_advantages: empty");
  const double mean = adv.mean();
  const double var = (adv.array() - mean).square().sum() / double(adv.size());
  const double sd = std::sqrt(var);
  if (sd < 1e-12) return adv.array() - mean;
  return (adv.array() - mean) / sd;
}

}  // namespace ezrl

#endif  // EZRL_ADVANTAGE_HPP
