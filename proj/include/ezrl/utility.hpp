#ifndef EZRL_UTILITY_HPP
#define EZRL_UTILITY_HPP

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "ezrl/types.hpp"

namespace ezrl {

/// Branch thresholds for the psi=1 (Cobb-Douglas) and gamma=1 limits.
inline constexpr double kEpsRho = 1e-6;
inline constexpr double kEpsGamma = 1e-6;

/// Recursive-utility preference and estimator parameters.
/// rho = 1 - 1/psi is always derived, never stored.
template <typename Scalar>
struct EzParamsT {
  Scalar beta = Scalar(0.99);        // time preference, in (0,1)
  Scalar gamma = Scalar(5.0);        // risk aversion, > 0 and != 1
  Scalar psi = Scalar(1.0);          // intertemporal elasticity, > 0
  Scalar kappa = Scalar(0.1);        // consumption-to-wealth ratio, in (0,1)
  int ce_samples = 10;               // K, CE sample count

  Scalar rho() const { return Scalar(1) - Scalar(1) / psi; }

  void validate() const {
    if (!(beta > Scalar(0) && beta < Scalar(1)))
      throw std::invalid_argument("EzParams: beta must lie in (0,1)");
    if (!(gamma > Scalar(0)))
      throw std::invalid_argument("EzParams: gamma must be positive");
    if (std::abs(double(gamma) - 1.0) <= kEpsGamma)
      throw std::invalid_argument("EzParams: gamma == 1 is not supported");
    if (!(psi > Scalar(0)))
      throw std::invalid_argument("EzParams: psi must be positive");
    if (!(kappa > Scalar(0) && kappa < Scalar(1)))
      throw std::invalid_argument("EzParams: kappa must lie in (0,1)");
    if (ce_samples < 1)
      throw std::invalid_argument("EzParams: ce_samples must be >= 1");
  }
};

using EzParams = EzParamsT<double>;

namespace detail {

template <typename Scalar>
Scalar require_positive(Scalar v, const char* what) {
  if (!(v > Scalar(0)) || !std::isfinite(double(v)))
    throw std::domain_error(std::string(what) + " must be positive and finite");
  return v;
}

// Weighted power mean (sum_i w_i * v_i^expo)^(1/expo), evaluated in log
// space so that large |expo| (e.g. 1-gamma at gamma=5) does not overflow
// for small inputs. Weights must be nonnegative and sum to ~1.
template <typename Scalar, typename DerivedV, typename DerivedW>
Scalar log_space_power_mean(const Eigen::MatrixBase<DerivedV>& values,
                            const Eigen::MatrixBase<DerivedW>& weights,
                            Scalar expo) {
  const Index n = values.size();
  Scalar max_exponent = -std::numeric_limits<Scalar>::infinity();
  for (Index i = 0; i < n; ++i) {
    require_positive(Scalar(values[i]), "power-mean value");
    const Scalar e = expo * std::log(Scalar(values[i]));
    if (weights[i] > Scalar(0) && e > max_exponent) max_exponent = e;
  }
  Scalar acc = Scalar(0);
  for (Index i = 0; i < n; ++i) {
    if (weights[i] <= Scalar(0)) continue;
    acc += Scalar(weights[i]) *
           std::exp(expo * std::log(Scalar(values[i])) - max_exponent);
  }
  return std::exp((max_exponent + std::log(acc)) / expo);
}

}  // namespace detail

/// CES aggregation of a current-period term and a certainty-equivalent term:
///   ((1-beta) c^rho + beta ce^rho)^(1/rho),
/// with the Cobb-Douglas limit c^(1-beta) ce^beta when |rho| < kEpsRho.
template <typename Scalar>
Scalar ces_aggregate(Scalar c_term, Scalar ce_term, const EzParamsT<Scalar>& p) {
  detail::require_positive(c_term, "ces_aggregate c_term");
  detail::require_positive(ce_term, "ces_aggregate ce_term");
  const Scalar rho = p.rho();
  const Scalar lc = std::log(c_term);
  const Scalar lce = std::log(ce_term);
  if (std::abs(double(rho)) < kEpsRho)
    return std::exp((Scalar(1) - p.beta) * lc + p.beta * lce);
  const Scalar x1 = rho * lc;
  const Scalar x2 = rho * lce;
  const Scalar m = std::max(x1, x2);
  const Scalar s =
      (Scalar(1) - p.beta) * std::exp(x1 - m) + p.beta * std::exp(x2 - m);
  return std::exp((m + std::log(s)) / rho);
}

/// Exact certainty equivalent (sum_i p_i v_i^(1-gamma))^(1/(1-gamma)).
template <typename Scalar, typename DerivedV, typename DerivedW>
Scalar ce_exact(const Eigen::MatrixBase<DerivedV>& values,
                const Eigen::MatrixBase<DerivedW>& probs, Scalar gamma) {
  if (values.size() != probs.size())
    throw std::invalid_argument("ce_exact: values/probs size mismatch");
  if (values.size() == 0) throw std::invalid_argument("ce_exact: empty input");
  if (std::abs(double(gamma) - 1.0) <= kEpsGamma)
    throw std::domain_error("ce_exact: gamma == 1 is not supported");
  const Scalar psum = probs.sum();
  if (std::abs(double(psum) - 1.0) > 1e-9)
    throw std::invalid_argument("ce_exact: probs must sum to 1");
  return detail::log_space_power_mean(values, probs, Scalar(1) - gamma);
}

/// K-sample certainty-equivalent estimator: the empirical power mean
///   ((1/K) sum_k v_k^(1-gamma))^(1/(1-gamma)).
template <typename Scalar, typename DerivedV>
Scalar ce_sample(const Eigen::MatrixBase<DerivedV>& next_values, Scalar gamma) {
  const Index k = next_values.size();
  if (k == 0) throw std::invalid_argument("ce_sample: empty sample");
  if (std::abs(double(gamma) - 1.0) <= kEpsGamma)
    throw std::domain_error("ce_sample: gamma == 1 is not supported");
  const Vector<Scalar> uniform =
      Vector<Scalar>::Constant(k, Scalar(1) / Scalar(k));
  return detail::log_space_power_mean(next_values, uniform, Scalar(1) - gamma);
}

/// One-step value target: CES aggregate of kappa*exp(w) and the sampled CE.
template <typename Scalar, typename DerivedV>
Scalar ez_target(Scalar log_wealth, const Eigen::MatrixBase<DerivedV>& next_values,
                 const EzParamsT<Scalar>& p, Scalar kappa) {
  detail::require_positive(kappa, "ez_target kappa");
  const Scalar consumption = std::exp(std::log(kappa) + log_wealth);
  return ces_aggregate(consumption, ce_sample(next_values, p.gamma), p);
}

template <typename Scalar, typename DerivedV>
Scalar ez_target(Scalar log_wealth, const Eigen::MatrixBase<DerivedV>& next_values,
                 const EzParamsT<Scalar>& p) {
  return ez_target(log_wealth, next_values, p, p.kappa);
}

/// Zero-consumption reduction: with Y = V^(1-gamma) the recursion becomes
/// linear, Y = beta^((1-gamma)/rho) E[Y']. Verification-harness companion to
/// ces_aggregate with a vanishing current-period term.
template <typename Scalar, typename DerivedV, typename DerivedW>
Scalar zero_consumption_value_step(const Eigen::MatrixBase<DerivedV>& next_values,
                                   const Eigen::MatrixBase<DerivedW>& probs,
                                   const EzParamsT<Scalar>& p) {
  const Scalar alpha = Scalar(1) - p.gamma;
  const Scalar rho = p.rho();
  if (std::abs(double(rho)) < kEpsRho || std::abs(double(alpha)) < kEpsGamma)
    throw std::domain_error("zero_consumption_value_step: degenerate exponents");
  const Scalar ce = ce_exact(next_values, probs, p.gamma);
  // beta_tilde * E[Y'] = beta^(alpha/rho) * ce^alpha; back-transform by 1/alpha.
  const Scalar log_y = (alpha / rho) * std::log(p.beta) + alpha * std::log(ce);
  return std::exp(log_y / alpha);
}

/// Finite MDP used by the verification harness: per-action row-stochastic
/// transition matrices and a positive per-state consumption level.
template <typename Scalar>
struct TabularMdpT {
  std::vector<Matrix<Scalar>> transition;  // one S x S matrix per action
  Vector<Scalar> consumption;

  Index n_states() const { return consumption.size(); }
  Index n_actions() const { return Index(transition.size()); }

  void validate() const {
    if (transition.empty() || consumption.size() == 0)
      throw std::invalid_argument("TabularMdp: empty");
    for (const auto& P : transition) {
      if (P.rows() != n_states() || P.cols() != n_states())
        throw std::invalid_argument("TabularMdp: transition shape mismatch");
      for (Index s = 0; s < P.rows(); ++s) {
        if (std::abs(double(P.row(s).sum()) - 1.0) > 1e-12)
          throw std::invalid_argument("TabularMdp: transition row must sum to 1");
        if ((P.row(s).array() < Scalar(0)).any())
          throw std::invalid_argument("TabularMdp: negative transition probability");
      }
    }
    if ((consumption.array() <= Scalar(0)).any())
      throw std::invalid_argument("TabularMdp: consumption must be positive");
  }
};

using TabularMdp = TabularMdpT<double>;

template <typename Scalar>
struct ValueIterationResultT {
  Vector<Scalar> values;
  int iterations = 0;
  std::vector<Scalar> ce_metric_distances;  // one per sweep
};

using ValueIterationResult = ValueIterationResultT<double>;

/// Value iteration with the recursive-utility operator
///   (TV)(s) = max_a ces_aggregate(c(s), ce_exact(V, P(s,a,.), gamma)),
/// stopped when the certainty-equivalent metric
///   sup_s |V^(1-gamma)(s) - V_prev^(1-gamma)(s)|
/// falls below tol.
template <typename Scalar>
ValueIterationResultT<Scalar> tabular_value_iteration(
    const TabularMdpT<Scalar>& mdp, const EzParamsT<Scalar>& p, Scalar tol,
    int max_iter) {
  mdp.validate();
  p.validate();
  const Index S = mdp.n_states();
  const Scalar alpha = Scalar(1) - p.gamma;

  ValueIterationResultT<Scalar> out;
  Vector<Scalar> v = mdp.consumption;
  Vector<Scalar> v_next(S);
  for (int it = 0; it < max_iter; ++it) {
    for (Index s = 0; s < S; ++s) {
      Scalar best = -std::numeric_limits<Scalar>::infinity();
      for (Index a = 0; a < mdp.n_actions(); ++a) {
        const Scalar ce =
            ce_exact(v, mdp.transition[size_t(a)].row(s).transpose(), p.gamma);
        best = std::max(best, ces_aggregate(mdp.consumption[s], ce, p));
      }
      v_next[s] = best;
    }
    Scalar dist = Scalar(0);
    for (Index s = 0; s < S; ++s) {
      const Scalar y_new = std::exp(alpha * std::log(v_next[s]));
      const Scalar y_old = std::exp(alpha * std::log(v[s]));
      dist = std::max(dist, std::abs(y_new - y_old));
    }
    v = v_next;
    out.ce_metric_distances.push_back(dist);
    if (dist < tol) {
      out.values = v;
      out.iterations = it + 1;
      return out;
    }
  }
  throw std::runtime_error("tabular_value_iteration: no convergence within max_iter");
}

/// Monte Carlo estimate of the two-period Euler residual
///   E[(alpha0 R + (1-alpha0) Rf)^(-gamma) (R - Rf)]
/// over gross risky-return samples. Its root in alpha0 is the optimal
/// two-period risky share for zero initial consumption and psi = 1.
template <typename Scalar, typename DerivedV>
Scalar two_period_euler_residual(Scalar alpha0,
                                 const Eigen::MatrixBase<DerivedV>& r_samples,
                                 Scalar rf, Scalar gamma) {
  if (r_samples.size() == 0)
    throw std::invalid_argument("two_period_euler_residual: empty sample");
  Scalar acc = Scalar(0);
  for (Index i = 0; i < r_samples.size(); ++i) {
    const Scalar gross = alpha0 * Scalar(r_samples[i]) + (Scalar(1) - alpha0) * rf;
    detail::require_positive(gross, "two_period_euler_residual gross return");
    acc += std::exp(-gamma * std::log(gross)) * (Scalar(r_samples[i]) - rf);
  }
  return acc / Scalar(r_samples.size());
}

}  // namespace ezrl

#endif  // EZRL_UTILITY_HPP
