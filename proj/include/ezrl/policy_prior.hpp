#ifndef EZRL_POLICY_PRIOR_HPP
#define EZRL_POLICY_PRIOR_HPP

#include <string>

#include "ezrl/types.hpp"
#include "ezrl/utility.hpp"

namespace ezrl {

/// First-order vector autoregression of the predictor state, plus the
/// loading of log excess returns on the lagged state and the return/state
/// covariance needed by the hedging term.
struct VarModel {
  Index m = 0;          // state dimension
  MatrixXd coef;        // m x m transition
  VectorXd intercept;   // m
  MatrixXd resid_cov;   // m x m, from state-equation residuals
  MatrixXd B;           // n x m loading of log excess returns on lagged state
  MatrixXd cov_rx;      // n x m sample Cov(r_{t+1}, x_{t+1})

  void validate() const;
};

/// Log excess returns at risk-free rate zero: log(1 + R) elementwise.
MatrixXd log_excess_returns(const MatrixXd& returns);

/// Predictor state x_t: per-asset mean of log excess returns over the
/// trailing `window` rows ending at t (partial windows near the start use
/// what is available), so the state dimension equals the asset count.
MatrixXd build_state_series(const MatrixXd& returns, int window);

/// OLS fits: the state equation x_{t+1} = c + A x_t + eps (with intercept)
/// and the return loading r_{t+1} = B x_t (no intercept, matching the
/// conditional-mean form E_t[r] = B x_t). Residual covariance uses the
/// state-equation residuals with a degrees-of-freedom correction. Rows of
/// both inputs are aligned in time. Throws std::invalid_argument when
/// T <= m + 2 and std::runtime_error on rank-deficient regressors.
VarModel fit_var(const MatrixXd& state_series, const MatrixXd& log_excess);

/// Approximate portfolio rule (pre-projection):
///   alpha = (1/gamma) Sigma^-1 B x_t  +  ((1-psi)/psi) Sigma^-1 Cov(r,x) A_alpha,
/// where the hedging coefficient A_alpha is caller-supplied; without it the
/// hedging term is zero, which is exact at psi = 1. Sigma is ridge-
/// regularized by 1e-8 * trace(Sigma)/n before inversion.
VectorXd prior_weights(const VarModel& model, const VectorXd& x_t,
                       const MatrixXd& sigma, const EzParams& p);
VectorXd prior_weights(const VarModel& model, const VectorXd& x_t,
                       const MatrixXd& sigma, const EzParams& p,
                       const VectorXd& a_alpha);

/// Fitted rule packaged with everything needed to evaluate it. The hedging
/// coefficient and the consumption-rule coefficients (a0, a1) have no
/// estimator here; they stay disabled unless supplied.
struct PriorRule {
  VarModel model;
  MatrixXd sigma;
  EzParams params;
  VectorXd a_alpha;  // empty disables the hedging term
  bool has_kappa_rule = false;
  double kappa_a0 = 0.0;
  VectorXd kappa_a1;

  /// Myopic plus hedging weights, pre-projection.
  VectorXd weights(const VectorXd& x_t) const;
  /// The hedging component alone (constant in x_t; zero when disabled).
  VectorXd hedging_weights() const;
  /// kappa = exp(a0 + a1 . x_t); throws unless the rule was supplied.
  double kappa(const VectorXd& x_t) const;
};

/// Small text report of the fitted rule: B, Sigma, and an example output.
void write_prior_report(const std::string& path, const VarModel& model,
                        const MatrixXd& sigma, const VectorXd& example_x,
                        const VectorXd& example_alpha);

}  // namespace ezrl

#endif  // EZRL_POLICY_PRIOR_HPP
