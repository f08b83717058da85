#include "ezrl/policy_prior.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace ezrl {

void VarModel::validate() const {
  if (m <= 0) throw std::invalid_argument("VarModel: state dimension must be positive");
  if (coef.rows() != m || coef.cols() != m)
    throw std::invalid_argument("VarModel: transition must be m x m");
  if (intercept.size() != m) throw std::invalid_argument("VarModel: intercept must have length m");
  if (resid_cov.rows() != m || resid_cov.cols() != m)
    throw std::invalid_argument("VarModel: residual covariance must be m x m");
  if (B.cols() != m) throw std::invalid_argument("VarModel: loading must have m columns");
  if (cov_rx.rows() != B.rows() || cov_rx.cols() != m)
    throw std::invalid_argument("VarModel: return/state covariance must match the loading shape");
  if (!coef.allFinite() || !intercept.allFinite() || !resid_cov.allFinite() ||
      !B.allFinite() || !cov_rx.allFinite())
    throw std::invalid_argument("VarModel: non-finite entries");
}

MatrixXd log_excess_returns(const MatrixXd& returns) {
  if ((returns.array() <= -1.0).any())
    throw std::domain_error("log_excess_returns: returns must exceed -1");
  return (returns.array() + 1.0).log().matrix();
}

MatrixXd build_state_series(const MatrixXd& returns, int window) {
  if (window < 1) throw std::invalid_argument("build_state_series: window must be >= 1");
  const MatrixXd logs = log_excess_returns(returns);
  const Index t_count = logs.rows();
  const Index n = logs.cols();
  MatrixXd state(t_count, n);
  for (Index t = 0; t < t_count; ++t) {
    const Index lo = std::max<Index>(0, t + 1 - window);
    const Index len = t + 1 - lo;
    state.row(t) = logs.middleRows(lo, len).colwise().mean();
  }
  return state;
}

namespace {

// Least-squares coefficients for Y ~ Z, with a rank check on the regressors.
MatrixXd ols(const MatrixXd& z, const MatrixXd& y, const char* what) {
  Eigen::ColPivHouseholderQR<MatrixXd> qr(z);
  if (qr.rank() < z.cols())
    throw std::runtime_error(std::string("fit_var: rank-deficient regressors in ") + what);
  return qr.solve(y);
}

}  // namespace

VarModel fit_var(const MatrixXd& state_series, const MatrixXd& log_excess) {
  const Index t_count = state_series.rows();
  const Index m = state_series.cols();
  const Index n = log_excess.cols();
  if (m < 1 || n < 1) throw std::invalid_argument("fit_var: empty inputs");
  if (log_excess.rows() != t_count)
    throw std::invalid_argument("fit_var: state and return series must have equal length");
  if (t_count <= m + 2) throw std::invalid_argument("fit_var: series too short for the state dimension");
  if (!state_series.allFinite() || !log_excess.allFinite())
    throw std::invalid_argument("fit_var: non-finite inputs");

  const Index rows = t_count - 1;
  MatrixXd z(rows, m + 1);  // [1, x_t]
  z.col(0).setOnes();
  z.rightCols(m) = state_series.topRows(rows);
  const MatrixXd x_next = state_series.bottomRows(rows);
  const MatrixXd r_next = log_excess.bottomRows(rows);

  const MatrixXd state_coefs = ols(z, x_next, "the state equation");  // (m+1) x m

  VarModel model;
  model.m = m;
  model.intercept = state_coefs.row(0).transpose();
  model.coef = state_coefs.bottomRows(m).transpose();

  const MatrixXd resid = x_next - z * state_coefs;
  const Index dof = std::max<Index>(1, rows - (m + 1));
  model.resid_cov = resid.transpose() * resid / double(dof);

  model.B = ols(state_series.topRows(rows), r_next, "the return loading").transpose();

  const MatrixXd r_c = r_next.rowwise() - r_next.colwise().mean();
  const MatrixXd x_c = x_next.rowwise() - x_next.colwise().mean();
  model.cov_rx = r_c.transpose() * x_c / double(std::max<Index>(1, rows - 1));

  model.validate();
  return model;
}

namespace {

Eigen::LDLT<MatrixXd> ridge_factor(const MatrixXd& sigma) {
  const Index n = sigma.rows();
  if (n < 1 || sigma.cols() != n)
    throw std::invalid_argument("prior_weights: covariance must be square and non-empty");
  if (!sigma.allFinite()) throw std::invalid_argument("prior_weights: non-finite covariance");
  MatrixXd reg = sigma;
  reg.diagonal().array() += 1e-8 * sigma.trace() / double(n);
  Eigen::LDLT<MatrixXd> ldlt(reg);
  if (ldlt.info() != Eigen::Success || (ldlt.vectorD().array() <= 0.0).any())
    throw std::runtime_error("prior_weights: covariance is singular");
  return ldlt;
}

}  // namespace

VectorXd prior_weights(const VarModel& model, const VectorXd& x_t,
                       const MatrixXd& sigma, const EzParams& p) {
  model.validate();
  p.validate();
  if (x_t.size() != model.m) throw std::invalid_argument("prior_weights: state has wrong length");
  const auto ldlt = ridge_factor(sigma);
  if (sigma.rows() != model.B.rows())
    throw std::invalid_argument("prior_weights: covariance does not match the asset count");
  return ldlt.solve(model.B * x_t) / p.gamma;
}

VectorXd prior_weights(const VarModel& model, const VectorXd& x_t,
                       const MatrixXd& sigma, const EzParams& p,
                       const VectorXd& a_alpha) {
  VectorXd alpha = prior_weights(model, x_t, sigma, p);
  const double hedge_scale = (1.0 - p.psi) / p.psi;
  if (hedge_scale == 0.0) return alpha;
  if (a_alpha.size() != model.m)
    throw std::invalid_argument("prior_weights: hedging coefficient has wrong length");
  const auto ldlt = ridge_factor(sigma);
  alpha += hedge_scale * ldlt.solve(model.cov_rx * a_alpha);
  return alpha;
}

VectorXd PriorRule::weights(const VectorXd& x_t) const {
  if (a_alpha.size() == 0) return prior_weights(model, x_t, sigma, params);
  return prior_weights(model, x_t, sigma, params, a_alpha);
}

VectorXd PriorRule::hedging_weights() const {
  const VectorXd zero_state = VectorXd::Zero(model.m);
  return weights(zero_state);
}

double PriorRule::kappa(const VectorXd& x_t) const {
  if (!has_kappa_rule) throw std::logic_error("PriorRule: consumption rule coefficients were not supplied");
  if (kappa_a1.size() != model.m)
    throw std::invalid_argument("PriorRule: consumption rule slope has wrong length");
  const double k = std::exp(kappa_a0 + kappa_a1.dot(x_t));
  if (!std::isfinite(k)) throw std::domain_error("PriorRule: consumption rule overflowed");
  return k;
}

void write_prior_report(const std::string& path, const VarModel& model,
                        const MatrixXd& sigma, const VectorXd& example_x,
                        const VectorXd& example_alpha) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_prior_report: cannot open " + path);
  out << "approximate portfolio rule\n";
  out << "state dimension: " << model.m << "\n";
  out << "assets: " << model.B.rows() << "\n\n";
  auto dump = [&out](const char* name, const MatrixXd& mat) {
    out << name << " (" << mat.rows() << " x " << mat.cols() << "):\n";
    char buf[64];
    for (Index i = 0; i < mat.rows(); ++i) {
      for (Index j = 0; j < mat.cols(); ++j) {
        std::snprintf(buf, sizeof(buf), "% .6e", mat(i, j));
        out << buf << (j + 1 < mat.cols() ? " " : "");
      }
      out << "\n";
    }
    out << "\n";
  };
  dump("state transition", model.coef);
  dump("state intercept", model.intercept);
  dump("return loading", model.B);
  dump("return covariance", sigma);
  dump("example state", example_x.transpose());
  dump("example weights", example_alpha.transpose());
  if (!out) throw std::runtime_error("write_prior_report: write failed for " + path);
}

}  // namespace ezrl
