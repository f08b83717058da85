#ifndef EZRL_METRICS_HPP
#define EZRL_METRICS_HPP

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ezrl/types.hpp"

namespace ezrl {

/// Per-step portfolio returns over one evaluation period.
struct ReturnSeries {
  VectorXd returns;
  int periods_per_year = 252;

  Index size() const { return returns.size(); }

  void validate() const {
    if (returns.size() < 1)
      throw std::invalid_argument("ReturnSeries: needs at least one step");
    if (periods_per_year < 1)
      throw std::invalid_argument("ReturnSeries: periods_per_year must be positive");
    for (Index t = 0; t < returns.size(); ++t) {
      if (!(returns[t] > -1.0) || !std::isfinite(returns[t]))
        throw std::invalid_argument("ReturnSeries: return <= -1 at step " +
                                    std::to_string(t));
    }
  }
};

/// Performance summary. Ratios whose denominators can degenerate (zero
/// return dispersion, no downside steps, zero drawdown, missing benchmark)
/// are carried as empty optionals rather than NaN.
struct MetricsReport {
  std::optional<double> sr;
  std::optional<double> sortino;
  std::optional<double> calmar;
  double mdd_pct = 0.0;
  double cr_pct = 0.0;
  std::optional<double> vol_pct;
  std::optional<double> ir;
};

/// Wealth path W_0 = 1, W_t = prod_{s<=t} (1 + r_s); length T+1.
inline VectorXd wealth_path(const ReturnSeries& r) {
  r.validate();
  VectorXd w(r.size() + 1);
  w[0] = 1.0;
  for (Index t = 0; t < r.size(); ++t) w[t + 1] = w[t] * (1.0 + r.returns[t]);
  return w;
}

/// Computes the summary metrics from one return series, risk-free rate 0.
/// Annualization uses sqrt(periods_per_year) for the ratio metrics and a
/// periods_per_year/T exponent for the Calmar numerator.
inline MetricsReport compute_metrics(
    const ReturnSeries& r,
    const std::optional<ReturnSeries>& benchmark = std::nullopt) {
  r.validate();
  const double rf = 0.0;
  const Index T = r.size();
  const double ann = std::sqrt(double(r.periods_per_year));

  MetricsReport rep;
  const VectorXd w = wealth_path(r);
  const double w_final = w[w.size() - 1];
  rep.cr_pct = (w_final - 1.0) * 100.0;

  double peak = w[0];
  double mdd = 0.0;
  for (Index t = 1; t < w.size(); ++t) {
    peak = std::max(peak, w[t]);
    mdd = std::max(mdd, (peak - w[t]) / peak);
  }
  rep.mdd_pct = mdd * 100.0;

  const double mean = r.returns.mean();
  if (T >= 2) {
    const double var =
        (r.returns.array() - mean).square().sum() / double(T - 1);
    const double sd = std::sqrt(var);
    rep.vol_pct = sd * ann * 100.0;
    if (sd > 0.0) rep.sr = (mean - rf) / sd * ann;

    double down_sq = 0.0;
    Index down_count = 0;
    for (Index t = 0; t < T; ++t) {
      const double ex = r.returns[t] - rf;
      if (ex < 0.0) {
        down_sq += ex * ex;
        ++down_count;
      }
    }
    if (down_count > 0) {
      const double dd = std::sqrt(down_sq / double(T));
      rep.sortino = (mean - rf) / dd * ann;
    }
  }

  if (mdd > 0.0) {
    const double annual_return =
        std::pow(w_final, double(r.periods_per_year) / double(T)) - 1.0;
    rep.calmar = annual_return / mdd;
  }

  if (benchmark.has_value()) {
    benchmark->validate();
    if (benchmark->size() != T)
      throw std::invalid_argument("compute_metrics: benchmark length mismatch");
    const VectorXd active = r.returns - benchmark->returns;
    if (T >= 2) {
      const double a_mean = active.mean();
      const double a_sd = std::sqrt((active.array() - a_mean).square().sum() /
                                    double(T - 1));
      if (a_sd > 0.0) rep.ir = a_mean / a_sd * ann;
    }
  }
  return rep;
}

/// Mean and sample standard deviation of one metric across splits, with the
/// undefined entries counted out.
struct AggregateEntry {
  std::optional<double> mean;
  double std_dev = 0.0;
  int n_defined = 0;
  int n_excluded = 0;
  bool single = false;  // std_dev is 0 by convention, not by dispersion
};

struct AggregateReport {
  AggregateEntry sr, sortino, calmar, mdd_pct, cr_pct, vol_pct, ir;
};

namespace detail {

inline AggregateEntry aggregate_one(const std::vector<std::optional<double>>& xs) {
  AggregateEntry e;
  double sum = 0.0;
  for (const auto& x : xs) {
    if (x.has_value()) {
      sum += *x;
      ++e.n_defined;
    } else {
      ++e.n_excluded;
    }
  }
  if (e.n_defined == 0) return e;
  e.mean = sum / e.n_defined;
  if (e.n_defined == 1) {
    e.single = true;
    e.std_dev = 0.0;
    return e;
  }
  double ss = 0.0;
  for (const auto& x : xs)
    if (x.has_value()) ss += (*x - *e.mean) * (*x - *e.mean);
  e.std_dev = std::sqrt(ss / double(e.n_defined - 1));
  return e;
}

}  // namespace detail

/// Cross-split aggregation: per-metric sample mean and std over the defined
/// entries, with exclusion counts.
inline AggregateReport aggregate_splits(const std::vector<MetricsReport>& reports) {
  if (reports.empty()) throw std::invalid_argument("aggregate_splits: empty input");
  auto collect = [&](auto getter) {
    std::vector<std::optional<double>> xs;
    xs.reserve(reports.size());
    for (const auto& r : reports) xs.push_back(getter(r));
    return detail::aggregate_one(xs);
  };
  AggregateReport out;
  out.sr = collect([](const MetricsReport& r) { return r.sr; });
  out.sortino = collect([](const MetricsReport& r) { return r.sortino; });
  out.calmar = collect([](const MetricsReport& r) { return r.calmar; });
  out.mdd_pct = collect(
      [](const MetricsReport& r) { return std::optional<double>(r.mdd_pct); });
  out.cr_pct = collect(
      [](const MetricsReport& r) { return std::optional<double>(r.cr_pct); });
  out.vol_pct = collect([](const MetricsReport& r) { return r.vol_pct; });
  out.ir = collect([](const MetricsReport& r) { return r.ir; });
  return out;
}

}  // namespace ezrl

#endif  // EZRL_METRICS_HPP
