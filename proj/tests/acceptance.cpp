// End-to-end acceptance checks. Each check prints exactly one PASS/FAIL
// line with its measured numbers, and the binary exits nonzero if any
// check fails. Tolerances and budgets are pinned below, next to the
// criterion they gate.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ezrl/advantage.hpp"
#include "ezrl/agents.hpp"
#include "ezrl/cli.hpp"
#include "ezrl/config.hpp"
#include "ezrl/data.hpp"
#include "ezrl/env.hpp"
#include "ezrl/metrics.hpp"
#include "ezrl/nn.hpp"
#include "ezrl/utility.hpp"

#ifndef EZRL_SAMPLE_PRICES
#error "EZRL_SAMPLE_PRICES must point at the bundled price file"
#endif

namespace fs = std::filesystem;
using namespace ezrl;

namespace {

// Pinned tolerances and budgets, one block so nothing hides in call sites.
constexpr double kCeSigma = 0.2;          // lognormal sigma of the CE check
constexpr double kCeGamma = 5.0;
constexpr double kTolSlope = 0.1;         // RMSE log-log slope vs -1/2
constexpr double kTolContraction = 1e-9;  // per-sweep ratio slack over beta
constexpr double kTolVi = 1e-10;          // value-iteration stopping metric
constexpr double kTolCrra = 1e-8;         // sup-norm vs the linear oracle
constexpr double kTolUnrolled = 1e-12;    // recursion vs unrolled sum
constexpr double kTolOmegaSpot = 1e-14;   // omega(1) vs -3.96, relative
constexpr double kTolOmegaLog = 1e-10;    // log-space vs direct, relative
constexpr double kFdStep = 1e-5;          // central-difference step
constexpr double kTolFd = 1e-4;           // gradient relative error
constexpr int kFdPoints = 60;             // checked coordinates per path
constexpr double kTolSimplexSum = 1e-12;
constexpr double kTolSimplexIdem = 1e-15;
constexpr double kTolWealthPerStep = 1e-9;
constexpr double kTolMetrics = 1e-10;
constexpr double kSmokeThreshold = 0.6;   // mean weight on the drift asset
constexpr int kSmokeSeeds = 5;
constexpr int kSmokeNeeded = 4;
constexpr double kTimeCe = 10.0;          // seconds
constexpr double kTimeContraction = 30.0;
constexpr double kTimeSmoke = 300.0;
constexpr double kTimeRisk = 600.0;

struct Result {
  bool ok = false;
  std::string detail;
};

double elapsed(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof(buf), f, ap);
  va_end(ap);
  return buf;
}

// ---------------------------------------------------------------- 1

Result check_ce_consistency() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937 rng(20240819);
  std::normal_distribution<double> z;
  const double ce_true = std::exp((1.0 - kCeGamma) * kCeSigma * kCeSigma / 2.0);

  const int big_k = 100000;
  VectorXd v(big_k);
  for (int i = 0; i < big_k; ++i) v[i] = std::exp(kCeSigma * z(rng));
  const double est = ce_sample(v, kCeGamma);

  // Delta-method standard error of the K-sample power-mean estimator: with
  // Y = V^(1-gamma) lognormal(0, a^2), a = (1-gamma)*sigma,
  // SE = |1/(1-gamma)| * CE * sqrt(exp(a^2) - 1) / sqrt(K).
  const double a2 = (1.0 - kCeGamma) * kCeSigma * (1.0 - kCeGamma) * kCeSigma;
  const double se = ce_true * std::sqrt(std::exp(a2) - 1.0) /
                    (std::abs(1.0 - kCeGamma) * std::sqrt(double(big_k)));
  const double err = std::abs(est - ce_true);
  const bool mc_ok = err <= 3.0 * se;

  const int reps = 100;
  const int ks[] = {10, 100, 1000};
  double lx[3], ly[3];
  for (int i = 0; i < 3; ++i) {
    double mse = 0.0;
    for (int rep = 0; rep < reps; ++rep) {
      VectorXd vv(ks[i]);
      for (int j = 0; j < ks[i]; ++j) vv[j] = std::exp(kCeSigma * z(rng));
      const double e = ce_sample(vv, kCeGamma) - ce_true;
      mse += e * e / double(reps);
    }
    lx[i] = std::log(double(ks[i]));
    ly[i] = 0.5 * std::log(mse);
  }
  const double xbar = (lx[0] + lx[1] + lx[2]) / 3.0;
  const double ybar = (ly[0] + ly[1] + ly[2]) / 3.0;
  double num = 0.0, den = 0.0;
  for (int i = 0; i < 3; ++i) {
    num += (lx[i] - xbar) * (ly[i] - ybar);
    den += (lx[i] - xbar) * (lx[i] - xbar);
  }
  const double slope = num / den;
  const bool slope_ok = std::abs(slope + 0.5) <= kTolSlope;

  const double secs = elapsed(t0);
  return {mc_ok && slope_ok && secs < kTimeCe,
          fmt("K=%d err %.2e vs 3SE %.2e, rmse slope %.3f vs -0.5+-%.1f, %.1f s",
              big_k, err, 3.0 * se, slope, kTolSlope, secs)};
}

// ---------------------------------------------------------------- 2, 3

// Random chain where consumption never rises along any transition: states
// sorted by consumption descending and transition mass only on equal-or-
// later states. On this family the aggregate's certainty-equivalent slope
// stays at or below beta, so the per-sweep metric ratio is a clean test.
TabularMdp random_downhill_mdp(std::mt19937& rng) {
  std::uniform_int_distribution<int> s_dist(2, 10), a_dist(1, 3);
  std::uniform_real_distribution<double> c_dist(0.5, 1.5), u(0.0, 1.0);
  const Index S = s_dist(rng), A = a_dist(rng);
  TabularMdp mdp;
  mdp.consumption.resize(S);
  for (Index s = 0; s < S; ++s) mdp.consumption[s] = c_dist(rng);
  std::sort(mdp.consumption.data(), mdp.consumption.data() + S,
            std::greater<double>());
  for (Index a = 0; a < A; ++a) {
    MatrixXd P = MatrixXd::Zero(S, S);
    for (Index s = 0; s < S; ++s) {
      for (Index j = s; j < S; ++j) P(s, j) = -std::log(u(rng) + 1e-12);
      P.row(s) /= P.row(s).sum();
    }
    mdp.transition.push_back(P);
  }
  return mdp;
}

TabularMdp random_generic_mdp(std::mt19937& rng) {
  std::uniform_int_distribution<int> s_dist(2, 10), a_dist(1, 3);
  std::uniform_real_distribution<double> c_dist(0.5, 1.5), u(0.0, 1.0);
  const Index S = s_dist(rng), A = a_dist(rng);
  TabularMdp mdp;
  mdp.consumption.resize(S);
  for (Index s = 0; s < S; ++s) mdp.consumption[s] = c_dist(rng);
  for (Index a = 0; a < A; ++a) {
    MatrixXd P(S, S);
    for (Index s = 0; s < S; ++s) {
      for (Index j = 0; j < S; ++j) P(s, j) = -std::log(u(rng) + 1e-12);
      P.row(s) /= P.row(s).sum();
    }
    mdp.transition.push_back(P);
  }
  return mdp;
}

Result check_contraction() {
  const auto t0 = std::chrono::steady_clock::now();
  EzParams p;
  p.beta = 0.99;
  p.gamma = 5.0;
  p.psi = 0.5;
  std::mt19937 rng(1234);
  double worst = 0.0;
  int total_sweeps = 0;
  for (int i = 0; i < 20; ++i) {
    const TabularMdp mdp = random_downhill_mdp(rng);
    const auto res = tabular_value_iteration(mdp, p, kTolVi, 20000);
    total_sweeps += res.iterations;
    for (size_t k = 1; k < res.ce_metric_distances.size(); ++k) {
      const double d0 = res.ce_metric_distances[k - 1];
      if (d0 > 1e-300)
        worst = std::max(worst, res.ce_metric_distances[k] / d0);
    }
  }
  const double secs = elapsed(t0);
  return {worst <= p.beta + kTolContraction && secs < kTimeContraction,
          fmt("20 downhill chains, worst per-sweep ratio %.10f vs %.10f, "
              "%d sweeps total, %.1f s",
              worst, p.beta + kTolContraction, total_sweeps, secs)};
}

Result check_crra_equivalence() {
  // At gamma = 1/psi the aggregator exponent equals 1 - gamma, so
  // U = V^(1-gamma) obeys the linear recursion
  //   U(s) = (1-beta) c(s)^(1-gamma) + beta * opt_a ( P_a U )(s),
  // with opt = min because 1 - gamma < 0 flips the ordering. That linear
  // iteration is the independent oracle.
  EzParams p;
  p.beta = 0.99;
  p.gamma = 2.0;
  p.psi = 0.5;
  const double alpha = 1.0 - p.gamma;
  std::mt19937 rng(555);
  double worst = 0.0;
  for (int i = 0; i < 10; ++i) {
    const TabularMdp mdp = random_generic_mdp(rng);
    const Index S = mdp.n_states();

    VectorXd u(S), u_next(S);
    for (Index s = 0; s < S; ++s) u[s] = std::pow(mdp.consumption[s], alpha);
    for (int it = 0; it < 1000000; ++it) {
      for (Index s = 0; s < S; ++s) {
        double best = std::numeric_limits<double>::infinity();
        for (Index a = 0; a < mdp.n_actions(); ++a)
          best = std::min(best, mdp.transition[size_t(a)].row(s).dot(u));
        u_next[s] =
            (1.0 - p.beta) * std::pow(mdp.consumption[s], alpha) + p.beta * best;
      }
      const double change = (u_next - u).cwiseAbs().maxCoeff();
      u = u_next;
      if (change < 1e-14) break;
    }
    VectorXd v_oracle(S);
    for (Index s = 0; s < S; ++s) v_oracle[s] = std::pow(u[s], 1.0 / alpha);

    const auto res = tabular_value_iteration(mdp, p, 1e-12, 200000);
    worst = std::max(worst, (res.values - v_oracle).cwiseAbs().maxCoeff());
  }
  return {worst <= kTolCrra,
          fmt("10 chains, worst sup-norm gap %.2e vs %.0e", worst, kTolCrra)};
}

// ---------------------------------------------------------------- 4

Result check_advantage_recursion() {
  std::mt19937 rng(44);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::uniform_real_distribution<double> sym(-1.0, 1.0);

  // (a) lambda = 0 must return the raw one-step residuals unchanged.
  for (int inst = 0; inst < 200; ++inst) {
    const Index T = 1 + Index(rng() % 64);
    std::vector<StepRecord> recs(static_cast<size_t>(T));
    AaeConfig cfg;
    cfg.lambda = 0.0;
    for (auto& r : recs) {
      r.value = 0.3 + u01(rng);
      r.ez_target = 0.3 + u01(rng);
      r.next_value = 0.3 + u01(rng);
      r.done = u01(rng) < 0.15;
    }
    const VectorXd adv = aae(recs, cfg);
    for (Index t = 0; t < T; ++t)
      if (adv[t] != recs[size_t(t)].ez_target - recs[size_t(t)].value)
        return {false, fmt("lambda=0 mismatch at instance %d step %ld", inst,
                           long(t))};
  }

  // (b) the backward recursion equals the forward unrolled weighted sum.
  double worst = 0.0;
  for (int inst = 0; inst < 1000; ++inst) {
    const Index T = 1 + Index(rng() % 64);
    VectorXd deltas(T), omegas(T);
    std::vector<bool> dones(static_cast<size_t>(T));
    for (Index t = 0; t < T; ++t) {
      deltas[t] = sym(rng);
      omegas[t] = sym(rng);
      dones[size_t(t)] = u01(rng) < 0.15;
    }
    const double beta = 0.9 + 0.09 * u01(rng);
    const double lambda = 0.95 * u01(rng);
    const VectorXd adv = aae_from_components(deltas, omegas, dones, beta, lambda);
    for (Index t = 0; t < T; ++t) {
      double acc = 0.0, prod = 1.0;
      for (Index l = t; l < T; ++l) {
        acc += prod * deltas[l];
        if (dones[size_t(l)]) break;
        prod *= beta * lambda * omegas[l];
      }
      worst = std::max(worst, std::abs(adv[t] - acc));
    }
  }
  if (worst > kTolUnrolled)
    return {false, fmt("unrolled-sum gap %.2e vs %.0e", worst, kTolUnrolled)};

  // (c) with unit omega and beta playing the discount, the recursion must
  // reproduce the discounted-sum estimator bit for bit.
  for (int inst = 0; inst < 200; ++inst) {
    const Index T = 1 + Index(rng() % 64);
    VectorXd rewards(T), values(T), next_values(T);
    std::vector<bool> dones(static_cast<size_t>(T));
    for (Index t = 0; t < T; ++t) {
      rewards[t] = sym(rng);
      values[t] = 0.5 + u01(rng);
      next_values[t] = 0.5 + u01(rng);
      dones[size_t(t)] = u01(rng) < 0.15;
    }
    const double discount = 0.9 + 0.099 * u01(rng);
    const double lambda = u01(rng);
    VectorXd deltas(T);
    for (Index t = 0; t < T; ++t) {
      const double not_done = dones[size_t(t)] ? 0.0 : 1.0;
      deltas[t] =
          rewards[t] + discount * next_values[t] * not_done - values[t];
    }
    const VectorXd a = aae_from_components(
        deltas, VectorXd::Ones(T), dones, discount, lambda);
    const VectorXd g =
        gae(rewards, values, next_values, dones, discount, lambda);
    for (Index t = 0; t < T; ++t)
      if (a[t] != g[t])
        return {false,
                fmt("omega=1 vs discounted-sum mismatch at instance %d step %ld",
                    inst, long(t))};
  }
  return {true, fmt("lambda=0 exact on 200, unrolled gap %.2e vs %.0e on "
                    "1000, omega=1 exact on 200",
                    worst, kTolUnrolled)};
}

// ---------------------------------------------------------------- 5

double omega_direct(double v, const AaeConfig& c) {
  const double omg = 1.0 - c.gamma_risk;
  const double outer = (1.0 - 1.0 / c.psi) / omg - 1.0;
  return c.beta * std::pow(std::pow(v, omg), outer) * std::pow(v, -c.gamma_risk) *
         omg;
}

Result check_omega_spots() {
  AaeConfig defaults;  // beta 0.99, gamma 5, psi 1
  const double spot = omega_weight(1.0, defaults);
  const double want = defaults.beta * (1.0 - defaults.gamma_risk);
  const double spot_rel = std::abs(spot - want) / std::abs(want);
  if (spot_rel > kTolOmegaSpot)
    return {false, fmt("omega(1) = %.17g vs %.17g, rel %.2e", spot, want,
                       spot_rel)};

  double worst = 0.0;
  std::vector<AaeConfig> cfgs(3);
  cfgs[0] = defaults;
  cfgs[1].gamma_risk = 5.0;
  cfgs[1].psi = 0.5;
  cfgs[2].gamma_risk = 0.5;
  cfgs[2].psi = 2.0;
  for (const auto& c : cfgs) {
    for (int i = 0; i <= 80; ++i) {
      const double v = 1e-4 * std::pow(10.0, 8.0 * i / 80.0);
      const double a = omega_weight(v, c);
      const double d = omega_direct(v, c);
      worst = std::max(worst, std::abs(a - d) / std::abs(d));
    }
  }
  return {worst <= kTolOmegaLog,
          fmt("omega(1) rel %.1e vs %.0e, log-space vs direct worst rel %.2e "
              "vs %.0e over [1e-4,1e4]",
              spot_rel, kTolOmegaSpot, worst, kTolOmegaLog)};
}

// ---------------------------------------------------------------- 6

struct Coord {
  double* v;
  const double* g;
};

std::vector<Coord> flatten(const std::vector<TensorRef>& blocks) {
  std::vector<Coord> out;
  for (const auto& b : blocks)
    for (Index i = 0; i < b.value->size(); ++i)
      out.push_back({b.value->data() + i, b.grad->data() + i});
  return out;
}

double rel_gap(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

double max_fd_gap(std::vector<Coord>& coords, const std::function<double()>& loss,
                  const std::function<void()>& backward, std::mt19937& rng) {
  backward();
  std::uniform_int_distribution<size_t> pick(0, coords.size() - 1);
  double worst = 0.0;
  for (int i = 0; i < kFdPoints; ++i) {
    Coord& c = coords[pick(rng)];
    const double orig = *c.v;
    *c.v = orig + kFdStep;
    const double up = loss();
    *c.v = orig - kFdStep;
    const double dn = loss();
    *c.v = orig;
    worst = std::max(worst, rel_gap(*c.g, (up - dn) / (2.0 * kFdStep)));
  }
  return worst;
}

// Redraws the batch until every first-layer pre-activation is clear of the
// rectifier kink, so the finite differences stay one-sided.
MatrixXd kink_free_batch(const Mlp& net, Index rows, Index cols,
                         std::mt19937& rng) {
  std::normal_distribution<double> z;
  for (int tries = 0; tries < 200; ++tries) {
    MatrixXd x(rows, cols);
    for (Index i = 0; i < x.size(); ++i) x.data()[i] = z(rng);
    MatrixXd pre = net.layers()[0].W * x;
    pre.colwise() += net.layers()[0].b.col(0);
    if (pre.array().abs().minCoeff() > 1e-3) return x;
  }
  throw std::runtime_error("no kink-free batch found");
}

Result check_gradients() {
  std::mt19937 rng(606);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  // critic regression path
  Mlp critic(3, {8}, 1);
  critic.init(rng);
  const MatrixXd cobs = kink_free_batch(critic, 3, 6, rng);
  VectorXd targets(6);
  for (Index i = 0; i < 6; ++i) targets[i] = 0.2 + 1.8 * u01(rng);
  auto critic_loss = [&]() {
    const MatrixXd raw = critic.forward_inference(cobs);
    double m = 0.0;
    for (Index b = 0; b < raw.cols(); ++b) {
      const double r = positive_value(raw(0, b)) - targets[b];
      m += r * r;
    }
    return m / double(raw.cols());
  };
  auto critic_backward = [&]() {
    critic.zero_grad();
    critic_mse_and_backward(critic, cobs, targets, 1.0);
  };
  auto critic_coords = flatten(critic.params());
  const double w_critic = max_fd_gap(critic_coords, critic_loss, critic_backward, rng);

  // shared actor and head for the policy paths
  const Index B = 8;
  Mlp actor(4, {8}, 3);
  actor.init(rng, std::sqrt(2.0), 0.01);
  GaussianPolicyHead head(3, -0.5);
  for (Index i = 0; i < head.log_std.size(); ++i)
    head.log_std.data()[i] = -1.5 + 2.0 * u01(rng);
  const MatrixXd pobs = kink_free_batch(actor, 4, B, rng);
  const MatrixXd means0 = actor.forward_inference(pobs);
  MatrixXd acts(3, B);
  for (Index i = 0; i < acts.size(); ++i) acts.data()[i] = z(rng) * 0.3;
  acts += means0;

  // clipped-ratio surrogate: the log-ratio offsets place the batch on both
  // sides of the clip band with margin, away from the min kink.
  const double ratio_lo = 0.8, ratio_hi = 1.2;
  const double offs[B] = {0.3, -0.35, 0.05, -0.05, 0.5, -0.5, 0.12, -0.12};
  const double advs[B] = {1.3, -0.7, 0.9, -1.1, 0.6, -0.5, 1.0, -0.8};
  VectorXd lp_old(B);
  for (Index b = 0; b < B; ++b)
    lp_old[b] = head.log_prob(means0.col(b), acts.col(b)) - offs[b];

  auto surrogate = [&]() {
    const MatrixXd means = actor.forward_inference(pobs);
    double loss = 0.0;
    for (Index b = 0; b < B; ++b) {
      const double ratio =
          std::exp(head.log_prob(means.col(b), acts.col(b)) - lp_old[b]);
      const double s1 = ratio * advs[b];
      const double s2 = std::clamp(ratio, ratio_lo, ratio_hi) * advs[b];
      loss -= std::min(s1, s2) / double(B);
    }
    return loss;
  };
  auto surrogate_backward = [&]() {
    actor.zero_grad();
    head.d_log_std.setZero();
    const MatrixXd means = actor.forward(pobs);
    MatrixXd grad_mean = MatrixXd::Zero(3, B);
    for (Index b = 0; b < B; ++b) {
      const double ratio =
          std::exp(head.log_prob(means.col(b), acts.col(b)) - lp_old[b]);
      const double s1 = ratio * advs[b];
      const double s2 = std::clamp(ratio, ratio_lo, ratio_hi) * advs[b];
      if (s1 <= s2) {
        const double coef = -advs[b] * ratio / double(B);
        grad_mean.col(b) = coef * head.log_prob_grad_mean(means.col(b), acts.col(b));
        head.d_log_std.col(0) +=
            coef * head.log_prob_grad_log_std(means.col(b), acts.col(b));
      }
    }
    actor.backward(grad_mean);
  };
  auto policy_coords = flatten(actor.params());
  for (const Coord& c : flatten(head.params())) policy_coords.push_back(c);
  const double w_surr = max_fd_gap(policy_coords, surrogate, surrogate_backward, rng);

  // entropy path: depends on the log-std parameters alone
  GaussianPolicyHead h2(6, -1.0);
  double w_ent = 0.0;
  for (int i = 0; i < kFdPoints; ++i) {
    for (Index j = 0; j < 6; ++j) h2.log_std(j, 0) = -4.5 + 6.0 * u01(rng);
    const Index j = Index(rng() % 6);
    const VectorXd an = h2.entropy_grad_log_std();
    const double orig = h2.log_std(j, 0);
    h2.log_std(j, 0) = orig + kFdStep;
    const double up = h2.entropy();
    h2.log_std(j, 0) = orig - kFdStep;
    const double dn = h2.entropy();
    h2.log_std(j, 0) = orig;
    w_ent = std::max(w_ent, rel_gap(an[j], (up - dn) / (2.0 * kFdStep)));
  }

  // log-probability path through the actor trunk and the head
  const VectorXd one_obs = pobs.col(0);
  const VectorXd one_act = acts.col(0);
  auto logp = [&]() {
    const MatrixXd mean = actor.forward_inference(one_obs);
    return head.log_prob(mean.col(0), one_act);
  };
  auto logp_backward = [&]() {
    actor.zero_grad();
    head.d_log_std.setZero();
    const MatrixXd mean = actor.forward(one_obs);
    const VectorXd gm = head.log_prob_grad_mean(mean.col(0), one_act);
    head.d_log_std.col(0) = head.log_prob_grad_log_std(mean.col(0), one_act);
    actor.backward(gm);
  };
  const double w_logp = max_fd_gap(policy_coords, logp, logp_backward, rng);

  const double worst = std::max({w_critic, w_surr, w_ent, w_logp});
  return {worst < kTolFd,
          fmt("worst rel gap: critic %.1e, surrogate %.1e, entropy %.1e, "
              "log-prob %.1e, all vs %.0e at h=%.0e, %d points each",
              w_critic, w_surr, w_ent, w_logp, kTolFd, kFdStep, kFdPoints)};
}

// ---------------------------------------------------------------- 7

ReturnsTable random_returns(int T, int n, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> z;
  ReturnsTable t;
  for (int j = 0; j < n; ++j) t.assets.push_back("A" + std::to_string(j));
  t.returns.resize(T, n);
  t.dates.resize(size_t(T));
  for (int i = 0; i < T; ++i) {
    for (int j = 0; j < n; ++j)
      t.returns(i, j) = std::clamp(0.01 * z(rng), -0.2, 0.2);
    t.dates[size_t(i)] = "d" + std::to_string(i);
  }
  return t;
}

Result check_env_invariants() {
  std::mt19937 rng(77);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  double worst_sum = 0.0, worst_idem = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const Index n = 2 + Index(rng() % 6);
    VectorXd x(n);
    const double scale = std::pow(10.0, -2.0 + 4.0 * u01(rng));
    for (Index j = 0; j < n; ++j) x[j] = scale * z(rng);
    if (i % 17 == 0) x.setConstant(-u01(rng));  // all-clipped fallback
    const VectorXd w = project_simplex(x);
    if ((w.array() < 0.0).any())
      return {false, fmt("negative component at input %d", i)};
    worst_sum = std::max(worst_sum, std::abs(w.sum() - 1.0));
    worst_idem =
        std::max(worst_idem, (project_simplex(w) - w).cwiseAbs().maxCoeff());
  }
  if (worst_sum > kTolSimplexSum || worst_idem > kTolSimplexIdem)
    return {false, fmt("simplex sum gap %.2e vs %.0e, idempotence gap %.2e vs "
                       "%.0e",
                       worst_sum, kTolSimplexSum, worst_idem, kTolSimplexIdem)};

  const ReturnsTable table = random_returns(300, 3, 909);
  EpisodeConfig ep;
  ep.episode_length = 300;
  PortfolioEnv env(table, 0, table.n_rows(), ep);
  env.reset(0, 300);
  double acc = 0.0, final_lw = 0.0;
  int steps = 0;
  while (!env.episode_over()) {
    const auto res = env.step(random_agent_action(3, 0.05, rng));
    acc += std::log1p(res.portfolio_return);
    final_lw = res.next.log_wealth;
    ++steps;
  }
  const double wealth_gap = std::abs(final_lw - acc);
  if (wealth_gap > kTolWealthPerStep * steps)
    return {false, fmt("wealth identity gap %.2e vs %.0e over %d steps",
                       wealth_gap, kTolWealthPerStep * steps, steps)};

  PortfolioEnv env2(table, 10, table.n_rows(), ep);
  env2.reset(5, 100);
  for (int i = 0; i < 3; ++i) env2.step(random_agent_action(3, 0.05, rng));
  const EnvState before = env2.state();
  const Index cursor_before = env2.cursor();
  const MatrixXd sampled =
      sample_return_rows(env2.table(), 60, env2.cursor() - 1, 10, rng);
  const VectorXd w = project_simplex(VectorXd::Random(3));
  env2.peek_next_states(w, sampled);
  const EnvState& after = env2.state();
  const bool pure = after.log_wealth == before.log_wealth &&
                    after.t == before.t && env2.cursor() == cursor_before &&
                    (after.prev_weights.array() == before.prev_weights.array())
                        .all();
  if (!pure) return {false, "state changed across a preview call"};

  return {true, fmt("1e5 projections (sum gap %.1e, idempotence %.1e), wealth "
                    "identity gap %.1e over %d steps, preview leaves state "
                    "untouched",
                    worst_sum, worst_idem, wealth_gap, steps)};
}

// ---------------------------------------------------------------- 8

struct OracleMetrics {
  bool sr_def = false, sortino_def = false, calmar_def = false, vol_def = false;
  double sr = 0, sortino = 0, calmar = 0, vol = 0, mdd = 0, cr = 0;
};

OracleMetrics oracle_metrics(const std::vector<double>& r, int ppy) {
  OracleMetrics o;
  const int T = int(r.size());
  double wealth = 1.0, peak = 1.0;
  for (double x : r) {
    wealth *= 1.0 + x;
    peak = std::max(peak, wealth);
    o.mdd = std::max(o.mdd, (peak - wealth) / peak);
  }
  o.mdd *= 100.0;
  o.cr = (wealth - 1.0) * 100.0;
  double mean = 0.0;
  for (double x : r) mean += x;
  mean /= T;
  if (T >= 2) {
    double ss = 0.0;
    for (double x : r) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / (T - 1));
    o.vol_def = true;
    o.vol = sd * std::sqrt(double(ppy)) * 100.0;
    if (sd > 0.0) {
      o.sr_def = true;
      o.sr = mean / sd * std::sqrt(double(ppy));
    }
    double down = 0.0;
    int n_down = 0;
    for (double x : r)
      if (x < 0.0) {
        down += x * x;
        ++n_down;
      }
    if (n_down > 0) {
      o.sortino_def = true;
      o.sortino = mean / std::sqrt(down / T) * std::sqrt(double(ppy));
    }
  }
  if (o.mdd > 0.0) {
    o.calmar_def = true;
    o.calmar =
        (std::pow(wealth, double(ppy) / double(T)) - 1.0) / (o.mdd / 100.0);
  }
  return o;
}

Result check_metrics_oracle() {
  std::mt19937 rng(88);
  std::uniform_real_distribution<double> u(-0.05, 0.08);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const int T = 2 + int(rng() % 39);
    std::vector<double> r(static_cast<size_t>(T));
    ReturnSeries series;
    series.returns.resize(T);
    for (int t = 0; t < T; ++t) {
      r[size_t(t)] = u(rng);
      series.returns[t] = r[size_t(t)];
    }
    const MetricsReport got = compute_metrics(series);
    const OracleMetrics want = oracle_metrics(r, series.periods_per_year);
    if (got.sr.has_value() != want.sr_def ||
        got.sortino.has_value() != want.sortino_def ||
        got.calmar.has_value() != want.calmar_def ||
        got.vol_pct.has_value() != want.vol_def)
      return {false, fmt("definedness mismatch on series %d", i)};
    worst = std::max(worst, std::abs(got.mdd_pct - want.mdd));
    worst = std::max(worst, std::abs(got.cr_pct - want.cr));
    if (want.sr_def) worst = std::max(worst, std::abs(*got.sr - want.sr));
    if (want.sortino_def)
      worst = std::max(worst, std::abs(*got.sortino - want.sortino));
    if (want.calmar_def)
      worst = std::max(worst, std::abs(*got.calmar - want.calmar));
    if (want.vol_def)
      worst = std::max(worst, std::abs(*got.vol_pct - want.vol));
  }
  if (worst > kTolMetrics)
    return {false, fmt("worst metric gap %.2e vs %.0e", worst, kTolMetrics)};

  // Degenerate shapes must come back as missing values, not numbers.
  auto series_of = [](std::initializer_list<double> xs) {
    ReturnSeries s;
    s.returns.resize(Index(xs.size()));
    Index i = 0;
    for (double x : xs) s.returns[i++] = x;
    return s;
  };
  const MetricsReport flat =
      compute_metrics(series_of({0.015625, 0.015625, 0.015625, 0.015625}));
  if (flat.sr || flat.sortino || flat.calmar || !flat.vol_pct ||
      *flat.vol_pct != 0.0)
    return {false, "constant series should disable sr, sortino, calmar"};
  const MetricsReport single = compute_metrics(series_of({0.05}));
  if (single.sr || single.sortino || single.vol_pct || single.calmar)
    return {false, "one-step gain should disable sr, sortino, vol, calmar"};
  const MetricsReport single_loss = compute_metrics(series_of({-0.05}));
  if (!single_loss.calmar || single_loss.mdd_pct <= 0.0)
    return {false, "one-step loss should keep calmar defined"};
  const MetricsReport no_down = compute_metrics(series_of({0.01, 0.02, 0.03}));
  if (no_down.sortino || no_down.calmar || !no_down.sr)
    return {false, "monotone gains should disable sortino and calmar"};

  return {true, fmt("100 random series, worst gap %.1e vs %.0e, degenerate "
                    "markers intact",
                    worst, kTolMetrics)};
}

// ---------------------------------------------------------------- 9, 10

ReturnsTable two_asset_table(int T, double mu_a, double sd_a, double mu_b,
                             double sd_b, double crash_p, double crash_r,
                             unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ReturnsTable t;
  t.assets = {"A", "B"};
  t.returns.resize(T, 2);
  t.dates.resize(size_t(T));
  for (int i = 0; i < T; ++i) {
    double ra = mu_a + sd_a * z(rng);
    if (crash_p > 0.0 && u(rng) < crash_p) ra = crash_r;
    t.returns(i, 0) = std::max(ra, -0.5);
    t.returns(i, 1) = std::max(mu_b + sd_b * z(rng), -0.5);
    t.dates[size_t(i)] = "d" + std::to_string(i);
  }
  return t;
}

double mean_weight_on_first(Trainer& tr, PortfolioEnv env, std::mt19937& rng) {
  PolicyFn pol = [&](const EnvState& s) { return tr.act_mean(s); };
  const Trajectory traj = run_episode(env, pol, EpisodeMode::eval, rng);
  double acc = 0.0;
  for (const auto& st : traj.steps) acc += st.applied_weights[0];
  return acc / double(traj.size());
}

double train_and_measure(const ReturnsTable& table, std::uint64_t seed,
                         double gamma_override = -1.0) {
  EpisodeConfig ep;
  PortfolioEnv env(table, 0, table.n_rows(), ep);
  AgentConfig acfg;  // stock settings end to end
  acfg.seed = seed;
  if (gamma_override > 0.0) acfg.ez.gamma = gamma_override;
  Trainer tr(acfg, env);
  if (acfg.init_from_prior)
    tr.init_actor_from_prior(tr.fit_prior_from_history(), acfg.prior_init_steps);
  tr.train(nullptr);
  std::mt19937 eval_rng(7);
  PortfolioEnv env_eval(table, 0, table.n_rows(), ep);
  return mean_weight_on_first(tr, env_eval, eval_rng);
}

Result check_learning_smoke() {
  const auto t0 = std::chrono::steady_clock::now();
  const ReturnsTable table =
      two_asset_table(600, 5e-4, 1e-2, -5e-4, 1e-2, 0.0, 0.0, 99);
  int wins = 0;
  std::string per_seed;
  for (std::uint64_t seed = 0; seed < kSmokeSeeds; ++seed) {
    const double w = train_and_measure(table, seed);
    per_seed += fmt("%s%.2f", seed ? "/" : "", w);
    if (w > kSmokeThreshold) ++wins;
  }
  const double secs = elapsed(t0);
  return {wins >= kSmokeNeeded && secs < kTimeSmoke,
          fmt("%d/%d seeds end above %.1f on the drift asset (need %d), "
              "weights %s, %.0f s",
              wins, kSmokeSeeds, kSmokeThreshold, kSmokeNeeded,
              per_seed.c_str(), secs)};
}

Result check_risk_ordering() {
  const auto t0 = std::chrono::steady_clock::now();
  const ReturnsTable table =
      two_asset_table(600, 8e-4, 1e-2, 1e-4, 5e-3, 0.02, -0.08, 424);
  int ordered = 0;
  std::string per_seed;
  for (std::uint64_t seed = 0; seed < kSmokeSeeds; ++seed) {
    const double w_lo = train_and_measure(table, seed, 2.0);
    const double w_hi = train_and_measure(table, seed, 10.0);
    per_seed += fmt("%s(%.2f,%.2f)", seed ? " " : "", w_lo, w_hi);
    if (w_hi < w_lo) ++ordered;
  }
  const double secs = elapsed(t0);
  return {ordered >= kSmokeNeeded && secs < kTimeRisk,
          fmt("%d/%d seed pairs allocate less to the crash asset at higher "
              "risk aversion (need %d), (gamma2,gamma10) weights %s, %.0f s",
              ordered, kSmokeSeeds, kSmokeNeeded, per_seed.c_str(), secs)};
}

// ---------------------------------------------------------------- 11

Result check_constraint_enforcement() {
  auto expect_reject = [](Algorithm alg) -> std::string {
    AgentConfig cfg;
    cfg.algorithm = alg;
    cfg.objective = Objective::recursive;
    try {
      cfg.validate();
    } catch (const std::invalid_argument& e) {
      const std::string msg = e.what();
      if (msg.find("critic") == std::string::npos)
        return "diagnostic does not name the critic rule: " + msg;
      return "";
    }
    return std::string("pairing recursive with ") + to_string(alg) +
           " was accepted";
  };
  for (Algorithm alg : {Algorithm::reinforce, Algorithm::random}) {
    const std::string err = expect_reject(alg);
    if (!err.empty()) return {false, err};
  }

  // The config layer may reject the pairing at load time or at validate();
  // either way the diagnostic must name the rule.
  std::istringstream ini(
      "[agent]\nalgorithm = reinforce\nobjective = recursive\n");
  try {
    RunConfig cfg = run_config_from_ini(parse_ini(ini));
    cfg.prices_path = "unused.csv";
    cfg.validate();
    return {false, "config layer accepted reinforce with the recursive objective"};
  } catch (const std::invalid_argument& e) {
    if (std::string(e.what()).find("critic") == std::string::npos)
      return {false, std::string("config diagnostic does not name the rule: ") +
                         e.what()};
  }
  return {true, "recursive with reinforce or random rejected, diagnostic "
                "names the critic rule at both layers"};
}

// ---------------------------------------------------------------- 12, 13

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<std::string, std::string> dir_bytes(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& entry : fs::recursive_directory_iterator(root))
    if (entry.is_regular_file())
      out[fs::relative(entry.path(), root).generic_string()] =
          slurp(entry.path());
  return out;
}

RunConfig small_run_config(const std::string& out_dir) {
  RunConfig cfg;
  cfg.prices_path = EZRL_SAMPLE_PRICES;
  cfg.out_dir = out_dir;
  cfg.n_splits = 2;
  cfg.ratio_min = 0.5;
  cfg.ratio_max = 0.6;
  cfg.seeds = {0};
  cfg.agent.hid_layers = {16, 16};
  cfg.agent.max_frames = 256;
  cfg.agent.time_horizon = 64;
  cfg.agent.minibatch_size = 32;
  cfg.agent.training_epochs = 2;
  cfg.agent.prior_init_steps = 20;
  return cfg;
}

Result check_pipeline_determinism() {
  if (!fs::exists(EZRL_SAMPLE_PRICES))
    return {false, std::string("missing bundled prices at ") + EZRL_SAMPLE_PRICES};
  const fs::path base = fs::temp_directory_path() / "ezrl_acceptance";
  std::map<std::string, std::string> snaps[2];
  for (int run = 0; run < 2; ++run) {
    const fs::path out = base / ("determinism_" + std::to_string(run));
    fs::remove_all(out);
    RunConfig cfg = small_run_config(out.string());
    cmd_ingest(cfg);
    cmd_train(cfg);
    cmd_evaluate(cfg);
    snaps[run] = dir_bytes(out / "results");
  }
  if (snaps[0].empty()) return {false, "no metrics files were produced"};
  if (snaps[0] != snaps[1]) {
    for (const auto& [name, bytes] : snaps[0]) {
      auto it = snaps[1].find(name);
      if (it == snaps[1].end())
        return {false, "second run is missing " + name};
      if (it->second != bytes) return {false, "bytes differ in " + name};
    }
    return {false, "second run produced extra metrics files"};
  }
  return {true, fmt("%zu metrics files byte-identical across two "
                    "ingest/train/evaluate runs",
                    snaps[0].size())};
}

Result check_harness_shape() {
  const fs::path out = fs::temp_directory_path() / "ezrl_acceptance" / "shape";
  fs::remove_all(out);
  RunConfig cfg = small_run_config(out.string());
  cfg.n_splits = 1;
  cfg.ratio_max = 0.5;
  cfg.agent.hid_layers = {8};
  cfg.agent.max_frames = 64;
  cfg.agent.time_horizon = 32;
  cfg.agent.minibatch_size = 16;
  cfg.agent.prior_init_steps = 4;
  cmd_ingest(cfg);
  cmd_train(cfg);
  cmd_evaluate(cfg);

  const AblateResult ab = cmd_ablate(cfg);
  const int want_w[] = {183, 122, 61, 21};
  const int want_k[] = {1, 2, 5, 10, 20};
  if (ab.cells.size() != 20)
    return {false, fmt("default grid has %zu cells, want 20", ab.cells.size())};
  size_t idx = 0;
  for (int w : want_w)
    for (int k : want_k) {
      if (ab.cells[idx].window != w || ab.cells[idx].k != k)
        return {false, fmt("cell %zu is w%d_k%d, want w%d_k%d", idx,
                           ab.cells[idx].window, ab.cells[idx].k, w, k)};
      ++idx;
    }
  if (!fs::exists(ab.cells_path) || !fs::exists(ab.table_path))
    return {false, "grid summary files were not written"};

  const std::string text = cmd_report(cfg.out_dir);
  std::istringstream lines(text);
  std::string line, header;
  while (std::getline(lines, line))
    if (line.rfind("run", 0) == 0 && line.find("SR") != std::string::npos) {
      header = line;
      break;
    }
  if (header.empty()) return {false, "report has no run table header"};
  const char* cols[] = {"SR", "Sortino", "Calmar", "MDD%", "CR%", "Vol%"};
  size_t pos = 0;
  for (const char* c : cols) {
    const size_t at = header.find(c, pos);
    if (at == std::string::npos)
      return {false, fmt("column %s out of order in: %s", c, header.c_str())};
    pos = at + std::string(c).size();
  }
  return {true, "default grid is the 4x5 window-by-samples layout, report "
                "columns run SR, Sortino, Calmar, MDD%, CR%, Vol%"};
}

}  // namespace

int main() {
  struct Check {
    const char* name;
    std::function<Result()> fn;
  };
  const std::vector<Check> checks = {
      {"certainty-equivalent estimator consistency", check_ce_consistency},
      {"tabular iteration contraction rate", check_contraction},
      {"power-utility special case equivalence", check_crra_equivalence},
      {"advantage recursion correctness", check_advantage_recursion},
      {"residual weight spot values", check_omega_spots},
      {"gradient integrity", check_gradients},
      {"environment invariants", check_env_invariants},
      {"metrics oracle agreement", check_metrics_oracle},
      {"learning smoke test", check_learning_smoke},
      {"risk-sensitivity ordering", check_risk_ordering},
      {"constraint enforcement", check_constraint_enforcement},
      {"pipeline determinism", check_pipeline_determinism},
      {"harness shape", check_harness_shape},
  };

  int failures = 0;
  for (size_t i = 0; i < checks.size(); ++i) {
    Result r;
    try {
      r = checks[i].fn();
    } catch (const std::exception& e) {
      r = {false, std::string("exception: ") + e.what()};
    }
    std::printf("[%2zu] %s  %s (%s)\n", i + 1, r.ok ? "PASS" : "FAIL",
                checks[i].name, r.detail.c_str());
    std::fflush(stdout);
    if (!r.ok) ++failures;
  }
  std::printf("%zu/%zu acceptance checks passed\n", checks.size() - failures,
              checks.size());
  return failures == 0 ? 0 : 1;
}
