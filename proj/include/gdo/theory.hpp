#pragma once

// Error tracking, the Lyapunov value V = Err + lambda_V * |dtheta|^2, drift
// summaries over a trace, and the closed-form target error bound
//
//   Err_T <= Err_0 exp(-kappa gamma0 T) + (c1 eps / gamma0) sqrt(T/m)
//            + c2 sqrt(log(m T / delta) / m)
//
// with kappa = mu gamma0 / 2, c1 = sigma^2 gamma0^2 / sqrt(2) and
// c2 = 2 c sqrt(log(1/delta)).

#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include "gdo/domains.hpp"
#include "gdo/errors.hpp"
#include "gdo/gdo.hpp"
#include "gdo/mlp.hpp"

namespace gdo {

/// Misclassification fraction of `model` on oracle-labeled data.
inline double err_rate(const MlpModel& model, const Dataset& labeled) {
  if (!labeled.labeled()) throw ContractError("err_rate needs oracle labels");
  if (labeled.size() == 0) throw ArgumentError("err_rate of an empty dataset");
  Labels pred = pseudo_labels(model, labeled.x);
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) wrong += pred[i] != (*labeled.y)[i];
  return static_cast<double>(wrong) / static_cast<double>(pred.size());
}

/// err + lambda_v * |theta_now - theta_prev|^2 over the flattened layers.
inline double lyapunov_v(double err, const std::vector<DenseLayer>& theta_now,
                         const std::vector<DenseLayer>& theta_prev, double lambda_v) {
  if (theta_now.size() != theta_prev.size())
    throw ShapeError("lyapunov_v: " + std::to_string(theta_now.size()) + " vs " +
                     std::to_string(theta_prev.size()) + " layers");
  for (std::size_t i = 0; i < theta_now.size(); ++i)
    if (theta_now[i].weight.rows() != theta_prev[i].weight.rows() ||
        theta_now[i].weight.cols() != theta_prev[i].weight.cols() ||
        theta_now[i].bias.size() != theta_prev[i].bias.size())
      throw ShapeError("lyapunov_v: layer " + std::to_string(i) + " shapes differ");
  return err + lambda_v * squared_distance(flatten_theta(theta_now), flatten_theta(theta_prev));
}

struct LyapunovEntry {
  std::size_t t = 0;
  std::size_t k = 0;
  double err = 0.0;
  double theta_drift_sq = 0.0;
  double v = 0.0;
};

struct LyapunovTrace {
  double lambda_v = 1.0;
  std::vector<LyapunovEntry> entries;

  void push(std::size_t t, std::size_t k, double err, double drift_sq) {
    entries.push_back(LyapunovEntry{t, k, err, drift_sq, err + lambda_v * drift_sq});
  }
};

/// Trace rebuilt from a run's batch records with the given drift weight.
inline LyapunovTrace lyapunov_trace(const RunRecord& rec, double lambda_v) {
  LyapunovTrace trace{lambda_v, {}};
  for (const auto& b : rec.batches) trace.push(b.t, b.k, b.err, b.theta_drift_sq);
  return trace;
}

/// Descriptive summary; it makes no pass/fail claim.
struct DriftReport {
  double first_window_mean = 0.0;
  double last_window_mean = 0.0;
  double nonincrease_fraction = 0.0;  // share of consecutive pairs with V[i+1] <= V[i]
  double contraction_ratio = 1.0;     // least-squares rho in V[i+1] ~ rho * V[i]
  std::size_t length = 0;
};

inline DriftReport drift_report(const LyapunovTrace& trace, std::size_t window) {
  const auto& e = trace.entries;
  if (window == 0) throw ArgumentError("drift_report: window must be >= 1");
  if (e.size() < 2 * window)
    throw ArgumentError("drift_report: trace of " + std::to_string(e.size()) +
                        " entries is shorter than two windows of " + std::to_string(window));
  DriftReport r;
  r.length = e.size();
  for (std::size_t i = 0; i < window; ++i) {
    r.first_window_mean += e[i].v;
    r.last_window_mean += e[e.size() - window + i].v;
  }
  r.first_window_mean /= static_cast<double>(window);
  r.last_window_mean /= static_cast<double>(window);

  std::size_t nonincrease = 0;
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i + 1 < e.size(); ++i) {
    nonincrease += e[i + 1].v <= e[i].v;
    num += e[i].v * e[i + 1].v;
    den += e[i].v * e[i].v;
  }
  r.nonincrease_fraction = static_cast<double>(nonincrease) / static_cast<double>(e.size() - 1);
  r.contraction_ratio = den > 0.0 ? num / den : 1.0;
  return r;
}

struct BoundParams {
  double mu = 1.0;       // strong convexity
  double sigma2 = 0.0;   // gradient variance bound
  double gamma0 = 0.05;
  double epsilon = 0.0;  // learning-rate decay / batch discrepancy
  std::size_t m = 1;     // batches per domain
  std::size_t T = 1;     // domains
  double delta = 0.05;   // confidence
  double err0 = 1.0;
  double c = 0.0;        // shift constant

  double kappa() const { return mu * gamma0 / 2.0; }
  double c1() const { return sigma2 * gamma0 * gamma0 / std::numbers::sqrt2; }
  double c2() const { return 2.0 * c * std::sqrt(std::log(1.0 / delta)); }
};

struct BoundTerms {
  double decay = 0.0;
  double variance = 0.0;
  double shift = 0.0;
  double total = 0.0;
};

inline void validate(const BoundParams& p) {
  if (!(p.mu > 0.0)) throw ArgumentError("bound: mu must be > 0");
  if (!(p.sigma2 >= 0.0)) throw ArgumentError("bound: sigma2 must be >= 0");
  if (!(p.gamma0 > 0.0)) throw ArgumentError("bound: gamma0 must be > 0");
  if (!(p.epsilon >= 0.0)) throw ArgumentError("bound: epsilon must be >= 0");
  if (p.m < 1) throw ArgumentError("bound: m must be >= 1");
  if (p.T < 1) throw ArgumentError("bound: T must be >= 1");
  if (!(p.delta > 0.0 && p.delta < 1.0)) throw ArgumentError("bound: delta must lie in (0, 1)");
  if (!(p.err0 >= 0.0 && p.err0 <= 1.0)) throw ArgumentError("bound: err0 must lie in [0, 1]");
  if (!(p.c >= 0.0)) throw ArgumentError("bound: c must be >= 0");
}

/// Err_0 exp(-kappa gamma0 T); defined for T = 0 as well.
inline double bound_decay_term(const BoundParams& p) {
  return p.err0 * std::exp(-p.kappa() * p.gamma0 * static_cast<double>(p.T));
}

inline BoundTerms error_bound_terms(const BoundParams& p) {
  validate(p);
  const double m = static_cast<double>(p.m);
  const double T = static_cast<double>(p.T);
  BoundTerms b;
  b.decay = bound_decay_term(p);
  b.variance = p.c1() * p.epsilon / p.gamma0 * std::sqrt(T / m);
  b.shift = p.c2() * std::sqrt(std::log(m * T / p.delta) / m);
  b.total = b.decay + b.variance + b.shift;
  return b;
}

inline double error_bound(const BoundParams& p) { return error_bound_terms(p).total; }

}  // namespace gdo
