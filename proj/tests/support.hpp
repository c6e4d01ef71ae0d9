#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "gdo/losses.hpp"
#include "gdo/matrix.hpp"
#include "gdo/mlp.hpp"

namespace testing_support {

using gdo::DenseMatrix;
using gdo::MlpModel;

inline DenseMatrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  DenseMatrix m(r, c);
  for (double& v : m.data()) v = nd(rng);
  return m;
}

inline std::size_t uniform_int(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

/// Random model with random (non-zero) biases.
inline MlpModel random_model(std::vector<std::size_t> sizes, std::mt19937_64& rng) {
  MlpModel m = gdo::init_mlp(sizes, rng());
  std::normal_distribution<double> nd(0.0, 0.3);
  for (auto& l : m.theta)
    for (double& b : l.bias) b = nd(rng);
  for (double& b : m.phi.bias) b = nd(rng);
  return m;
}

/// Smallest |pre-activation| over all hidden units; ReLU kinks lie at 0.
inline double kink_distance(const MlpModel& m, const DenseMatrix& x) {
  auto cache = gdo::forward_cached(m, x);
  double d = INFINITY;
  for (const auto& p : cache.pre)
    for (double v : p.data()) d = std::min(d, std::abs(v));
  return d;
}

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

/// Central differences of f at v, step h.
inline std::vector<double> fd_gradient(const std::function<double(const std::vector<double>&)>& f,
                                       std::vector<double> v, double h = 1e-5) {
  std::vector<double> g(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double orig = v[i];
    v[i] = orig + h;
    const double up = f(v);
    v[i] = orig - h;
    const double down = f(v);
    v[i] = orig;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

inline double max_rel_err(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, rel_err(a[i], b[i]));
  return worst;
}

/// Max relative error between a loss's parameter gradient and central
/// differences over every parameter of the model.
template <typename LossFn>
double param_gradient_error(const MlpModel& model, LossFn&& loss) {
  gdo::LossBundle b = loss(model);
  auto f = [&](const std::vector<double>& p) { return loss(gdo::unflatten(model, p)).value; };
  return max_rel_err(gdo::flatten(b.grads), fd_gradient(f, gdo::flatten(model)));
}

}  // namespace testing_support
