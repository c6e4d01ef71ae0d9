#pragma once

#include <cmath>
#include <cstddef>
#include <string>

#include "gdo/errors.hpp"
#include "gdo/losses.hpp"
#include "gdo/mlp.hpp"

namespace gdo {

/// Step size gamma0 / (1 + epsilon * t).
struct LrSchedule {
  double gamma0 = 0.05;
  double epsilon = 0.01;

  friend bool operator==(const LrSchedule&, const LrSchedule&) = default;
};

inline double schedule_rate(const LrSchedule& s, std::size_t t) {
  return s.gamma0 / (1.0 + s.epsilon * static_cast<double>(t));
}

namespace detail {

inline void check_finite(const DenseLayer& g, const std::string& where) {
  if (!g.weight.all_finite()) throw NumericError("non-finite gradient in " + where + " weights");
  for (double v : g.bias)
    if (!std::isfinite(v)) throw NumericError("non-finite gradient in " + where + " bias");
}

inline void descend(DenseLayer& p, const DenseLayer& g, double rate) {
  if (p.weight.size() != g.weight.size() || p.bias.size() != g.bias.size())
    throw ShapeError("sgd_step: gradient shape does not match parameter shape");
  auto& w = p.weight.data();
  for (std::size_t i = 0; i < w.size(); ++i) w[i] -= rate * g.weight.data()[i];
  for (std::size_t i = 0; i < p.bias.size(); ++i) p.bias[i] -= rate * g.bias[i];
}

}  // namespace detail

/// p <- p - rate * grad on the selected block; the other block is copied
/// through untouched.
inline MlpModel sgd_step(const MlpModel& model, const ParamGrads& grads, double rate,
                         ParamBlock which) {
  if (!(rate >= 0.0) || !std::isfinite(rate))
    throw ArgumentError("sgd_step: rate must be finite and >= 0, got " + std::to_string(rate));
  if (grads.theta.size() != model.theta.size())
    throw ShapeError("sgd_step: gradient has " + std::to_string(grads.theta.size()) +
                     " theta layers, model has " + std::to_string(model.theta.size()));
  const bool do_theta = which != ParamBlock::phi;
  const bool do_phi = which != ParamBlock::theta;
  if (do_theta)
    for (std::size_t i = 0; i < grads.theta.size(); ++i)
      detail::check_finite(grads.theta[i], "layer " + std::to_string(i));
  if (do_phi) detail::check_finite(grads.phi, "layer " + std::to_string(model.theta.size()));

  MlpModel out = model;
  if (rate == 0.0) return out;
  if (do_theta)
    for (std::size_t i = 0; i < out.theta.size(); ++i) detail::descend(out.theta[i], grads.theta[i], rate);
  if (do_phi) detail::descend(out.phi, grads.phi, rate);
  return out;
}

inline MlpModel sgd_step(const MlpModel& model, const LossBundle& loss, double rate,
                         ParamBlock which) {
  if (!std::isfinite(loss.value)) throw NumericError("sgd_step: non-finite loss value");
  return sgd_step(model, loss.grads, rate, which);
}

}  // namespace gdo
