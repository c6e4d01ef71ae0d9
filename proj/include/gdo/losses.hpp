#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "gdo/errors.hpp"
#include "gdo/matrix.hpp"
#include "gdo/mlp.hpp"

namespace gdo {

using Labels = std::vector<std::size_t>;

/// Probabilities below this are clamped inside logarithms.
inline constexpr double kProbFloor = 1e-12;

/// Scalar loss and its gradient w.r.t. the logits it was computed from.
struct LogitLoss {
  double value = 0.0;
  DenseMatrix d_logits;
};

/// Scalar loss and its gradient w.r.t. model parameters.
struct LossBundle {
  double value = 0.0;
  ParamGrads grads;
};

/// Row-wise log-softmax using max subtraction.
inline DenseMatrix log_softmax(const DenseMatrix& logits) {
  DenseMatrix out(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto z = logits.row(r);
    auto o = out.row(r);
    double mx = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - mx);
    double lse = mx + std::log(sum);
    for (std::size_t c = 0; c < z.size(); ++c) o[c] = z[c] - lse;
  }
  return out;
}

inline DenseMatrix softmax(const DenseMatrix& logits) {
  DenseMatrix p = log_softmax(logits);
  for (double& v : p.data()) v = std::exp(v);
  return p;
}

namespace detail {

inline double clamped_log(double log_p) { return std::max(log_p, std::log(kProbFloor)); }

}  // namespace detail

/// Mean cross-entropy of softmax(logits) against hard labels.
inline LogitLoss softmax_ce(const DenseMatrix& logits, const Labels& labels) {
  if (labels.size() != logits.rows())
    throw ShapeError("softmax_ce: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(logits.rows()) + " rows");
  const std::size_t k = logits.cols();
  for (std::size_t y : labels)
    if (y >= k)
      throw ArgumentError("softmax_ce: label " + std::to_string(y) + " outside [0, " +
                          std::to_string(k) + ")");
  LogitLoss out{0.0, DenseMatrix(logits.rows(), k)};
  if (logits.rows() == 0) return out;
  const double inv_n = 1.0 / static_cast<double>(logits.rows());
  DenseMatrix logp = log_softmax(logits);
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    out.value -= detail::clamped_log(logp(r, labels[r]));
    for (std::size_t c = 0; c < k; ++c) out.d_logits(r, c) = std::exp(logp(r, c)) * inv_n;
    out.d_logits(r, labels[r]) -= inv_n;
  }
  out.value *= inv_n;
  return out;
}

/// Mean over rows of max(0, 1 - (top logit - runner-up logit)).
/// At the kink (gap exactly 1) the subgradient is taken as zero.
inline LogitLoss margin_loss(const DenseMatrix& logits) {
  const std::size_t k = logits.cols();
  if (k < 2) throw ArgumentError("margin_loss needs at least 2 classes, got " + std::to_string(k));
  LogitLoss out{0.0, DenseMatrix(logits.rows(), k)};
  if (logits.rows() == 0) return out;
  const double inv_n = 1.0 / static_cast<double>(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto z = logits.row(r);
    std::size_t top = 0;
    for (std::size_t c = 1; c < k; ++c)
      if (z[c] > z[top]) top = c;
    std::size_t second = top == 0 ? 1 : 0;
    for (std::size_t c = 0; c < k; ++c)
      if (c != top && z[c] > z[second]) second = c;
    double slack = 1.0 - (z[top] - z[second]);
    if (slack > 0.0) {
      out.value += slack;
      out.d_logits(r, top) -= inv_n;
      out.d_logits(r, second) += inv_n;
    }
  }
  out.value *= inv_n;
  return out;
}

/// Mean over rows of KL(softmax(new) || softmax(ref)); the reference logits
/// are constants, so only d/d(new) is returned.
inline LogitLoss kl_to_reference(const DenseMatrix& logits_new, const DenseMatrix& logits_ref) {
  if (logits_new.rows() != logits_ref.rows() || logits_new.cols() != logits_ref.cols())
    throw ShapeError("kl_to_reference: " + detail::dims(logits_new) + " vs " +
                     detail::dims(logits_ref));
  const std::size_t k = logits_new.cols();
  LogitLoss out{0.0, DenseMatrix(logits_new.rows(), k)};
  if (logits_new.rows() == 0) return out;
  const double inv_n = 1.0 / static_cast<double>(logits_new.rows());
  DenseMatrix logp = log_softmax(logits_new);
  DenseMatrix logq = log_softmax(logits_ref);
  std::vector<double> ratio(k);
  for (std::size_t r = 0; r < logits_new.rows(); ++r) {
    double row_kl = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      ratio[c] = detail::clamped_log(logp(r, c)) - detail::clamped_log(logq(r, c));
      row_kl += std::exp(logp(r, c)) * ratio[c];
    }
    // KL is nonnegative; clamping can leave tiny negative rounding residue.
    out.value += std::max(row_kl, 0.0);
    for (std::size_t c = 0; c < k; ++c)
      out.d_logits(r, c) = std::exp(logp(r, c)) * (ratio[c] - row_kl) * inv_n;
  }
  out.value *= inv_n;
  return out;
}

/// target += scale * source, layer by layer.
inline void accumulate(ParamGrads& target, const ParamGrads& source, double scale = 1.0) {
  auto add = [scale](DenseLayer& t, const DenseLayer& s) {
    for (std::size_t i = 0; i < t.weight.size(); ++i) t.weight.data()[i] += scale * s.weight.data()[i];
    for (std::size_t i = 0; i < t.bias.size(); ++i) t.bias[i] += scale * s.bias[i];
  };
  for (std::size_t i = 0; i < target.theta.size(); ++i) add(target.theta[i], source.theta[i]);
  add(target.phi, source.phi);
}

/// Adds (decay/2) * sum |W|^2 over every weight matrix to `loss`. Biases are
/// not penalized. decay = 0 leaves the bundle untouched.
inline void add_weight_decay(LossBundle& loss, const MlpModel& model, double decay) {
  if (decay == 0.0) return;
  auto add = [&](DenseLayer& g, const DenseLayer& p) {
    const auto& w = p.weight.data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      loss.value += 0.5 * decay * w[i] * w[i];
      g.weight.data()[i] += decay * w[i];
    }
  };
  for (std::size_t i = 0; i < model.theta.size(); ++i) add(loss.grads.theta[i], model.theta[i]);
  add(loss.grads.phi, model.phi);
}

/// Value and parameter gradient of a logit-level loss evaluated on `x`.
template <typename LogitLossFn>
LossBundle model_loss(const MlpModel& model, const DenseMatrix& x, LogitLossFn&& loss_fn) {
  ForwardCache cache = forward_cached(model, x);
  LogitLoss ll = loss_fn(cache.logits);
  return LossBundle{ll.value, backprop(model, cache, ll.d_logits)};
}

/// Mean over rows of x of the squared Frobenius norm of the logit-input
/// Jacobian d C(x) / dx, with its exact parameter gradient.
///
/// For a ReLU network the Jacobian is
///   J = Wphi^T M_L W_L^T ... M_1 W_1^T
/// with M_l the 0/1 activation masks, which are locally constant in the
/// parameters. Hence d|J|^2/dW_l = 2 S_l^T P_l, where P_l (k x out_l) is the
/// product of every factor to the left of W_l^T and S_l (k x in_l) is J times
/// the transposed product of every factor to its right. Bias gradients vanish
/// almost everywhere. The k rows of each P_l are k simultaneous backward passes.
inline LossBundle input_jacobian_sqnorm(const MlpModel& model, const DenseMatrix& x) {
  validate(model);
  detail::check_input(model, x);
  const std::size_t k = model.num_classes();
  if (k > 32) throw ArgumentError("input_jacobian_sqnorm supports at most 32 classes");
  const std::size_t depth = model.theta.size();

  LossBundle out{0.0, zero_grads(model)};
  if (x.rows() == 0) return out;
  ForwardCache cache = forward_cached(model, x);
  const double inv_n = 1.0 / static_cast<double>(x.rows());

  auto mask_cols = [](DenseMatrix& m, const DenseMatrix& pre, std::size_t row) {
    auto a = pre.row(row);
    for (std::size_t r = 0; r < m.rows(); ++r) {
      auto mr = m.row(r);
      for (std::size_t c = 0; c < mr.size(); ++c)
        if (a[c] <= 0.0) mr[c] = 0.0;
    }
  };

  std::vector<DenseMatrix> left(depth);
  for (std::size_t n = 0; n < x.rows(); ++n) {
    // left[l] = Wphi^T M_L W_L^T ... W_{l+1}^T M_l, shape k x out_l.
    DenseMatrix p = transpose(model.phi.weight);
    for (std::size_t l = depth; l-- > 0;) {
      mask_cols(p, cache.pre[l], n);
      left[l] = p;
      p = matmul_nt(p, model.theta[l].weight);
    }
    const DenseMatrix& jac = p;  // k x d
    double sq = 0.0;
    for (double v : jac.data()) sq += v * v;
    out.value += sq;

    // s = J * (right factors)^T, starting at the input side.
    DenseMatrix s = jac;
    for (std::size_t l = 0; l < depth; ++l) {
      DenseMatrix g = matmul_tn(s, left[l]);
      auto& gw = out.grads.theta[l].weight.data();
      for (std::size_t i = 0; i < gw.size(); ++i) gw[i] += 2.0 * inv_n * g.data()[i];
      s = matmul(s, model.theta[l].weight);
      mask_cols(s, cache.pre[l], n);
    }
    // phi: left factor is the identity.
    auto& gphi = out.grads.phi.weight.data();
    for (std::size_t i = 0; i < s.cols(); ++i)
      for (std::size_t c = 0; c < k; ++c) gphi[i * k + c] += 2.0 * inv_n * s(c, i);
  }
  out.value *= inv_n;
  return out;
}

}  // namespace gdo
