#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gdo/errors.hpp"
#include "gdo/matrix.hpp"

namespace gdo {

/// Affine map x -> x * weight + bias, weight stored in x out.
struct DenseLayer {
  DenseMatrix weight;
  std::vector<double> bias;

  std::size_t in_dim() const noexcept { return weight.rows(); }
  std::size_t out_dim() const noexcept { return weight.cols(); }
  std::size_t param_count() const noexcept { return weight.size() + bias.size(); }

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

enum class Activation { relu };

/// Which parameter block an update or gradient refers to.
enum class ParamBlock { theta, phi, both };

/// Multilayer perceptron split into a feature extractor (theta: every hidden
/// layer, each followed by ReLU) and a linear classifier head (phi).
///
/// An empty theta makes the model a plain linear/logistic classifier.
struct MlpModel {
  std::vector<DenseLayer> theta;
  DenseLayer phi;
  Activation activation = Activation::relu;

  std::size_t input_dim() const noexcept {
    return theta.empty() ? phi.in_dim() : theta.front().in_dim();
  }
  std::size_t num_classes() const noexcept { return phi.out_dim(); }

  std::size_t theta_param_count() const noexcept {
    std::size_t n = 0;
    for (const auto& l : theta) n += l.param_count();
    return n;
  }
  std::size_t phi_param_count() const noexcept { return phi.param_count(); }

  friend bool operator==(const MlpModel&, const MlpModel&) = default;
};

/// Throws ShapeError unless layer dimensions chain and biases match.
inline void validate(const MlpModel& model) {
  auto check_layer = [](const DenseLayer& l, const std::string& name) {
    if (l.bias.size() != l.out_dim())
      throw ShapeError(name + ": bias length " + std::to_string(l.bias.size()) +
                       " vs out dim " + std::to_string(l.out_dim()));
  };
  for (std::size_t i = 0; i < model.theta.size(); ++i) {
    check_layer(model.theta[i], "theta layer " + std::to_string(i));
    std::size_t next_in =
        i + 1 < model.theta.size() ? model.theta[i + 1].in_dim() : model.phi.in_dim();
    if (model.theta[i].out_dim() != next_in)
      throw ShapeError("theta layer " + std::to_string(i) + " out dim " +
                       std::to_string(model.theta[i].out_dim()) + " vs next in dim " +
                       std::to_string(next_in));
  }
  check_layer(model.phi, "phi layer");
}

/// Glorot-uniform weights, zero biases. `sizes` = {input, hidden..., classes}.
inline MlpModel init_mlp(std::span<const std::size_t> sizes, std::uint64_t seed) {
  if (sizes.size() < 2) throw ArgumentError("init_mlp needs at least input and output sizes");
  for (std::size_t s : sizes)
    if (s == 0) throw ArgumentError("init_mlp: layer sizes must be positive");
  std::mt19937_64 rng(seed);
  auto make = [&rng](std::size_t in, std::size_t out) {
    double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    DenseLayer layer{DenseMatrix(in, out), std::vector<double>(out, 0.0)};
    for (double& w : layer.weight.data()) w = dist(rng);
    return layer;
  };
  MlpModel model;
  for (std::size_t i = 0; i + 2 < sizes.size(); ++i) model.theta.push_back(make(sizes[i], sizes[i + 1]));
  model.phi = make(sizes[sizes.size() - 2], sizes.back());
  return model;
}

inline MlpModel init_mlp(std::initializer_list<std::size_t> sizes, std::uint64_t seed) {
  std::vector<std::size_t> v(sizes);
  return init_mlp(std::span<const std::size_t>(v), seed);
}

/// Zero-valued model with the same architecture as `like`.
inline MlpModel zeros_like(const MlpModel& like) {
  MlpModel out = like;
  for (auto& l : out.theta) {
    std::fill(l.weight.data().begin(), l.weight.data().end(), 0.0);
    std::fill(l.bias.begin(), l.bias.end(), 0.0);
  }
  std::fill(out.phi.weight.data().begin(), out.phi.weight.data().end(), 0.0);
  std::fill(out.phi.bias.begin(), out.phi.bias.end(), 0.0);
  return out;
}

/// Intermediate values kept by a forward pass for backpropagation.
/// inputs[i] is the input to theta layer i (inputs[theta.size()] feeds phi);
/// pre[i] is theta layer i's pre-activation.
struct ForwardCache {
  std::vector<DenseMatrix> inputs;
  std::vector<DenseMatrix> pre;
  DenseMatrix logits;
};

namespace detail {

inline DenseMatrix affine(const DenseMatrix& x, const DenseLayer& layer) {
  DenseMatrix z = matmul(x, layer.weight);
  add_row_vector(z, layer.bias);
  return z;
}

inline void relu_inplace(DenseMatrix& m) {
  for (double& v : m.data()) v = v > 0.0 ? v : 0.0;
}

inline void check_input(const MlpModel& model, const DenseMatrix& x) {
  if (x.cols() != model.input_dim())
    throw ShapeError("input has " + std::to_string(x.cols()) + " columns but model expects " +
                     std::to_string(model.input_dim()));
}

}  // namespace detail

inline ForwardCache forward_cached(const MlpModel& model, const DenseMatrix& x) {
  detail::check_input(model, x);
  ForwardCache cache;
  cache.inputs.reserve(model.theta.size() + 1);
  cache.pre.reserve(model.theta.size());
  cache.inputs.push_back(x);
  for (const auto& layer : model.theta) {
    DenseMatrix a = detail::affine(cache.inputs.back(), layer);
    DenseMatrix h = a;
    detail::relu_inplace(h);
    cache.pre.push_back(std::move(a));
    cache.inputs.push_back(std::move(h));
  }
  cache.logits = detail::affine(cache.inputs.back(), model.phi);
  return cache;
}

/// Logits C(x) for every row of x.
inline DenseMatrix forward(const MlpModel& model, const DenseMatrix& x) {
  detail::check_input(model, x);
  DenseMatrix h = x;
  for (const auto& layer : model.theta) {
    h = detail::affine(h, layer);
    detail::relu_inplace(h);
  }
  return detail::affine(h, model.phi);
}

/// Gradient of a scalar loss w.r.t. every parameter, shaped like the model.
struct ParamGrads {
  std::vector<DenseLayer> theta;
  DenseLayer phi;
};

inline ParamGrads zero_grads(const MlpModel& model) {
  MlpModel z = zeros_like(model);
  return ParamGrads{std::move(z.theta), std::move(z.phi)};
}

/// Backpropagates d(loss)/d(logits) through the cached forward pass.
inline ParamGrads backprop(const MlpModel& model, const ForwardCache& cache,
                           const DenseMatrix& d_logits) {
  if (d_logits.rows() != cache.logits.rows() || d_logits.cols() != cache.logits.cols())
    throw ShapeError("backprop: upstream gradient " + detail::dims(d_logits) + " vs logits " +
                     detail::dims(cache.logits));
  ParamGrads g;
  g.theta.resize(model.theta.size());
  g.phi.weight = matmul_tn(cache.inputs.back(), d_logits);
  g.phi.bias = column_sums(d_logits);
  if (model.theta.empty()) return g;

  DenseMatrix upstream = matmul_nt(d_logits, model.phi.weight);
  for (std::size_t li = model.theta.size(); li-- > 0;) {
    const DenseMatrix& pre = cache.pre[li];
    for (std::size_t i = 0; i < upstream.size(); ++i)
      if (pre.data()[i] <= 0.0) upstream.data()[i] = 0.0;
    g.theta[li].weight = matmul_tn(cache.inputs[li], upstream);
    g.theta[li].bias = column_sums(upstream);
    if (li > 0) upstream = matmul_nt(upstream, model.theta[li].weight);
  }
  return g;
}

// Flattening order: for each layer, weights row-major then bias.

namespace detail {

inline void append_layer(std::vector<double>& out, const DenseLayer& l) {
  out.insert(out.end(), l.weight.data().begin(), l.weight.data().end());
  out.insert(out.end(), l.bias.begin(), l.bias.end());
}

inline std::size_t read_layer(std::span<const double> src, std::size_t pos, DenseLayer& l) {
  if (pos + l.param_count() > src.size()) throw ShapeError("unflatten: parameter vector too short");
  std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(pos), l.weight.size(), l.weight.data().begin());
  pos += l.weight.size();
  std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(pos), l.bias.size(), l.bias.begin());
  return pos + l.bias.size();
}

}  // namespace detail

inline std::vector<double> flatten_theta(const std::vector<DenseLayer>& theta) {
  std::vector<double> out;
  for (const auto& l : theta) detail::append_layer(out, l);
  return out;
}

inline std::vector<double> flatten_phi(const DenseLayer& phi) {
  std::vector<double> out;
  detail::append_layer(out, phi);
  return out;
}

/// Theta parameters followed by phi parameters.
inline std::vector<double> flatten(const MlpModel& model) {
  std::vector<double> out = flatten_theta(model.theta);
  detail::append_layer(out, model.phi);
  return out;
}

inline std::vector<double> flatten(const ParamGrads& g) {
  std::vector<double> out = flatten_theta(g.theta);
  detail::append_layer(out, g.phi);
  return out;
}

/// Inverse of flatten(): overwrites the parameters of a copy of `like`.
inline MlpModel unflatten(const MlpModel& like, std::span<const double> params) {
  MlpModel out = like;
  std::size_t pos = 0;
  for (auto& l : out.theta) pos = detail::read_layer(params, pos, l);
  pos = detail::read_layer(params, pos, out.phi);
  if (pos != params.size())
    throw ShapeError("unflatten: expected " + std::to_string(pos) + " parameters, got " +
                     std::to_string(params.size()));
  return out;
}

/// Per-row argmax; ties resolve to the lowest class index.
inline std::vector<std::size_t> argmax_rows(const DenseMatrix& logits) {
  std::vector<std::size_t> out(logits.rows(), 0);
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto row = logits.row(r);
    std::size_t best = 0;
    for (std::size_t c = 1; c < row.size(); ++c)
      if (row[c] > row[best]) best = c;
    out[r] = best;
  }
  return out;
}

}  // namespace gdo
