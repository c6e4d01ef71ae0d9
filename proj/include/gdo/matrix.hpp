#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "gdo/errors.hpp"

namespace gdo {

/// Row-major dense matrix of doubles. Carries features, logits and gradients.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw ShapeError("matrix data length " + std::to_string(data_.size()) +
                       " does not equal " + std::to_string(rows_) + "x" +
                       std::to_string(cols_));
    }
  }

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<double>& data() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

namespace detail {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using MutMap = Eigen::Map<RowMajor>;

inline ConstMap view(const DenseMatrix& m) { return ConstMap(m.data().data(), m.rows(), m.cols()); }
inline MutMap view(DenseMatrix& m) { return MutMap(m.data().data(), m.rows(), m.cols()); }

inline std::string dims(const DenseMatrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace detail

/// A * B
inline DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows())
    throw ShapeError("matmul: " + detail::dims(a) + " * " + detail::dims(b));
  DenseMatrix out(a.rows(), b.cols());
  if (!out.empty() && a.cols() > 0) detail::view(out).noalias() = detail::view(a) * detail::view(b);
  return out;
}

/// A^T * B
inline DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows())
    throw ShapeError("matmul_tn: " + detail::dims(a) + "^T * " + detail::dims(b));
  DenseMatrix out(a.cols(), b.cols());
  if (!out.empty() && a.rows() > 0)
    detail::view(out).noalias() = detail::view(a).transpose() * detail::view(b);
  return out;
}

/// A * B^T
inline DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.cols())
    throw ShapeError("matmul_nt: " + detail::dims(a) + " * " + detail::dims(b) + "^T");
  DenseMatrix out(a.rows(), b.rows());
  if (!out.empty() && a.cols() > 0)
    detail::view(out).noalias() = detail::view(a) * detail::view(b).transpose();
  return out;
}

inline DenseMatrix transpose(const DenseMatrix& a) {
  DenseMatrix out(a.cols(), a.rows());
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) out(c, r) = a(r, c);
  return out;
}

/// Adds `bias` to every row in place.
inline void add_row_vector(DenseMatrix& m, std::span<const double> bias) {
  if (bias.size() != m.cols())
    throw ShapeError("bias length " + std::to_string(bias.size()) + " vs matrix cols " +
                     std::to_string(m.cols()));
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += bias[c];
  }
}

inline std::vector<double> column_sums(const DenseMatrix& m) {
  std::vector<double> out(m.cols(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) out[c] += row[c];
  }
  return out;
}

inline void scale_inplace(DenseMatrix& m, double s) {
  for (double& v : m.data()) v *= s;
}

/// Rows of `m` selected by `indices`, in that order.
inline DenseMatrix gather_rows(const DenseMatrix& m, std::span<const std::size_t> indices) {
  DenseMatrix out(indices.size(), m.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= m.rows()) throw ShapeError("row index out of range");
    auto src = m.row(indices[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

/// Stacks `a` on top of `b`.
inline DenseMatrix vstack(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.cols())
    throw ShapeError("vstack: " + detail::dims(a) + " over " + detail::dims(b));
  std::vector<double> data;
  data.reserve(a.size() + b.size());
  data.insert(data.end(), a.data().begin(), a.data().end());
  data.insert(data.end(), b.data().begin(), b.data().end());
  return DenseMatrix(a.rows() + b.rows(), a.cols(), std::move(data));
}

}  // namespace gdo
