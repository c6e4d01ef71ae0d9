#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "gdo/errors.hpp"
#include "gdo/losses.hpp"
#include "gdo/matrix.hpp"

namespace gdo {

/// Feature rows with optional oracle labels.
struct Dataset {
  DenseMatrix x;
  std::optional<Labels> y;
  std::size_t num_classes = 0;

  std::size_t size() const noexcept { return x.rows(); }
  std::size_t dim() const noexcept { return x.cols(); }
  bool labeled() const noexcept { return y.has_value(); }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

inline void validate(const Dataset& ds) {
  if (ds.x.rows() == 0) throw ArgumentError("dataset must contain at least one row");
  if (!ds.y) return;
  if (ds.y->size() != ds.x.rows())
    throw ShapeError("dataset has " + std::to_string(ds.x.rows()) + " rows but " +
                     std::to_string(ds.y->size()) + " labels");
  for (std::size_t l : *ds.y)
    if (l >= ds.num_classes)
      throw ArgumentError("label " + std::to_string(l) + " outside [0, " +
                          std::to_string(ds.num_classes) + ")");
}

/// Rows (and labels) of `ds` at `indices`.
inline Dataset subset(const Dataset& ds, std::span<const std::size_t> indices) {
  Dataset out{gather_rows(ds.x, indices), std::nullopt, ds.num_classes};
  if (ds.y) {
    Labels y(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) y[i] = (*ds.y)[indices[i]];
    out.y = std::move(y);
  }
  return out;
}

/// Same rows with the labels removed.
inline Dataset features_only(const Dataset& ds) { return Dataset{ds.x, std::nullopt, ds.num_classes}; }

/// Ordered domains; index 0 is the labeled source, the last is the target.
struct DomainSequence {
  std::vector<Dataset> domains;
  std::vector<double> shift_param;

  std::size_t size() const noexcept { return domains.size(); }
  const Dataset& source() const { return domains.front(); }
  const Dataset& target() const { return domains.back(); }
};

enum class TransformKind { rotate2d, rotate_image, color_shift };

struct Transform {
  TransformKind kind = TransformKind::rotate2d;
  std::size_t side = 0;  // image side length, rotate_image only
};

// ---------------------------------------------------------------- generators

/// Two interleaving half circles. Class 0 (ceil(n/2) points) lies on the upper
/// unit arc centered at the origin; class 1 on the lower arc centered at (1, 0.5).
inline Dataset make_two_moons(std::size_t n, double noise_sd, std::uint64_t seed) {
  if (n < 2) throw ArgumentError("make_two_moons needs n >= 2, got " + std::to_string(n));
  if (!(noise_sd >= 0.0)) throw ArgumentError("make_two_moons: noise_sd must be >= 0");
  const std::size_t n0 = (n + 1) / 2;
  const std::size_t n1 = n / 2;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  Dataset ds{DenseMatrix(n, 2), Labels(n), 2};
  auto arc = [](std::size_t i, std::size_t count) {
    return count == 1 ? 0.0 : std::numbers::pi * static_cast<double>(i) / static_cast<double>(count - 1);
  };
  for (std::size_t i = 0; i < n0; ++i) {
    double t = arc(i, n0);
    ds.x(i, 0) = std::cos(t);
    ds.x(i, 1) = std::sin(t);
    (*ds.y)[i] = 0;
  }
  for (std::size_t i = 0; i < n1; ++i) {
    double t = arc(i, n1);
    ds.x(n0 + i, 0) = 1.0 - std::cos(t);
    ds.x(n0 + i, 1) = 0.5 - std::sin(t);
    (*ds.y)[n0 + i] = 1;
  }
  if (noise_sd > 0.0)
    for (double& v : ds.x.data()) v += noise_sd * noise(rng);
  return ds;
}

/// Isotropic Gaussian blobs; class c is centered at radius `separation` and
/// angle 2*pi*c/k. Class sizes differ by at most one.
inline Dataset make_gaussians(std::size_t n, std::size_t num_classes, double separation, double sd,
                              std::uint64_t seed) {
  if (num_classes < 2) throw ArgumentError("make_gaussians needs at least 2 classes");
  if (n < num_classes) throw ArgumentError("make_gaussians needs n >= num_classes");
  if (!(sd >= 0.0)) throw ArgumentError("make_gaussians: sd must be >= 0");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  Dataset ds{DenseMatrix(n, 2), Labels(n), num_classes};
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t c = i % num_classes;
    double a = 2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(num_classes);
    ds.x(i, 0) = separation * std::cos(a) + sd * noise(rng);
    ds.x(i, 1) = separation * std::sin(a) + sd * noise(rng);
    (*ds.y)[i] = c;
  }
  return ds;
}

// ----------------------------------------------------------- transformations

inline Dataset rotate2d(const Dataset& ds, double angle_deg) {
  if (ds.dim() != 2) throw ShapeError("rotate2d needs 2 features, got " + std::to_string(ds.dim()));
  Dataset out = ds;
  if (angle_deg == 0.0) return out;
  const double a = angle_deg * std::numbers::pi / 180.0;
  const double c = std::cos(a), s = std::sin(a);
  for (std::size_t r = 0; r < ds.size(); ++r) {
    double px = ds.x(r, 0), py = ds.x(r, 1);
    out.x(r, 0) = c * px - s * py;
    out.x(r, 1) = s * px + c * py;
  }
  return out;
}

/// Rotates every row, read as a side x side row-major image, about the image
/// center. Bilinear resampling; samples outside the image read as 0.
inline Dataset rotate_image(const Dataset& ds, double angle_deg, std::size_t side) {
  if (side == 0 || ds.dim() != side * side)
    throw ShapeError("rotate_image: " + std::to_string(ds.dim()) + " features is not " +
                     std::to_string(side) + "^2");
  Dataset out = ds;
  if (angle_deg == 0.0) return out;
  const double a = angle_deg * std::numbers::pi / 180.0;
  const double c = std::cos(a), s = std::sin(a);
  const double center = (static_cast<double>(side) - 1.0) / 2.0;
  const auto iside = static_cast<std::ptrdiff_t>(side);

  // Source coordinates depend only on the output pixel, so precompute them.
  struct Tap {
    std::ptrdiff_t r0, c0;
    double fr, fc;
  };
  std::vector<Tap> taps(side * side);
  for (std::size_t r = 0; r < side; ++r) {
    for (std::size_t col = 0; col < side; ++col) {
      // Inverse map: x = column, y = row.
      double dx = static_cast<double>(col) - center;
      double dy = static_cast<double>(r) - center;
      double sx = c * dx + s * dy + center;
      double sy = -s * dx + c * dy + center;
      double fx = std::floor(sx), fy = std::floor(sy);
      taps[r * side + col] = Tap{static_cast<std::ptrdiff_t>(fy), static_cast<std::ptrdiff_t>(fx),
                                 sy - fy, sx - fx};
    }
  }
  for (std::size_t n = 0; n < ds.size(); ++n) {
    auto src = ds.x.row(n);
    auto dst = out.x.row(n);
    auto pix = [&](std::ptrdiff_t r, std::ptrdiff_t col) {
      if (r < 0 || col < 0 || r >= iside || col >= iside) return 0.0;
      return src[static_cast<std::size_t>(r * iside + col)];
    };
    for (std::size_t i = 0; i < taps.size(); ++i) {
      const Tap& t = taps[i];
      double top = (1.0 - t.fc) * pix(t.r0, t.c0) + t.fc * pix(t.r0, t.c0 + 1);
      double bottom = (1.0 - t.fc) * pix(t.r0 + 1, t.c0) + t.fc * pix(t.r0 + 1, t.c0 + 1);
      dst[i] = (1.0 - t.fr) * top + t.fr * bottom;
    }
  }
  return out;
}

/// Adds a constant offset to every feature (source pixels in [0,1] map to
/// [offset, 1+offset]).
inline Dataset color_shift(const Dataset& ds, double offset) {
  Dataset out = ds;
  if (offset == 0.0) return out;
  for (double& v : out.x.data()) v += offset;
  return out;
}

inline Dataset apply_transform(const Dataset& ds, const Transform& t, double param) {
  switch (t.kind) {
    case TransformKind::rotate2d:
      return rotate2d(ds, param);
    case TransformKind::rotate_image:
      return rotate_image(ds, param, t.side);
    case TransformKind::color_shift:
      return color_shift(ds, param);
  }
  throw ArgumentError("unknown transform");
}

/// Evenly spaced domains: domain i is the source transformed by
/// total_shift * i / (n_given - 1). Each domain is generated directly from the
/// source, never by chaining transforms.
inline DomainSequence build_sequence(const Dataset& source, const Transform& transform,
                                     double total_shift, std::size_t n_given) {
  if (n_given < 2) throw ArgumentError("build_sequence needs n_given >= 2, got " + std::to_string(n_given));
  validate(source);
  if (!source.labeled()) throw ContractError("build_sequence: source domain must be labeled");
  DomainSequence seq;
  for (std::size_t i = 0; i < n_given; ++i) {
    double param = total_shift * static_cast<double>(i) / static_cast<double>(n_given - 1);
    seq.shift_param.push_back(param);
    seq.domains.push_back(i == 0 ? source : apply_transform(source, transform, param));
  }
  return seq;
}

// ------------------------------------------------------------------ batching

/// m batches per domain over a seeded shuffle.
struct BatchPlan {
  std::size_t m = 1;
  std::uint64_t seed = 0;

  /// Size of the largest batch for a domain of n rows.
  std::size_t batch_size(std::size_t n) const { return m == 0 ? 0 : (n + m - 1) / m; }
};

/// Seeded shuffle of [0, n) split into m contiguous batches whose sizes
/// differ by at most one (larger batches first).
inline std::vector<std::vector<std::size_t>> batch_indices(std::size_t n, const BatchPlan& plan) {
  if (plan.m == 0) throw ArgumentError("batch plan needs m >= 1");
  if (plan.m > n)
    throw ArgumentError("batch plan asks for " + std::to_string(plan.m) + " batches of " +
                        std::to_string(n) + " rows");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(plan.seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> out(plan.m);
  const std::size_t base = n / plan.m, extra = n % plan.m;
  std::size_t pos = 0;
  for (std::size_t b = 0; b < plan.m; ++b) {
    std::size_t len = base + (b < extra ? 1 : 0);
    out[b].assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                  order.begin() + static_cast<std::ptrdiff_t>(pos + len));
    pos += len;
  }
  return out;
}

inline std::vector<Dataset> make_batches(const Dataset& ds, const BatchPlan& plan) {
  std::vector<Dataset> out;
  for (const auto& idx : batch_indices(ds.size(), plan)) out.push_back(subset(ds, idx));
  return out;
}

}  // namespace gdo
