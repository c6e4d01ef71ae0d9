#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "gdo/domains.hpp"
#include "support.hpp"

using namespace gdo;
using namespace testing_support;

namespace {

std::vector<std::vector<double>> sorted_rows(const DenseMatrix& m) {
  std::vector<std::vector<double>> rows;
  for (std::size_t r = 0; r < m.rows(); ++r) rows.emplace_back(m.row(r).begin(), m.row(r).end());
  std::sort(rows.begin(), rows.end());
  return rows;
}

Dataset random_images(std::size_t n, std::size_t side, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Dataset ds{DenseMatrix(n, side * side), Labels(n, 0), 10};
  for (double& v : ds.x.data()) v = u(rng);
  return ds;
}

}  // namespace

TEST(TwoMoons, NoiselessClassZeroOnUpperUnitArc) {
  Dataset ds = make_two_moons(101, 0.0, 3);
  std::size_t zeros = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if ((*ds.y)[i] != 0) continue;
    ++zeros;
    EXPECT_NEAR(std::hypot(ds.x(i, 0), ds.x(i, 1)), 1.0, 1e-12);
    EXPECT_GE(ds.x(i, 1), -1e-12);
  }
  EXPECT_EQ(zeros, 51u);
  EXPECT_EQ(ds.size() - zeros, 50u);
}

TEST(TwoMoons, DeterministicPerSeed) {
  EXPECT_EQ(make_two_moons(200, 0.1, 5).x, make_two_moons(200, 0.1, 5).x);
  EXPECT_NE(make_two_moons(200, 0.1, 5).x, make_two_moons(200, 0.1, 6).x);
  EXPECT_THROW(make_two_moons(1, 0.1, 0), ArgumentError);
  EXPECT_THROW(make_two_moons(10, -1.0, 0), ArgumentError);
}

TEST(TwoMoons, LinearProbeReaches85Percent) {
  // Plain logistic regression by full-batch gradient descent, written here.
  Dataset ds = make_two_moons(2000, 0.1, 0);
  double w0 = 0, w1 = 0, b = 0;
  for (int it = 0; it < 3000; ++it) {
    double g0 = 0, g1 = 0, gb = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      double z = w0 * ds.x(i, 0) + w1 * ds.x(i, 1) + b;
      double p = 1.0 / (1.0 + std::exp(-z));
      double e = p - static_cast<double>((*ds.y)[i]);
      g0 += e * ds.x(i, 0);
      g1 += e * ds.x(i, 1);
      gb += e;
    }
    w0 -= 0.5 * g0 / 2000.0;
    w1 -= 0.5 * g1 / 2000.0;
    b -= 0.5 * gb / 2000.0;
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < ds.size(); ++i)
    correct += ((w0 * ds.x(i, 0) + w1 * ds.x(i, 1) + b > 0) ? 1u : 0u) == (*ds.y)[i];
  EXPECT_GE(correct / 2000.0, 0.85);
}

TEST(Gaussians, BalancedAndDeterministic) {
  Dataset ds = make_gaussians(31, 3, 2.0, 0.1, 1);
  std::vector<std::size_t> count(3, 0);
  for (auto y : *ds.y) ++count[y];
  EXPECT_LE(*std::max_element(count.begin(), count.end()) - *std::min_element(count.begin(), count.end()), 1u);
  EXPECT_EQ(ds.x, make_gaussians(31, 3, 2.0, 0.1, 1).x);
}

TEST(Rotate2d, Identities) {
  Dataset ds = make_two_moons(50, 0.1, 1);
  EXPECT_EQ(rotate2d(ds, 0.0).x, ds.x);
  Dataset full = rotate2d(ds, 360.0);
  for (std::size_t i = 0; i < ds.x.size(); ++i) EXPECT_NEAR(full.x.data()[i], ds.x.data()[i], 1e-9);
  EXPECT_EQ(full.y, ds.y);
}

TEST(Rotate2d, AxisQuarterTurn) {
  Dataset ds{DenseMatrix(1, 2, std::vector<double>{1, 0}), Labels{0}, 2};
  Dataset r = rotate2d(ds, 90.0);
  EXPECT_NEAR(r.x(0, 0), 0.0, 1e-12);
  EXPECT_NEAR(r.x(0, 1), 1.0, 1e-12);
  EXPECT_THROW(rotate2d(Dataset{DenseMatrix(1, 3), Labels{0}, 2}, 10.0), ShapeError);
}

TEST(RotateImage, ZeroAngleIsBitIdentical) {
  Dataset ds = random_images(3, 8, 2);
  EXPECT_EQ(rotate_image(ds, 0.0, 8).x, ds.x);
}

TEST(RotateImage, HalfTurnTwiceRestoresImage) {
  Dataset ds = random_images(4, 28, 3);
  Dataset twice = rotate_image(rotate_image(ds, 180.0, 28), 180.0, 28);
  for (std::size_t i = 0; i < ds.x.size(); ++i) EXPECT_NEAR(twice.x.data()[i], ds.x.data()[i], 2e-2);
}

TEST(RotateImage, ConstantImageInsideInscribedDisk) {
  const std::size_t side = 28;
  Dataset ds{DenseMatrix(1, side * side, 0.5), Labels{0}, 10};
  const double c = (side - 1) / 2.0;
  for (double angle : {13.0, 45.0, 90.0, 217.5}) {
    Dataset r = rotate_image(ds, angle, side);
    for (std::size_t row = 0; row < side; ++row)
      for (std::size_t col = 0; col < side; ++col) {
        // Leave one pixel of slack so bilinear taps stay inside the image.
        if (std::hypot(row - c, col - c) <= c - 1.0) EXPECT_NEAR(r.x(0, row * side + col), 0.5, 1e-9);
      }
  }
}

TEST(RotateImage, RangeAndShapeChecks) {
  Dataset ds = random_images(5, 10, 4);
  Dataset r = rotate_image(ds, 33.0, 10);
  for (double v : r.x.data()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0 + 1e-12);
  }
  EXPECT_EQ(r.y, ds.y);
  EXPECT_THROW(rotate_image(ds, 10.0, 9), ShapeError);
}

TEST(ColorShift, SpecExamples) {
  Dataset ds = random_images(6, 4, 5);
  EXPECT_EQ(color_shift(ds, 0.0).x, ds.x);
  ds.x(0, 0) = 0.0;
  ds.x(0, 1) = 1.0;
  Dataset s = color_shift(ds, 1.0);
  auto [lo, hi] = std::minmax_element(s.x.data().begin(), s.x.data().end());
  EXPECT_EQ(*lo, 1.0);
  EXPECT_EQ(*hi, 2.0);
  double m0 = 0, m1 = 0;
  Dataset t = color_shift(ds, 0.37);
  for (std::size_t i = 0; i < ds.x.size(); ++i) {
    m0 += ds.x.data()[i];
    m1 += t.x.data()[i];
  }
  EXPECT_NEAR(m1 / ds.x.size(), m0 / ds.x.size() + 0.37, 1e-12);
}

TEST(BuildSequence, TwoDomains) {
  Dataset src = make_two_moons(40, 0.1, 1);
  DomainSequence seq = build_sequence(src, Transform{TransformKind::rotate2d}, 30.0, 2);
  ASSERT_EQ(seq.size(), 2u);
  EXPECT_EQ(seq.source().x, src.x);
  EXPECT_EQ(seq.target().x, rotate2d(src, 30.0).x);
  EXPECT_EQ(seq.shift_param, (std::vector<double>{0.0, 30.0}));
  EXPECT_THROW(build_sequence(src, Transform{TransformKind::rotate2d}, 30.0, 1), ArgumentError);
}

TEST(BuildSequence, EvenRotationSpacing) {
  Dataset src = random_images(2, 28, 6);
  DomainSequence seq = build_sequence(src, Transform{TransformKind::rotate_image, 28}, 45.0, 6);
  EXPECT_EQ(seq.shift_param, (std::vector<double>{0, 9, 18, 27, 36, 45}));
  for (std::size_t i = 0; i < seq.size(); ++i) {
    Dataset direct = rotate_image(src, seq.shift_param[i], 28);
    for (std::size_t j = 0; j < src.x.size(); ++j) ASSERT_NEAR(seq.domains[i].x.data()[j], direct.x.data()[j], 1e-9);
    EXPECT_EQ(seq.domains[i].y, src.y);
  }
}

TEST(BuildSequence, ExactForShiftAndRotate2d) {
  std::mt19937_64 rng(7);
  Dataset moons = make_two_moons(30, 0.1, 2);
  Dataset imgs = random_images(3, 4, 8);
  for (int rep = 0; rep < 20; ++rep) {
    std::size_t n = uniform_int(rng, 2, 10);
    DomainSequence a = build_sequence(moons, Transform{TransformKind::rotate2d}, 120.0, n);
    DomainSequence b = build_sequence(imgs, Transform{TransformKind::color_shift}, 1.0, n);
    for (std::size_t i = 1; i < n; ++i) {
      EXPECT_GT(a.shift_param[i], a.shift_param[i - 1]);
      EXPECT_EQ(a.domains[i].x, rotate2d(moons, a.shift_param[i]).x);
      EXPECT_EQ(b.domains[i].x, color_shift(imgs, b.shift_param[i]).x);
    }
    EXPECT_EQ(a.shift_param.back(), 120.0);
  }
}

TEST(BuildSequence, NeedsLabeledSource) {
  Dataset src = features_only(make_two_moons(10, 0.1, 1));
  EXPECT_THROW(build_sequence(src, Transform{TransformKind::rotate2d}, 10.0, 3), ContractError);
}

TEST(Batches, SingleBatchIsPermutation) {
  Dataset ds = make_two_moons(37, 0.1, 1);
  auto b = make_batches(ds, BatchPlan{1, 4});
  ASSERT_EQ(b.size(), 1u);
  EXPECT_EQ(sorted_rows(b[0].x), sorted_rows(ds.x));
}

TEST(Batches, BalancedPartition) {
  for (std::size_t n : {10u, 37u, 100u})
    for (std::size_t m : {1u, 3u, 7u, 10u}) {
      auto idx = batch_indices(n, BatchPlan{m, 9});
      ASSERT_EQ(idx.size(), m);
      std::vector<std::size_t> all;
      std::size_t lo = n, hi = 0;
      for (const auto& b : idx) {
        EXPECT_FALSE(b.empty());
        lo = std::min(lo, b.size());
        hi = std::max(hi, b.size());
        all.insert(all.end(), b.begin(), b.end());
      }
      EXPECT_LE(hi - lo, 1u);
      EXPECT_EQ(hi, (BatchPlan{m, 9}.batch_size(n)));
      std::sort(all.begin(), all.end());
      for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(all[i], i);
    }
}

TEST(Batches, SeedsChangeOrderNotContent) {
  Dataset ds = make_two_moons(50, 0.1, 1);
  auto a = make_batches(ds, BatchPlan{5, 1});
  auto b = make_batches(ds, BatchPlan{5, 2});
  DenseMatrix sa = a[0].x, sb = b[0].x;
  for (std::size_t i = 1; i < 5; ++i) {
    sa = vstack(sa, a[i].x);
    sb = vstack(sb, b[i].x);
  }
  EXPECT_NE(sa, sb);
  EXPECT_EQ(sorted_rows(sa), sorted_rows(sb));
  EXPECT_EQ(make_batches(ds, BatchPlan{5, 1})[2].x, a[2].x);
}

TEST(Batches, TooManyBatches) { EXPECT_THROW(batch_indices(3, BatchPlan{4, 0}), ArgumentError); }
