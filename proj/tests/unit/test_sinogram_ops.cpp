#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <set>

#include "srcnpat/sinogram_ops.hpp"

using namespace srcnpat;

namespace {

Sinogram random_sinogram(std::size_t T, std::size_t D, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(T, D);
  for (Eigen::Index t = 0; t < m.rows(); ++t)
    for (Eigen::Index d = 0; d < m.cols(); ++d) m(t, d) = n(rng);
  return Sinogram(m, 5e-8);
}

// Signal with unit mean power exactly.
Sinogram unit_power(std::size_t T, std::size_t D) {
  Matrix m(T, D);
  for (Eigen::Index t = 0; t < m.rows(); ++t)
    for (Eigen::Index d = 0; d < m.cols(); ++d) m(t, d) = ((t + d) % 2) ? 1.0 : -1.0;
  return Sinogram(m, 5e-8);
}

}  // namespace

TEST(Noise, StandardDeviationFollowsTheSnr) {
  const auto clean = unit_power(512, 100);
  const auto noisy = add_gaussian_noise(clean, 20.0, 7);
  const Matrix e = noisy.data - clean.data;
  const double std_dev = std::sqrt(mean_power(e));
  EXPECT_NEAR(std_dev, 0.1, 0.1 * 0.01);
}

TEST(Noise, MeasuredSnrWithinATenthOfADecibel) {
  const auto clean = random_sinogram(512, 100, 3);
  for (double snr : {20.0, 40.0, 60.0}) {
    const auto noisy = add_gaussian_noise(clean, snr, 11);
    const double measured = 10.0 * std::log10(mean_power(clean.data) / mean_power(noisy.data - clean.data));
    EXPECT_NEAR(measured, snr, 0.1) << snr << " dB";
  }
}

TEST(Noise, ZeroSinogramIsRejected) {
  EXPECT_THROW(add_gaussian_noise(Sinogram(Matrix::Zero(512, 100), 5e-8), 20.0, 1), ValidationError);
}

TEST(Noise, DeterministicAndZeroMean) {
  const auto clean = unit_power(512, 100);
  const auto a = add_gaussian_noise(clean, 20.0, 5), b = add_gaussian_noise(clean, 20.0, 5);
  EXPECT_EQ(a.data, b.data);
  EXPECT_NE(add_gaussian_noise(clean, 20.0, 6).data, a.data);
  const Matrix e = a.data - clean.data;
  EXPECT_LT(std::abs(e.mean()), 3.0 * 0.1 / std::sqrt(512.0 * 100.0));
}

TEST(Subsample, KeepsEveryFactorthColumn) {
  const auto s = random_sinogram(512, 100, 1);
  const auto h = subsample_detectors(s, 2);
  ASSERT_EQ(h.detectors(), 50u);
  for (Eigen::Index i = 0; i < 50; ++i) EXPECT_EQ(h.data.col(i), s.data.col(2 * i));
  EXPECT_EQ(subsample_detectors(s, 1).data, s.data);
  EXPECT_THROW(subsample_detectors(s, 3), DimensionError);
}

TEST(NnInterpolate, DoublingDuplicatesColumns) {
  const auto s = random_sinogram(512, 50, 2);
  const auto u = nn_interpolate(s, 100);
  ASSERT_EQ(u.detectors(), 100u);
  for (Eigen::Index i = 0; i < 50; ++i) {
    EXPECT_EQ(u.data.col(2 * i), s.data.col(i));
    EXPECT_EQ(u.data.col(2 * i + 1), s.data.col(i));
  }
}

TEST(NnInterpolate, SingleInputColumnFillsEverything) {
  const auto s = random_sinogram(64, 1, 3);
  const auto u = nn_interpolate(s, 7);
  for (Eigen::Index j = 0; j < 7; ++j) EXPECT_EQ(u.data.col(j), s.data.col(0));
}

TEST(NnInterpolate, PiecewiseConstantInAngleRoundTrips) {
  // Constant over detector pairs (2i, 2i+1): exactly what NN upsampling restores.
  const auto half = random_sinogram(128, 50, 4);
  Matrix full(128, 100);
  for (Eigen::Index i = 0; i < 50; ++i) full.col(2 * i) = full.col(2 * i + 1) = half.data.col(i);
  const Sinogram s(full, 5e-8);
  EXPECT_EQ(nn_interpolate(subsample_detectors(s, 2), 100).data, s.data);
}

TEST(NnInterpolate, SubsampleAfterInterpolateIsIdentity) {
  const auto s = random_sinogram(512, 50, 5);
  const auto back = subsample_detectors(nn_interpolate(s, 100), 2);
  EXPECT_EQ(std::memcmp(back.data.data(), s.data.data(), sizeof(double) * static_cast<std::size_t>(s.data.size())), 0);
}

TEST(NnInterpolate, MatchesAngularNearestNeighbourOracle) {
  // Brute-force search over angles, wrap-around included.
  for (auto [din, dout] : {std::pair<std::size_t, std::size_t>{50, 100}, {30, 100}, {7, 20}, {33, 64}}) {
    for (std::size_t j = 0; j < dout; ++j) {
      const double a = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(dout);
      double best = 1e9;
      std::size_t pick = 0;
      for (std::size_t i = 0; i < din; ++i) {
        const double b = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(din);
        double d = std::abs(a - b);
        d = std::min(d, 2.0 * std::numbers::pi - d);
        if (d < best - 1e-12) {
          best = d;
          pick = i;
        }
      }
      const std::size_t got = nearest_input_column(j, din, dout);
      const double b = 2.0 * std::numbers::pi * static_cast<double>(got) / static_cast<double>(din);
      double dg = std::abs(a - b);
      dg = std::min(dg, 2.0 * std::numbers::pi - dg);
      EXPECT_NEAR(dg, best, 1e-12) << din << "->" << dout << " column " << j;
      if (std::abs(dg - best) > 1e-12) {
        EXPECT_EQ(got, pick);
      }
    }
  }
  EXPECT_THROW(nn_interpolate(random_sinogram(16, 50, 1), 40), DimensionError);
}

TEST(Residual, DefinitionAndIdentities) {
  const auto a = random_sinogram(512, 100, 6), b = random_sinogram(512, 100, 7);
  EXPECT_EQ(compute_residual(a, a).data.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(compute_residual(a, Sinogram(Matrix::Zero(512, 100), 5e-8)).data, a.data);
  const auto r = compute_residual(a, b);
  Rng rng(9);
  for (int k = 0; k < 5; ++k) {
    const auto t = static_cast<Eigen::Index>(rng() % 512), d = static_cast<Eigen::Index>(rng() % 100);
    EXPECT_EQ(r.data(t, d), a.data(t, d) - b.data(t, d));
  }
  EXPECT_THROW(compute_residual(a, random_sinogram(512, 50, 1)), DimensionError);
}

TEST(Restoration, DefinitionAndIdentities) {
  const auto t_in = random_sinogram(512, 100, 8), s_f = random_sinogram(512, 100, 9);
  EXPECT_EQ(apply_restoration(t_in, Sinogram(Matrix::Zero(512, 100), 5e-8)).data, t_in.data);
  EXPECT_EQ(apply_restoration(t_in, t_in).data.cwiseAbs().maxCoeff(), 0.0);
  const auto r = compute_residual(t_in, s_f);
  EXPECT_LT((apply_restoration(t_in, r).data - s_f.data).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_THROW(apply_restoration(t_in, random_sinogram(256, 100, 1)), DimensionError);
}

TEST(Patches, FiftyInBoundsPairs) {
  const auto s_in = random_sinogram(512, 100, 10), s_f = random_sinogram(512, 100, 11);
  const auto s_r = compute_residual(s_in, s_f);
  const auto p = extract_patches(s_in, s_r, 50, 32, 42, "demo");
  ASSERT_EQ(p.size(), 50u);
  std::set<std::pair<std::size_t, std::size_t>> distinct;
  for (const auto& q : p) {
    EXPECT_LE(q.row_offset, 480u);
    EXPECT_LE(q.col_offset, 68u);
    EXPECT_EQ(q.input_patch.rows(), 32);
    EXPECT_EQ(q.source_id, "demo");
    const auto f = s_f.data.block(static_cast<Eigen::Index>(q.row_offset), static_cast<Eigen::Index>(q.col_offset), 32, 32);
    EXPECT_LT((q.target_patch - (q.input_patch - f)).cwiseAbs().maxCoeff(), 1e-15);
    distinct.insert({q.row_offset, q.col_offset});
  }
  EXPECT_GT(distinct.size(), 40u);
}

TEST(Patches, SeededAndBounded) {
  const auto a = patch_offsets(512, 100, 50, 32, 3), b = patch_offsets(512, 100, 50, 32, 3);
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a[k].row, b[k].row);
    EXPECT_EQ(a[k].col, b[k].col);
  }
  EXPECT_THROW(patch_offsets(512, 100, 5, 101, 1), DimensionError);
  const auto s = random_sinogram(512, 100, 1);
  EXPECT_THROW(extract_patches(s, random_sinogram(512, 50, 2), 5, 32, 1), DimensionError);
}
