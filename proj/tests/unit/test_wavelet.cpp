#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "srcnpat/rng.hpp"
#include "srcnpat/wavelet.hpp"

using namespace srcnpat;

namespace {

std::vector<double> white(std::size_t n, std::uint64_t seed, double sd = 1.0) {
  Rng rng(seed);
  std::normal_distribution<double> g(0.0, sd);
  std::vector<double> x(n);
  for (auto& v : x) v = g(rng);
  return x;
}

double energy(const std::vector<double>& x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  return e;
}

double rms(const std::vector<double>& x) { return std::sqrt(energy(x) / static_cast<double>(x.size())); }

double rms_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double e = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) e += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(e / static_cast<double>(a.size()));
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST(Filters, OrthonormalQuadratureMirror) {
  for (const char* id : {"haar", "sym4"}) {
    const auto f = wavelet_filter(id);
    const auto h = f.wavelet();
    double sg = 0.0, sg2 = 0.0, sh = 0.0;
    for (std::size_t l = 0; l < f.length(); ++l) {
      sg += f.scaling[l];
      sg2 += f.scaling[l] * f.scaling[l];
      sh += h[l];
    }
    EXPECT_NEAR(sg, std::numbers::sqrt2, 1e-12) << id;
    EXPECT_NEAR(sg2, 1.0, 1e-12) << id;
    EXPECT_NEAR(sh, 0.0, 1e-12) << id;
  }
  EXPECT_THROW(wavelet_filter("db99"), ValidationError);
}

TEST(Modwt, ConstantSignalHasNoDetail) {
  const auto c = modwt(std::vector<double>(256, 3.7), "sym4", 5);
  for (const auto& w : c.details)
    for (double v : w) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(Modwt, EnergyIdentityAndPerfectReconstructionOverRandomLengths) {
  Rng rng(2718);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t N = 64 + rng() % 961;
    const auto x = white(N, 100 + static_cast<std::uint64_t>(trial));
    const std::size_t J = default_levels(N);
    const auto c = modwt(x, "sym4", J);
    double e = energy(c.approx);
    for (const auto& w : c.details) e += energy(w);
    EXPECT_NEAR(e / energy(x), 1.0, 1e-9) << "N=" << N;
    EXPECT_LT(max_abs_diff(imodwt(c), x), 1e-10) << "N=" << N;
  }
}

TEST(Modwt, RoundTripsOnDyadicAndNonDyadicLengths) {
  for (std::size_t N : {512u, 100u, 500u}) {
    const auto x = white(N, N);
    EXPECT_LT(max_abs_diff(imodwt(modwt(x, "sym4", default_levels(N))), x), 1e-10) << N;
    EXPECT_LT(max_abs_diff(imodwt(modwt(x, "haar", max_modwt_level(N))), x), 1e-10) << N;
  }
}

TEST(Modwt, ZeroCoefficientsGiveZeroSignal) {
  ModwtCoeffs c;
  c.wavelet_id = "sym4";
  c.levels = 3;
  c.details.assign(3, std::vector<double>(100, 0.0));
  c.approx.assign(100, 0.0);
  for (double v : imodwt(c)) EXPECT_EQ(v, 0.0);
  c.details[1].resize(99);
  EXPECT_THROW(imodwt(c), DimensionError);
}

TEST(Modwt, LevelAndLengthErrors) {
  EXPECT_THROW(modwt(white(100, 1), "sym4", 7), ValidationError);
  EXPECT_NO_THROW(modwt(white(100, 1), "sym4", 6));
  EXPECT_THROW(modwt(white(5, 1), "sym4", 1), DimensionError);
  EXPECT_EQ(max_modwt_level(512), 9u);
  EXPECT_EQ(max_modwt_level(500), 8u);
  EXPECT_EQ(default_levels(512), 5u);
}

TEST(Modwt, AlignedDetailsPeakAtTheFeature) {
  std::vector<double> x(256, 0.0);
  for (std::size_t t = 120; t < 256; ++t) x[t] = 1.0;  // step at 120
  const auto a = align_coefficients(modwt(x, "sym4", 3));
  for (std::size_t j = 0; j < 3; ++j) {
    const auto& w = a.details[j];
    // The circular wrap puts a second edge at t = 0; look near the real one.
    std::size_t arg = 60;
    for (std::size_t t = 60; t < 200; ++t)
      if (std::abs(w[t]) > std::abs(w[arg])) arg = t;
    EXPECT_NEAR(static_cast<double>(arg), 120.0, 1.0 + static_cast<double>(1u << j)) << "level " << j + 1;
  }
}

TEST(Threshold, UniversalFormula) {
  ModwtCoeffs c;
  c.wavelet_id = "sym4";
  c.levels = 1;
  c.approx.assign(512, 0.0);
  std::vector<double> w(512);
  for (std::size_t i = 0; i < 512; ++i) w[i] = (i % 2 ? -1.0 : 1.0) * 0.6745 * (0.5 + static_cast<double>(i) / 511.0);
  // median |w| of that ramp is 0.6745 exactly at the midpoint pair average.
  c.details = {w};
  const double sigma = median_abs(w) / 0.6745;
  EXPECT_NEAR(universal_threshold(c), sigma * std::sqrt(2.0 * std::log(512.0)), 1e-12);
  EXPECT_NEAR(sigma, 1.0, 1e-3);
  c.details[0].assign(512, 0.0);
  EXPECT_EQ(universal_threshold(c), 0.0);
  EXPECT_NEAR(std::sqrt(2.0 * std::log(512.0)), 3.5323, 1e-4);
}

TEST(Threshold, ScalesWithTheSignal) {
  const auto x = white(512, 4);
  auto y = x;
  for (auto& v : y) v *= 7.5;
  const double a = universal_threshold(modwt(x, "sym4", 5)), b = universal_threshold(modwt(y, "sym4", 5));
  EXPECT_NEAR(b, 7.5 * a, 1e-12 * b);
}

TEST(Threshold, SoftRule) {
  EXPECT_EQ(soft_threshold(3.0, 1.0), 2.0);
  EXPECT_EQ(soft_threshold(-3.0, 1.0), -2.0);
  EXPECT_EQ(soft_threshold(0.5, 1.0), 0.0);
  EXPECT_EQ(soft_threshold(-1.0, 1.0), 0.0);
}

TEST(Denoise, SmoothSignalPassesThrough) {
  std::vector<double> x(512);
  for (std::size_t t = 0; t < 512; ++t) x[t] = std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / 512.0);
  EXPECT_LT(rms_diff(denoise_signal(x), x), 0.05 * rms(x));
}

TEST(Denoise, WhiteNoiseIsSuppressed) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto n = white(512, 500 + seed);
    EXPECT_LT(rms(denoise_signal(n)), 0.4 * rms(n)) << "seed " << seed;
  }
}

TEST(Denoise, ImprovesSnrOfANoisyTone) {
  std::vector<double> s(512);
  for (std::size_t t = 0; t < 512; ++t) s[t] = std::sin(2.0 * std::numbers::pi * 4.0 * static_cast<double>(t) / 512.0);
  const double sd = rms(s) / std::sqrt(10.0);  // 10 dB
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto x = white(512, 900 + seed, sd);
    for (std::size_t t = 0; t < 512; ++t) x[t] += s[t];
    const double before = 20.0 * std::log10(rms(s) / rms_diff(x, s));
    const double after = 20.0 * std::log10(rms(s) / rms_diff(denoise_signal(x), s));
    EXPECT_GE(after - before, 3.0) << "seed " << seed;
  }
}

TEST(Denoise, ShiftCovariant) {
  const auto x = white(300, 12);
  const std::size_t k = 37;
  std::vector<double> xs(300);
  for (std::size_t t = 0; t < 300; ++t) xs[(t + k) % 300] = x[t];
  const auto a = denoise_signal(x), b = denoise_signal(xs);
  for (std::size_t t = 0; t < 300; ++t) EXPECT_NEAR(b[(t + k) % 300], a[t], 1e-9);
}

TEST(Denoise, ThresholdOverride) {
  const auto x = white(256, 13);
  WaveletDenoiseOptions o;
  o.threshold = 0.0;
  EXPECT_LT(max_abs_diff(denoise_signal(x, o), x), 1e-10);
}

TEST(DenoiseSinogram, ZeroColumnsAndPermutation) {
  EXPECT_EQ(denoise_sinogram(Sinogram(Matrix::Zero(128, 4), 5e-8)).data.cwiseAbs().maxCoeff(), 0.0);
  Matrix m(128, 4);
  for (Eigen::Index d = 0; d < 4; ++d) {
    const auto w = white(128, 20 + static_cast<std::uint64_t>(d));
    for (Eigen::Index t = 0; t < 128; ++t) m(t, d) = w[static_cast<std::size_t>(t)];
  }
  Matrix perm(128, 4);
  const int order[4] = {2, 0, 3, 1};
  for (int d = 0; d < 4; ++d) perm.col(d) = m.col(order[d]);
  const auto a = denoise_sinogram(Sinogram(m, 5e-8)), b = denoise_sinogram(Sinogram(perm, 5e-8));
  for (int d = 0; d < 4; ++d) EXPECT_EQ(b.data.col(d), a.data.col(order[d]));
  EXPECT_THROW(denoise_sinogram(Sinogram(Matrix::Zero(4, 2), 5e-8)), DimensionError);
}
