#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "srcnpat/core.hpp"

namespace srcnpat {

inline constexpr double kInvSqrt2 = 1.0 / std::numbers::sqrt2;

// Orthonormal wavelet, described by its scaling (low-pass) filter g. The
// wavelet filter is the quadrature mirror h_l = (-1)^l g_{L-1-l}.
struct WaveletFilter {
  std::string id;
  std::vector<double> scaling;
  // Phase advance of the scaling filter used for zero-phase alignment.
  int scaling_shift = 0;

  std::size_t length() const { return scaling.size(); }
  std::vector<double> wavelet() const {
    const std::size_t L = scaling.size();
    std::vector<double> h(L);
    for (std::size_t l = 0; l < L; ++l) h[l] = ((l % 2) ? -1.0 : 1.0) * scaling[L - 1 - l];
    return h;
  }
};

inline WaveletFilter wavelet_filter(const std::string& id) {
  if (id == "haar") return {"haar", {kInvSqrt2, kInvSqrt2}, 0};
  if (id == "sym4" || id == "la8") {
    // Least-asymmetric Daubechies, 8 taps.
    return {"sym4",
            {-0.075765714789502213, -0.029635527646002492, 0.49761866763277499, 0.80373875180513208,
             0.29785779560530605, -0.099219543576633533, -0.012603967262031304, 0.032223100604051468},
            -3};
  }
  throw ValidationError("unknown wavelet '" + id + "' (expected haar, sym4)");
}

struct ModwtCoeffs {
  std::vector<std::vector<double>> details;  // W_1 .. W_J
  std::vector<double> approx;                // V_J
  std::string wavelet_id;
  std::size_t levels = 0;

  std::size_t size() const { return approx.size(); }
};

inline std::size_t max_modwt_level(std::size_t n) {
  std::size_t j = 0;
  while ((std::size_t{2} << j) <= n) ++j;
  return j;  // floor(log2 n)
}

// Non-decimated transform by the pyramid algorithm: level j filters the
// previous approximation circularly with taps spaced 2^(j-1) apart and
// rescaled by 1/sqrt(2). Works for any length N >= filter length.
inline ModwtCoeffs modwt(const std::vector<double>& x, const std::string& wavelet_id, std::size_t levels) {
  const auto f = wavelet_filter(wavelet_id);
  const std::size_t N = x.size(), L = f.length();
  if (N < L) throw DimensionError("modwt: signal length " + std::to_string(N) + " shorter than filter length");
  if (levels < 1 || levels > max_modwt_level(N))
    throw ValidationError("modwt: level " + std::to_string(levels) + " outside [1, floor(log2 N)]");
  std::vector<double> g(L), h = f.wavelet();
  for (std::size_t l = 0; l < L; ++l) {
    g[l] = f.scaling[l] * kInvSqrt2;
    h[l] *= kInvSqrt2;
  }
  ModwtCoeffs c;
  c.wavelet_id = f.id;
  c.levels = levels;
  std::vector<double> v = x;
  for (std::size_t j = 1; j <= levels; ++j) {
    const std::size_t stride = (std::size_t{1} << (j - 1)) % N;
    std::vector<double> w(N, 0.0), vn(N, 0.0);
    for (std::size_t t = 0; t < N; ++t) {
      std::size_t k = t;
      double sw = 0.0, sv = 0.0;
      for (std::size_t l = 0; l < L; ++l) {
        sw += h[l] * v[k];
        sv += g[l] * v[k];
        k = (k + N - stride) % N;
      }
      w[t] = sw;
      vn[t] = sv;
    }
    c.details.push_back(std::move(w));
    v = std::move(vn);
  }
  c.approx = std::move(v);
  return c;
}

inline std::vector<double> imodwt(const ModwtCoeffs& c) {
  const auto f = wavelet_filter(c.wavelet_id);
  const std::size_t N = c.approx.size(), L = f.length();
  if (c.details.size() != c.levels || c.levels == 0) throw DimensionError("imodwt: level count mismatch");
  for (const auto& w : c.details)
    if (w.size() != N) throw DimensionError("imodwt: coefficient vectors have inconsistent lengths");
  std::vector<double> g(L), h = f.wavelet();
  for (std::size_t l = 0; l < L; ++l) {
    g[l] = f.scaling[l] * kInvSqrt2;
    h[l] *= kInvSqrt2;
  }
  std::vector<double> v = c.approx;
  for (std::size_t j = c.levels; j >= 1; --j) {
    const std::size_t stride = (std::size_t{1} << (j - 1)) % N;
    const auto& w = c.details[j - 1];
    std::vector<double> prev(N, 0.0);
    for (std::size_t t = 0; t < N; ++t) {
      std::size_t k = t;
      double s = 0.0;
      for (std::size_t l = 0; l < L; ++l) {
        s += h[l] * w[k] + g[l] * v[k];
        k = (k + stride) % N;
      }
      prev[t] = s;
    }
    v = std::move(prev);
  }
  return v;
}

// Circularly shifts each level so coefficients line up in time with the
// signal features that produced them (the zero-phase view of the transform).
// Advances: scaling (2^j - 1) nu, wavelet -(2^(j-1) (L - 1) + nu).
inline ModwtCoeffs align_coefficients(const ModwtCoeffs& c) {
  const auto f = wavelet_filter(c.wavelet_id);
  const long N = static_cast<long>(c.size());
  const long L = static_cast<long>(f.length());
  const long nu = f.scaling_shift;
  auto shifted = [N](const std::vector<double>& v, long advance) {
    // aligned[t] = v[(t - advance) mod N] with advance <= 0
    std::vector<double> out(v.size());
    for (long t = 0; t < N; ++t) out[static_cast<std::size_t>(t)] = v[static_cast<std::size_t>((((t - advance) % N) + N) % N)];
    return out;
  };
  ModwtCoeffs a = c;
  for (std::size_t j = 1; j <= c.levels; ++j) {
    const long p = 1L << (j - 1);
    a.details[j - 1] = shifted(c.details[j - 1], -(p * (L - 1) + nu));
  }
  a.approx = shifted(c.approx, ((1L << c.levels) - 1) * nu);
  return a;
}

inline double median_abs(std::vector<double> v) {
  for (auto& x : v) x = std::abs(x);
  const std::size_t n = v.size();
  std::nth_element(v.begin(), v.begin() + static_cast<long>(n / 2), v.end());
  const double hi = v[n / 2];
  if (n % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<long>(n / 2));
  return 0.5 * (lo + hi);
}

// sigma_hat sqrt(2 ln N) with sigma_hat = median(|W_1|) / 0.6745.
inline double universal_threshold(const ModwtCoeffs& c) {
  const std::size_t N = c.size();
  if (N < 8) throw DimensionError("universal_threshold: need at least 8 samples");
  if (c.details.empty()) throw DimensionError("universal_threshold: no detail levels");
  const double sigma = median_abs(c.details[0]) / 0.6745;
  return sigma * std::sqrt(2.0 * std::log(static_cast<double>(N)));
}

inline double soft_threshold(double w, double lambda) {
  const double m = std::abs(w) - lambda;
  return m > 0.0 ? std::copysign(m, w) : 0.0;
}

struct WaveletDenoiseOptions {
  std::string wavelet_id = "sym4";
  std::optional<std::size_t> levels;       // default min(5, floor(log2 N))
  std::optional<double> threshold;         // override the universal threshold
};

inline std::size_t default_levels(std::size_t n) { return std::min<std::size_t>(5, max_modwt_level(n)); }

inline std::vector<double> denoise_signal(const std::vector<double>& x, const WaveletDenoiseOptions& opt = {}) {
  const std::size_t J = opt.levels.value_or(default_levels(x.size()));
  ModwtCoeffs c = modwt(x, opt.wavelet_id, J);
  const double lambda = opt.threshold.value_or(universal_threshold(c));
  for (auto& level : c.details)
    for (auto& w : level) w = soft_threshold(w, lambda);
  return imodwt(c);
}

// Each detector column is denoised on its own.
inline Sinogram denoise_sinogram(const Sinogram& s, const WaveletDenoiseOptions& opt = {}) {
  s.validate();
  if (s.samples() < 8) throw DimensionError("denoise_sinogram: need at least 8 time samples");
  Sinogram out = s;
  std::vector<double> col(s.samples());
  for (Eigen::Index d = 0; d < s.data.cols(); ++d) {
    for (Eigen::Index t = 0; t < s.data.rows(); ++t) col[static_cast<std::size_t>(t)] = s.data(t, d);
    const auto y = denoise_signal(col, opt);
    for (Eigen::Index t = 0; t < s.data.rows(); ++t) out.data(t, d) = y[static_cast<std::size_t>(t)];
  }
  return out;
}

}  // namespace srcnpat
