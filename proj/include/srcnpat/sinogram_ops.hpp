#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "srcnpat/core.hpp"
#include "srcnpat/rng.hpp"

namespace srcnpat {

inline double mean_power(const Matrix& m) { return m.squaredNorm() / static_cast<double>(m.size()); }

// Adds white Gaussian noise at the requested SNR, where signal power is the
// mean square over the whole sinogram.
inline Sinogram add_gaussian_noise(const Sinogram& s, double snr_db, std::uint64_t seed) {
  s.validate();
  if (!std::isfinite(snr_db)) throw ValidationError("add_gaussian_noise: SNR must be finite");
  const double ps = mean_power(s.data);
  if (!(ps > 0.0)) throw ValidationError("add_gaussian_noise: SNR is undefined for an all-zero sinogram");
  const double sigma = std::sqrt(ps * std::pow(10.0, -snr_db / 10.0));
  Rng rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  Sinogram out = s;
  for (Eigen::Index t = 0; t < out.data.rows(); ++t)
    for (Eigen::Index d = 0; d < out.data.cols(); ++d) out.data(t, d) += noise(rng);
  return out;
}

// Keeps detector columns 0, factor, 2 factor, ...
inline Sinogram subsample_detectors(const Sinogram& s, std::size_t factor) {
  s.validate();
  if (factor < 1) throw DimensionError("subsample_detectors: factor must be >= 1");
  if (s.detectors() % factor != 0)
    throw DimensionError("subsample_detectors: " + std::to_string(s.detectors()) + " detectors not divisible by " +
                         std::to_string(factor));
  const std::size_t kept = s.detectors() / factor;
  Matrix out(s.data.rows(), static_cast<Eigen::Index>(kept));
  for (std::size_t i = 0; i < kept; ++i) out.col(static_cast<Eigen::Index>(i)) = s.data.col(static_cast<Eigen::Index>(i * factor));
  return Sinogram(std::move(out), s.dt, s.t0);
}

// Index of the input detector nearest in angle to output detector j, for two
// equiangular rings sharing detector 0's position. Exact integer arithmetic:
// output j sits at input position j * d_in / d_out. A tie goes to the
// preceding input detector, so 2x upsampling duplicates every column.
inline std::size_t nearest_input_column(std::size_t j, std::size_t d_in, std::size_t d_out) {
  const std::uint64_t num = static_cast<std::uint64_t>(j) * d_in;
  const std::uint64_t base = num / d_out;
  const std::uint64_t rem = num % d_out;
  const std::uint64_t pick = (2 * rem > d_out) ? base + 1 : base;
  return static_cast<std::size_t>(pick % d_in);
}

inline Sinogram nn_interpolate(const Sinogram& s, std::size_t target_cols) {
  s.validate();
  const std::size_t d_in = s.detectors();
  if (target_cols < d_in)
    throw DimensionError("nn_interpolate: target detector count " + std::to_string(target_cols) + " < input " +
                         std::to_string(d_in));
  Matrix out(s.data.rows(), static_cast<Eigen::Index>(target_cols));
  for (std::size_t j = 0; j < target_cols; ++j)
    out.col(static_cast<Eigen::Index>(j)) = s.data.col(static_cast<Eigen::Index>(nearest_input_column(j, d_in, target_cols)));
  return Sinogram(std::move(out), s.dt, s.t0);
}

inline void require_compatible(const Sinogram& a, const Sinogram& b, const char* what) {
  require_same_shape(a, b, what);
  if (std::abs(a.dt - b.dt) > 1e-12 * a.dt) throw DimensionError(std::string(what) + ": sinogram dt differs");
}

// s_in - s_f: what the network learns to predict.
inline Sinogram compute_residual(const Sinogram& s_in, const Sinogram& s_f) {
  require_compatible(s_in, s_f, "compute_residual");
  return Sinogram(s_in.data - s_f.data, s_in.dt, s_in.t0);
}

// t_in - t_r: removes a predicted residual.
inline Sinogram apply_restoration(const Sinogram& t_in, const Sinogram& t_r) {
  require_compatible(t_in, t_r, "apply_restoration");
  return Sinogram(t_in.data - t_r.data, t_in.dt, t_in.t0);
}

struct PatchPair {
  Matrix input_patch;
  Matrix target_patch;
  std::string source_id;
  std::size_t row_offset = 0;
  std::size_t col_offset = 0;
};

struct PatchOffset {
  std::size_t row = 0;
  std::size_t col = 0;
};

// Uniform in-bound offsets, drawn with replacement.
inline std::vector<PatchOffset> patch_offsets(std::size_t rows, std::size_t cols, std::size_t n, std::size_t size,
                                              std::uint64_t seed) {
  if (size < 1 || size > rows || size > cols)
    throw DimensionError("extract_patches: patch size " + std::to_string(size) + " exceeds sinogram " +
                         std::to_string(rows) + "x" + std::to_string(cols));
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> r(0, rows - size), c(0, cols - size);
  std::vector<PatchOffset> out(n);
  for (auto& o : out) {
    o.row = r(rng);
    o.col = c(rng);
  }
  return out;
}

inline PatchPair cut_patch(const Sinogram& s_in, const Sinogram& s_r, PatchOffset at, std::size_t size,
                           const std::string& source_id, double scale = 1.0) {
  const auto r = static_cast<Eigen::Index>(at.row), c = static_cast<Eigen::Index>(at.col);
  const auto k = static_cast<Eigen::Index>(size);
  if (at.row + size > s_in.samples() || at.col + size > s_in.detectors())
    throw DimensionError("cut_patch: offset out of bounds");
  return {s_in.data.block(r, c, k, k) / scale, s_r.data.block(r, c, k, k) / scale, source_id, at.row, at.col};
}

inline std::vector<PatchPair> extract_patches(const Sinogram& s_in, const Sinogram& s_r, std::size_t n, std::size_t size,
                                              std::uint64_t seed, const std::string& source_id = "") {
  require_compatible(s_in, s_r, "extract_patches");
  std::vector<PatchPair> out;
  out.reserve(n);
  for (const auto& o : patch_offsets(s_in.samples(), s_in.detectors(), n, size, seed))
    out.push_back(cut_patch(s_in, s_r, o, size, source_id));
  return out;
}

}  // namespace srcnpat
