#pragma once

// Minimal CNN kernels with exact gradients: 3x3 "same" convolution, ReLU,
// batch normalization, MSE loss, Adam and Gaussian initialization. Tensors are
// NHWC, double precision throughout, and every reduction runs in a fixed
// serial order so results are bitwise reproducible.

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "srcnpat/errors.hpp"
#include "srcnpat/rng.hpp"

namespace srcnpat::nn {

// Storage behind every Eigen map. Eigen's vectorized kernels peel a
// data-dependent number of leading elements, so an unaligned base would make
// the summation order (and the last bits) depend on where malloc put it.
using Buffer = std::vector<double, Eigen::aligned_allocator<double>>;

struct Tensor4 {
  std::size_t n = 0, h = 0, w = 0, c = 0;
  Buffer data;

  Tensor4() = default;
  Tensor4(std::size_t n_, std::size_t h_, std::size_t w_, std::size_t c_, double fill = 0.0)
      : n(n_), h(h_), w(w_), c(c_), data(n_ * h_ * w_ * c_, fill) {
    if (n == 0 || h == 0 || w == 0 || c == 0) throw DimensionError("Tensor4: all dimensions must be >= 1");
  }

  std::size_t size() const { return data.size(); }
  std::size_t index(std::size_t b, std::size_t y, std::size_t x, std::size_t ch) const {
    return ((b * h + y) * w + x) * c + ch;
  }
  double& at(std::size_t b, std::size_t y, std::size_t x, std::size_t ch) { return data[index(b, y, x, ch)]; }
  double at(std::size_t b, std::size_t y, std::size_t x, std::size_t ch) const { return data[index(b, y, x, ch)]; }
  bool same_shape(const Tensor4& o) const { return n == o.n && h == o.h && w == o.w && c == o.c; }
  std::string shape_string() const {
    return std::to_string(n) + "x" + std::to_string(h) + "x" + std::to_string(w) + "x" + std::to_string(c);
  }
};

enum class Mode { train, infer };

// A trainable (or running-statistic) array with its gradient buffer.
struct ParamRef {
  std::span<double> value;
  std::span<double> grad;
};

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMap = Eigen::Map<RowMatrix>;
using ConstRowMap = Eigen::Map<const RowMatrix>;

// 3x3 convolution, stride 1, zero padding 1. Weights are laid out as a
// (9*cin) x cout row-major matrix indexed [(ky*3 + kx)*cin + ci][co], so the
// forward pass is im2col(x) * W + b.
class ConvLayer {
 public:
  static constexpr std::size_t kKernel = 3;
  static constexpr std::size_t kTaps = kKernel * kKernel;

  ConvLayer() = default;
  ConvLayer(std::size_t cin, std::size_t cout)
      : weight(kTaps * cin * cout, 0.0), bias(cout, 0.0), grad_weight(kTaps * cin * cout, 0.0), grad_bias(cout, 0.0),
        cin_(cin), cout_(cout) {
    if (cin == 0 || cout == 0) throw DimensionError("ConvLayer: channel counts must be >= 1");
  }

  std::size_t in_channels() const { return cin_; }
  std::size_t out_channels() const { return cout_; }
  std::size_t parameter_count() const { return weight.size() + bias.size(); }
  bool has_cache() const { return cached_.has_value(); }
  void clear_cache() { cached_.reset(); }

  Tensor4 forward(const Tensor4& x, bool cache = true) {
    if (x.c != cin_)
      throw DimensionError("conv2d: input has " + std::to_string(x.c) + " channels, layer expects " + std::to_string(cin_));
    Tensor4 out(x.n, x.h, x.w, cout_);
    const std::size_t P = x.h * x.w, K = kTaps * cin_;
    ConstRowMap W(weight.data(), static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(cout_));
    Eigen::Map<const Eigen::RowVectorXd> b(bias.data(), static_cast<Eigen::Index>(cout_));
    RowMatrix cols;
    for (std::size_t s = 0; s < x.n; ++s)
      for (std::size_t p0 = 0; p0 < P; p0 += kBlock) {
        const std::size_t p1 = std::min(P, p0 + kBlock);
        im2col(x, s, p0, p1, cols);
        RowMap o(out.data.data() + (s * P + p0) * cout_, static_cast<Eigen::Index>(p1 - p0), static_cast<Eigen::Index>(cout_));
        o.noalias() = cols * W;
        o.rowwise() += b;
      }
    if (cache) cached_ = x;
    return out;
  }

  // Overwrites grad_weight/grad_bias with the gradients of this batch and
  // returns the gradient with respect to the cached input.
  Tensor4 backward(const Tensor4& grad_out) {
    if (!cached_) throw Error("conv2d_backward: no cached input; run forward first");
    const Tensor4& x = *cached_;
    if (grad_out.n != x.n || grad_out.h != x.h || grad_out.w != x.w || grad_out.c != cout_)
      throw DimensionError("conv2d_backward: gradient shape " + grad_out.shape_string() + " does not match output");
    const std::size_t P = x.h * x.w, K = kTaps * cin_;
    ConstRowMap W(weight.data(), static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(cout_));
    RowMap gW(grad_weight.data(), static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(cout_));
    Eigen::Map<Eigen::RowVectorXd> gb(grad_bias.data(), static_cast<Eigen::Index>(cout_));
    gW.setZero();
    gb.setZero();
    Tensor4 grad_in(x.n, x.h, x.w, cin_);
    RowMatrix cols, gcols;
    for (std::size_t s = 0; s < x.n; ++s)
      for (std::size_t p0 = 0; p0 < P; p0 += kBlock) {
        const std::size_t p1 = std::min(P, p0 + kBlock);
        im2col(x, s, p0, p1, cols);
        ConstRowMap g(grad_out.data.data() + (s * P + p0) * cout_, static_cast<Eigen::Index>(p1 - p0),
                      static_cast<Eigen::Index>(cout_));
        gW.noalias() += cols.transpose() * g;
        gb += g.colwise().sum();
        gcols.noalias() = g * W.transpose();
        col2im_add(gcols, s, p0, p1, grad_in);
      }
    return grad_in;
  }

  Buffer weight;
  Buffer bias;
  Buffer grad_weight;
  Buffer grad_bias;

 private:
  static constexpr std::size_t kBlock = 4096;

  void im2col(const Tensor4& x, std::size_t s, std::size_t p0, std::size_t p1, RowMatrix& cols) const {
    const std::size_t K = kTaps * cin_;
    cols.resize(static_cast<Eigen::Index>(p1 - p0), static_cast<Eigen::Index>(K));
    for (std::size_t p = p0; p < p1; ++p) {
      const std::size_t y = p / x.w, xx = p % x.w;
      double* row = cols.data() + (p - p0) * K;
      for (std::size_t ky = 0; ky < kKernel; ++ky) {
        const long sy = static_cast<long>(y) + static_cast<long>(ky) - 1;
        for (std::size_t kx = 0; kx < kKernel; ++kx) {
          const long sx = static_cast<long>(xx) + static_cast<long>(kx) - 1;
          double* dst = row + (ky * kKernel + kx) * cin_;
          if (sy < 0 || sx < 0 || sy >= static_cast<long>(x.h) || sx >= static_cast<long>(x.w)) {
            std::fill(dst, dst + cin_, 0.0);
          } else {
            const double* src = x.data.data() + x.index(s, static_cast<std::size_t>(sy), static_cast<std::size_t>(sx), 0);
            std::copy(src, src + cin_, dst);
          }
        }
      }
    }
  }

  void col2im_add(const RowMatrix& gcols, std::size_t s, std::size_t p0, std::size_t p1, Tensor4& grad_in) const {
    const std::size_t K = kTaps * cin_;
    for (std::size_t p = p0; p < p1; ++p) {
      const std::size_t y = p / grad_in.w, xx = p % grad_in.w;
      const double* row = gcols.data() + (p - p0) * K;
      for (std::size_t ky = 0; ky < kKernel; ++ky) {
        const long sy = static_cast<long>(y) + static_cast<long>(ky) - 1;
        if (sy < 0 || sy >= static_cast<long>(grad_in.h)) continue;
        for (std::size_t kx = 0; kx < kKernel; ++kx) {
          const long sx = static_cast<long>(xx) + static_cast<long>(kx) - 1;
          if (sx < 0 || sx >= static_cast<long>(grad_in.w)) continue;
          double* dst = grad_in.data.data() + grad_in.index(s, static_cast<std::size_t>(sy), static_cast<std::size_t>(sx), 0);
          const double* src = row + (ky * kKernel + kx) * cin_;
          for (std::size_t ci = 0; ci < cin_; ++ci) dst[ci] += src[ci];
        }
      }
    }
  }

  std::size_t cin_ = 0, cout_ = 0;
  std::optional<Tensor4> cached_;
};

struct ConvGrads {
  Tensor4 grad_in;
  Buffer grad_w;
  Buffer grad_b;
};

inline Tensor4 conv2d_forward(const Tensor4& x, ConvLayer& layer) { return layer.forward(x); }

inline ConvGrads conv2d_backward(const Tensor4& grad_out, ConvLayer& layer) {
  Tensor4 gi = layer.backward(grad_out);
  return {std::move(gi), layer.grad_weight, layer.grad_bias};
}

inline Tensor4 relu(const Tensor4& x) {
  Tensor4 y = x;
  for (auto& v : y.data) v = v < 0.0 ? 0.0 : v;  // NaN passes through
  return y;
}

// Subgradient at exactly 0 is 0. `x` may be the forward input or output, since
// both are positive on the same set.
inline Tensor4 relu_backward(const Tensor4& grad_out, const Tensor4& x) {
  if (!grad_out.same_shape(x)) throw DimensionError("relu_backward: shape mismatch");
  Tensor4 g = grad_out;
  for (std::size_t k = 0; k < g.size(); ++k)
    if (!(x.data[k] > 0.0)) g.data[k] = 0.0;
  return g;
}

// Per-channel batch normalization over (batch, height, width).
class BatchNormLayer {
 public:
  BatchNormLayer() = default;
  explicit BatchNormLayer(std::size_t channels, double momentum = 0.99, double epsilon = 1e-3)
      : gamma(channels, 1.0), beta(channels, 0.0), running_mean(channels, 0.0), running_var(channels, 1.0),
        grad_gamma(channels, 0.0), grad_beta(channels, 0.0), momentum(momentum), epsilon(epsilon) {
    if (channels == 0) throw DimensionError("BatchNormLayer: channel count must be >= 1");
  }

  std::size_t channels() const { return gamma.size(); }

  Tensor4 forward(const Tensor4& x, Mode mode) {
    const std::size_t C = channels();
    if (x.c != C) throw DimensionError("batchnorm: channel mismatch");
    const std::size_t M = x.n * x.h * x.w;
    Tensor4 y(x.n, x.h, x.w, C);
    if (mode == Mode::infer) {
      std::vector<double> scale(C), shift(C);
      for (std::size_t ch = 0; ch < C; ++ch) {
        scale[ch] = gamma[ch] / std::sqrt(running_var[ch] + epsilon);
        shift[ch] = beta[ch] - running_mean[ch] * scale[ch];
      }
      for (std::size_t m = 0; m < M; ++m)
        for (std::size_t ch = 0; ch < C; ++ch) y.data[m * C + ch] = x.data[m * C + ch] * scale[ch] + shift[ch];
      return y;
    }
    if (M < 2) throw ValidationError("batchnorm: train mode needs more than one value per channel");
    std::vector<double> mean(C, 0.0), var(C, 0.0);
    for (std::size_t m = 0; m < M; ++m)
      for (std::size_t ch = 0; ch < C; ++ch) mean[ch] += x.data[m * C + ch];
    for (auto& v : mean) v /= static_cast<double>(M);
    for (std::size_t m = 0; m < M; ++m)
      for (std::size_t ch = 0; ch < C; ++ch) {
        const double d = x.data[m * C + ch] - mean[ch];
        var[ch] += d * d;
      }
    for (auto& v : var) v /= static_cast<double>(M);
    inv_std_.assign(C, 0.0);
    for (std::size_t ch = 0; ch < C; ++ch) inv_std_[ch] = 1.0 / std::sqrt(var[ch] + epsilon);
    x_hat_ = Tensor4(x.n, x.h, x.w, C);
    for (std::size_t m = 0; m < M; ++m)
      for (std::size_t ch = 0; ch < C; ++ch) {
        const std::size_t k = m * C + ch;
        const double xh = (x.data[k] - mean[ch]) * inv_std_[ch];
        x_hat_->data[k] = xh;
        y.data[k] = gamma[ch] * xh + beta[ch];
      }
    for (std::size_t ch = 0; ch < C; ++ch) {
      running_mean[ch] = momentum * running_mean[ch] + (1.0 - momentum) * mean[ch];
      running_var[ch] = momentum * running_var[ch] + (1.0 - momentum) * var[ch];
    }
    return y;
  }

  // Valid after a train-mode forward. Overwrites grad_gamma/grad_beta.
  Tensor4 backward(const Tensor4& grad_out) {
    if (!x_hat_) throw Error("batchnorm_backward: no cached train-mode forward");
    const Tensor4& xh = *x_hat_;
    if (!grad_out.same_shape(xh)) throw DimensionError("batchnorm_backward: shape mismatch");
    const std::size_t C = channels(), M = xh.n * xh.h * xh.w;
    std::vector<double> sum_g(C, 0.0), sum_gx(C, 0.0);
    for (std::size_t m = 0; m < M; ++m)
      for (std::size_t ch = 0; ch < C; ++ch) {
        const std::size_t k = m * C + ch;
        sum_g[ch] += grad_out.data[k];
        sum_gx[ch] += grad_out.data[k] * xh.data[k];
      }
    for (std::size_t ch = 0; ch < C; ++ch) {
      grad_gamma[ch] = sum_gx[ch];
      grad_beta[ch] = sum_g[ch];
    }
    Tensor4 gi(xh.n, xh.h, xh.w, C);
    const double invM = 1.0 / static_cast<double>(M);
    for (std::size_t m = 0; m < M; ++m)
      for (std::size_t ch = 0; ch < C; ++ch) {
        const std::size_t k = m * C + ch;
        gi.data[k] = gamma[ch] * inv_std_[ch] *
                     (grad_out.data[k] - invM * sum_g[ch] - xh.data[k] * invM * sum_gx[ch]);
      }
    return gi;
  }

  void clear_cache() { x_hat_.reset(); }

  std::vector<double> gamma, beta;
  std::vector<double> running_mean, running_var;
  std::vector<double> grad_gamma, grad_beta;
  double momentum = 0.99;
  double epsilon = 1e-3;

 private:
  std::optional<Tensor4> x_hat_;
  std::vector<double> inv_std_;
};

struct LossResult {
  double loss = 0.0;
  Tensor4 grad;
};

// (1/N) sum_i ||target_i - pred_i||^2 with N the batch size, not the element
// count.
inline LossResult mse_loss(const Tensor4& pred, const Tensor4& target) {
  if (!pred.same_shape(target))
    throw DimensionError("mse_loss: prediction " + pred.shape_string() + " vs target " + target.shape_string());
  LossResult r{0.0, Tensor4(pred.n, pred.h, pred.w, pred.c)};
  const double invN = 1.0 / static_cast<double>(pred.n);
  for (std::size_t k = 0; k < pred.size(); ++k) {
    const double d = pred.data[k] - target.data[k];
    r.loss += d * d;
    r.grad.data[k] = 2.0 * d * invN;
  }
  r.loss *= invN;
  return r;
}

struct AdamState {
  std::vector<std::vector<double>> m, v;
  std::uint64_t t = 0;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const {
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw ValidationError("Adam: lr must be >= 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
      throw ValidationError("Adam: betas must lie in [0, 1)");
    if (!(epsilon > 0.0)) throw ValidationError("Adam: epsilon must be > 0");
  }
};

// Bias-corrected Adam. Moment buffers are created on the first call.
inline void adam_step(std::span<const ParamRef> params, AdamState& st) {
  st.validate();
  if (st.m.empty()) {
    for (const auto& p : params) {
      st.m.emplace_back(p.value.size(), 0.0);
      st.v.emplace_back(p.value.size(), 0.0);
    }
  }
  if (st.m.size() != params.size()) throw DimensionError("adam_step: parameter list does not match optimizer state");
  ++st.t;
  const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.t));
  const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    if (p.grad.size() != p.value.size() || st.m[i].size() != p.value.size())
      throw DimensionError("adam_step: shape mismatch for parameter " + std::to_string(i));
    auto& m = st.m[i];
    auto& v = st.v[i];
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const double g = p.grad[k];
      m[k] = st.beta1 * m[k] + (1.0 - st.beta1) * g;
      v[k] = st.beta2 * v[k] + (1.0 - st.beta2) * g * g;
      const double mh = m[k] / c1;
      const double vh = v[k] / c2;
      p.value[k] -= st.lr * mh / (std::sqrt(vh) + st.epsilon);
    }
  }
}

// i.i.d. Normal(mean, stddev^2) entries.
inline void init_normal(std::span<double> out, double stddev, Rng& rng, double mean = 0.0) {
  std::normal_distribution<double> dist(mean, stddev);
  for (auto& v : out) v = dist(rng);
}

inline std::vector<double> init_weights(std::size_t count, std::uint64_t seed, double stddev = 1e-3) {
  std::vector<double> w(count);
  Rng rng(seed);
  init_normal(w, stddev, rng);
  return w;
}

}  // namespace srcnpat::nn
