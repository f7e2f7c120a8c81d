#pragma once

// Seven-layer residual CNN for sinogram restoration: Conv(1->64)+ReLU,
// five blocks of Conv(64->64)+ReLU+BN, then Conv(64->1). The network
// predicts the residual (input minus clean), which is subtracted from the
// input at inference time.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "srcnpat/core.hpp"
#include "srcnpat/io.hpp"
#include "srcnpat/nn.hpp"
#include "srcnpat/rng.hpp"
#include "srcnpat/sinogram_ops.hpp"

namespace srcnpat {

inline constexpr std::size_t kSrcnTrainableParams = 186'497;
inline constexpr std::size_t kSrcnNonTrainableParams = 640;

struct SrcnArchitecture {
  std::size_t depth = 7;       // convolution layers
  std::size_t filters = 64;    // filters on every layer but the last
  std::size_t bn_first = 2;    // 1-based, inclusive
  std::size_t bn_last = 6;
};

struct TrainConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::size_t batch_size = 100;
  std::size_t epochs = 10;
  std::uint64_t seed = 1;
  std::vector<double> snr_mix{20.0, 40.0, 60.0};
  double validation_fraction = 0.13;
  // After each epoch, replace the BN running statistics by the plain average
  // of batch statistics over the training split under the current weights.
  // With momentum 0.99 the exponential average needs on the order of a
  // thousand steps to forget its (0, 1) start, far more than a short run has.
  bool recalibrate_bn = true;
  // Write a checkpoint every K epochs (0 disables periodic checkpoints).
  std::size_t checkpoint_every = 0;
  std::filesystem::path checkpoint_path;
  std::filesystem::path log_path;

  void validate() const {
    if (batch_size < 1) throw ValidationError("train: batch_size must be >= 1");
    if (epochs < 1) throw ValidationError("train: epochs must be >= 1");
    if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
      throw ValidationError("train: validation_fraction must lie in [0, 1)");
    if (checkpoint_every > 0 && checkpoint_path.empty())
      throw ValidationError("train: checkpoint_every set without a checkpoint path");
    nn::AdamState probe;
    probe.lr = lr;
    probe.beta1 = beta1;
    probe.beta2 = beta2;
    probe.epsilon = adam_epsilon;
    probe.validate();
  }
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;  // NaN when there is no validation set
  double wall_time = 0.0;
};

struct TrainingLog {
  std::vector<EpochRecord> epochs;
  std::size_t train_count = 0;
  std::size_t val_count = 0;
};

class SrcnModel {
 public:
  explicit SrcnModel(std::uint64_t seed = 1, SrcnArchitecture arch = {}, double bn_momentum = 0.99,
                     double bn_epsilon = 1e-3)
      : arch_(arch) {
    if (arch.depth < 2 || arch.filters < 1 || arch.bn_first < 2 || arch.bn_last >= arch.depth ||
        arch.bn_first > arch.bn_last)
      throw ArchitectureError("SRCN: malformed architecture description");
    for (std::size_t l = 0; l < arch.depth; ++l) {
      const std::size_t cin = (l == 0) ? 1 : arch.filters;
      const std::size_t cout = (l + 1 == arch.depth) ? 1 : arch.filters;
      convs_.emplace_back(cin, cout);
      Rng rng(mix_seed(seed, l));
      nn::init_normal(convs_.back().weight, 1e-3, rng);
    }
    for (std::size_t l = arch.bn_first; l <= arch.bn_last; ++l) bns_.emplace_back(arch.filters, bn_momentum, bn_epsilon);
    if (trainable_parameter_count() != kSrcnTrainableParams || non_trainable_parameter_count() != kSrcnNonTrainableParams)
      throw ArchitectureError("SRCN: parameter count " + std::to_string(trainable_parameter_count()) + "/" +
                              std::to_string(non_trainable_parameter_count()) + " differs from required " +
                              std::to_string(kSrcnTrainableParams) + "/" + std::to_string(kSrcnNonTrainableParams));
  }

  const SrcnArchitecture& architecture() const { return arch_; }
  std::vector<nn::ConvLayer>& convs() { return convs_; }
  const std::vector<nn::ConvLayer>& convs() const { return convs_; }
  std::vector<nn::BatchNormLayer>& batchnorms() { return bns_; }
  const std::vector<nn::BatchNormLayer>& batchnorms() const { return bns_; }

  std::size_t trainable_parameter_count() const {
    std::size_t n = 0;
    for (const auto& c : convs_) n += c.parameter_count();
    for (const auto& b : bns_) n += b.gamma.size() + b.beta.size();
    return n;
  }
  std::size_t non_trainable_parameter_count() const {
    std::size_t n = 0;
    for (const auto& b : bns_) n += b.running_mean.size() + b.running_var.size();
    return n;
  }

  // Divides network input by max|input| and rescales the output, so the
  // weights see unit-peak sinograms regardless of absolute pressure units.
  bool normalize_input = true;
  bool trained = false;

  nn::Tensor4 forward(const nn::Tensor4& x, nn::Mode mode) {
    if (x.c != 1) throw DimensionError("SRCN forward: expected 1 input channel, got " + std::to_string(x.c));
    const bool train = mode == nn::Mode::train;
    activations_.clear();
    nn::Tensor4 h = x;
    std::size_t bn = 0;
    for (std::size_t l = 0; l < convs_.size(); ++l) {
      h = convs_[l].forward(h, train);
      if (l + 1 == convs_.size()) break;
      h = nn::relu(h);
      if (train) activations_.push_back(h);
      if (has_bn(l)) h = bns_[bn++].forward(h, mode);
    }
    if (!train)
      for (auto& c : convs_) c.clear_cache();
    return h;
  }

  // Back-propagates through the last train-mode forward, filling every
  // parameter gradient.
  void backward(const nn::Tensor4& grad_out) {
    if (activations_.size() + 1 != convs_.size()) throw Error("SRCN backward: no train-mode forward cached");
    nn::Tensor4 g = grad_out;
    std::size_t bn = bns_.size();
    for (std::size_t l = convs_.size(); l-- > 0;) {
      g = convs_[l].backward(g);
      if (l == 0) break;
      const std::size_t below = l - 1;
      if (has_bn(below)) g = bns_[--bn].backward(g);
      g = nn::relu_backward(g, activations_[below]);
    }
  }

  // Trainable parameters in a fixed order: per conv layer weight, bias; each
  // BN layer's gamma, beta follows the conv it normalizes.
  std::vector<nn::ParamRef> parameters() {
    std::vector<nn::ParamRef> p;
    std::size_t bn = 0;
    for (std::size_t l = 0; l < convs_.size(); ++l) {
      p.push_back({convs_[l].weight, convs_[l].grad_weight});
      p.push_back({convs_[l].bias, convs_[l].grad_bias});
      if (has_bn(l)) {
        p.push_back({bns_[bn].gamma, bns_[bn].grad_gamma});
        p.push_back({bns_[bn].beta, bns_[bn].grad_beta});
        ++bn;
      }
    }
    return p;
  }

  // Rounds every stored value to the nearest float, the checkpoint precision.
  void quantize_to_f32() {
    auto q = [](auto& v) {
      for (auto& x : v) x = static_cast<double>(static_cast<float>(x));
    };
    for (auto& c : convs_) {
      q(c.weight);
      q(c.bias);
    }
    for (auto& b : bns_) {
      q(b.gamma);
      q(b.beta);
      q(b.running_mean);
      q(b.running_var);
    }
  }

  void release_caches() {
    activations_.clear();
    activations_.shrink_to_fit();
    for (auto& c : convs_) c.clear_cache();
    for (auto& b : bns_) b.clear_cache();
  }

  bool has_bn(std::size_t zero_based_layer) const {
    const std::size_t one_based = zero_based_layer + 1;
    return one_based >= arch_.bn_first && one_based <= arch_.bn_last;
  }

 private:
  SrcnArchitecture arch_;
  std::vector<nn::ConvLayer> convs_;
  std::vector<nn::BatchNormLayer> bns_;
  std::vector<nn::Tensor4> activations_;  // ReLU outputs of layers 1..depth-1
};

inline SrcnModel build_srcn(std::uint64_t seed) { return SrcnModel(seed); }

// Stacks patches [first, first + count) of `order` into NHWC batches.
inline void stack_patches(const std::vector<PatchPair>& data, const std::vector<std::size_t>& order, std::size_t first,
                          std::size_t count, nn::Tensor4& input, nn::Tensor4& target) {
  const auto& p0 = data[order[first]];
  const auto h = static_cast<std::size_t>(p0.input_patch.rows()), w = static_cast<std::size_t>(p0.input_patch.cols());
  input = nn::Tensor4(count, h, w, 1);
  target = nn::Tensor4(count, h, w, 1);
  for (std::size_t b = 0; b < count; ++b) {
    const auto& p = data[order[first + b]];
    if (static_cast<std::size_t>(p.input_patch.rows()) != h || static_cast<std::size_t>(p.input_patch.cols()) != w ||
        p.target_patch.rows() != p.input_patch.rows() || p.target_patch.cols() != p.input_patch.cols())
      throw DimensionError("train: patch pairs must share one shape");
    std::copy(p.input_patch.data(), p.input_patch.data() + h * w, input.data.begin() + static_cast<long>(b * h * w));
    std::copy(p.target_patch.data(), p.target_patch.data() + h * w, target.data.begin() + static_cast<long>(b * h * w));
  }
}

// Fisher-Yates with a plain modulo draw, so the permutation depends only on
// the 64-bit generator and not on library distribution internals.
inline void seeded_shuffle(std::vector<std::size_t>& v, std::uint64_t seed) {
  Rng rng(seed);
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng() % i]);
}

inline void save_checkpoint(const SrcnModel& m, const nn::AdamState* opt, const std::filesystem::path& path);

namespace detail {

inline double evaluate_loss(SrcnModel& m, const std::vector<PatchPair>& data, const std::vector<std::size_t>& idx,
                            std::size_t batch) {
  if (idx.empty()) return std::nan("");
  double total = 0.0;
  nn::Tensor4 in, tg;
  for (std::size_t s = 0; s < idx.size(); s += batch) {
    const std::size_t n = std::min(batch, idx.size() - s);
    stack_patches(data, idx, s, n, in, tg);
    total += nn::mse_loss(m.forward(in, nn::Mode::infer), tg).loss * static_cast<double>(n);
  }
  return total / static_cast<double>(idx.size());
}

// Train-mode forward passes over `idx` with momentum (k-1)/k at batch k, which
// turns the running-statistic update into a cumulative mean.
inline void recalibrate_batch_norm(SrcnModel& m, const std::vector<PatchPair>& data, const std::vector<std::size_t>& idx,
                                   std::size_t batch) {
  std::vector<double> keep;
  for (const auto& b : m.batchnorms()) keep.push_back(b.momentum);
  nn::Tensor4 in, tg;
  std::size_t k = 0;
  for (std::size_t s = 0; s < idx.size(); s += batch) {
    ++k;
    for (auto& b : m.batchnorms()) b.momentum = static_cast<double>(k - 1) / static_cast<double>(k);
    stack_patches(data, idx, s, std::min(batch, idx.size() - s), in, tg);
    m.forward(in, nn::Mode::train);
  }
  for (std::size_t i = 0; i < keep.size(); ++i) m.batchnorms()[i].momentum = keep[i];
  m.release_caches();
}

}  // namespace detail

inline void write_training_log_csv(const TrainingLog& log, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << "epoch,train_loss,val_loss,wall_time\n";
  char buf[160];
  for (const auto& e : log.epochs) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.3f\n", e.epoch, e.train_loss, e.val_loss, e.wall_time);
    out << buf;
  }
}

using EpochCallback = std::function<void(const EpochRecord&)>;

// Mini-batch Adam on residual targets. Row 0 of the log holds the losses of
// the untrained model; rows 1..epochs follow each training epoch. The
// validation split is drawn once from the seed and never trained on.
inline TrainingLog train(SrcnModel& m, const std::vector<PatchPair>& data, const TrainConfig& cfg,
                         nn::AdamState* resume = nullptr, const EpochCallback& on_epoch = {}) {
  cfg.validate();
  if (data.empty()) throw ValidationError("train: dataset is empty");
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };

  std::vector<std::size_t> all(data.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  seeded_shuffle(all, stage_seed(cfg.seed, "validation-split"));
  std::size_t n_val = static_cast<std::size_t>(std::floor(cfg.validation_fraction * static_cast<double>(data.size())));
  if (n_val >= data.size()) n_val = data.size() - 1;
  std::vector<std::size_t> val(all.begin(), all.begin() + static_cast<long>(n_val));
  std::vector<std::size_t> tr(all.begin() + static_cast<long>(n_val), all.end());
  std::sort(val.begin(), val.end());
  std::sort(tr.begin(), tr.end());

  nn::AdamState local;
  nn::AdamState& opt = resume ? *resume : local;
  opt.lr = cfg.lr;
  opt.beta1 = cfg.beta1;
  opt.beta2 = cfg.beta2;
  opt.epsilon = cfg.adam_epsilon;

  TrainingLog log;
  log.train_count = tr.size();
  log.val_count = val.size();
  auto record = [&](EpochRecord r) {
    log.epochs.push_back(r);
    if (!cfg.log_path.empty()) write_training_log_csv(log, cfg.log_path);
    if (on_epoch) on_epoch(r);
  };
  record({0, detail::evaluate_loss(m, data, tr, cfg.batch_size), detail::evaluate_loss(m, data, val, cfg.batch_size),
          elapsed()});

  const std::uint64_t shuffle_seed = stage_seed(cfg.seed, "epoch-shuffle");
  nn::Tensor4 in, tg;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<std::size_t> order = tr;
    seeded_shuffle(order, mix_seed(shuffle_seed, epoch));
    double total = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t s = 0; s < order.size(); s += cfg.batch_size, ++batch_index) {
      const std::size_t n = std::min(cfg.batch_size, order.size() - s);
      stack_patches(data, order, s, n, in, tg);
      auto loss = nn::mse_loss(m.forward(in, nn::Mode::train), tg);
      if (!std::isfinite(loss.loss))
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + " batch " + std::to_string(batch_index));
      m.backward(loss.grad);
      const auto params = m.parameters();
      nn::adam_step(params, opt);
      total += loss.loss * static_cast<double>(n);
    }
    m.release_caches();
    if (cfg.recalibrate_bn) detail::recalibrate_batch_norm(m, data, tr, cfg.batch_size);
    m.trained = true;
    record({epoch, total / static_cast<double>(order.size()), detail::evaluate_loss(m, data, val, cfg.batch_size),
            elapsed()});
    if (cfg.checkpoint_every > 0 && (epoch % cfg.checkpoint_every == 0 || epoch == cfg.epochs))
      save_checkpoint(m, &opt, cfg.checkpoint_path);
  }
  return log;
}

struct Restoration {
  Sinogram t_r;  // predicted residual
  Sinogram t_f;  // t_in - t_r
};

// Whole-sinogram, fully convolutional inference with running BN statistics.
inline Restoration infer_sinogram(SrcnModel& m, const Sinogram& t_in) {
  t_in.validate();
  if (!m.trained) std::cerr << "warning: infer_sinogram on an untrained model\n";
  double scale = 1.0;
  if (m.normalize_input) {
    const double peak = t_in.data.cwiseAbs().maxCoeff();
    if (peak > 0.0) scale = peak;
  }
  const std::size_t T = t_in.samples(), D = t_in.detectors();
  nn::Tensor4 x(1, T, D, 1);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t d = 0; d < D; ++d)
      x.data[t * D + d] = t_in.data(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(d)) / scale;
  const nn::Tensor4 y = m.forward(x, nn::Mode::infer);
  Matrix r(static_cast<Eigen::Index>(T), static_cast<Eigen::Index>(D));
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t d = 0; d < D; ++d) r(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(d)) = y.data[t * D + d] * scale;
  Sinogram t_r(std::move(r), t_in.dt, t_in.t0);
  Sinogram t_f = apply_restoration(t_in, t_r);
  return {std::move(t_r), std::move(t_f)};
}

// ---------------------------------------------------------------------------
// Checkpoint "SRCN" layout (little-endian):
//   magic "SRCN", u32 version, u32 flags (bit0 input normalization, bit1
//   trained, bit2 Adam state present), f64 BN momentum, f64 BN epsilon,
//   u32 layer count, then per layer u32 tag (1 = conv3x3, 2 = batchnorm),
//   u32 in, u32 out. Then per layer, in table order, f32 values: conv weight
//   ((ky*3+kx)*cin+ci)*cout+co and bias; BN gamma, beta, running_mean,
//   running_var. With Adam: u64 t, f64 lr, beta1, beta2, epsilon, u32 tensor
//   count, then per tensor u64 length and f64 first/second moments.

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::uint32_t kLayerConv = 1;
inline constexpr std::uint32_t kLayerBatchNorm = 2;

struct LayerEntry {
  std::uint32_t tag, in, out;
  bool operator==(const LayerEntry&) const = default;
};

inline std::vector<LayerEntry> layer_table(const SrcnModel& m) {
  std::vector<LayerEntry> t;
  std::size_t bn = 0;
  for (std::size_t l = 0; l < m.convs().size(); ++l) {
    const auto& c = m.convs()[l];
    t.push_back({kLayerConv, static_cast<std::uint32_t>(c.in_channels()), static_cast<std::uint32_t>(c.out_channels())});
    if (m.has_bn(l)) {
      const auto ch = static_cast<std::uint32_t>(m.batchnorms()[bn++].channels());
      t.push_back({kLayerBatchNorm, ch, ch});
    }
  }
  return t;
}

inline std::vector<char> encode_checkpoint(const SrcnModel& m, const nn::AdamState* opt) {
  io::ByteWriter w;
  w.magic("SRCN");
  w.u32(kCheckpointVersion);
  const bool has_bn = !m.batchnorms().empty();
  std::uint32_t flags = (m.normalize_input ? 1u : 0u) | (m.trained ? 2u : 0u) | (opt ? 4u : 0u);
  w.u32(flags);
  w.f64(has_bn ? m.batchnorms()[0].momentum : 0.99);
  w.f64(has_bn ? m.batchnorms()[0].epsilon : 1e-3);
  const auto table = layer_table(m);
  w.u32(static_cast<std::uint32_t>(table.size()));
  for (const auto& e : table) {
    w.u32(e.tag);
    w.u32(e.in);
    w.u32(e.out);
  }
  auto put = [&w](const auto& v) {
    for (double x : v) w.f32(static_cast<float>(x));
  };
  std::size_t bn = 0;
  for (std::size_t l = 0; l < m.convs().size(); ++l) {
    put(m.convs()[l].weight);
    put(m.convs()[l].bias);
    if (m.has_bn(l)) {
      const auto& b = m.batchnorms()[bn++];
      put(b.gamma);
      put(b.beta);
      put(b.running_mean);
      put(b.running_var);
    }
  }
  if (opt) {
    w.u64(opt->t);
    w.f64(opt->lr);
    w.f64(opt->beta1);
    w.f64(opt->beta2);
    w.f64(opt->epsilon);
    w.u32(static_cast<std::uint32_t>(opt->m.size()));
    for (std::size_t i = 0; i < opt->m.size(); ++i) {
      w.u64(opt->m[i].size());
      for (double x : opt->m[i]) w.f64(x);
      for (double x : opt->v[i]) w.f64(x);
    }
  }
  return w.bytes();
}

inline void save_checkpoint(const SrcnModel& m, const nn::AdamState* opt, const std::filesystem::path& path) {
  io::write_file(path, encode_checkpoint(m, opt));
}

struct Checkpoint {
  SrcnModel model;
  std::optional<nn::AdamState> adam;
};

inline Checkpoint decode_checkpoint(std::vector<char> bytes) {
  io::ByteReader r(std::move(bytes));
  r.expect_magic("SRCN", "checkpoint");
  const std::size_t at_version = r.offset();
  const auto version = r.u32("checkpoint header");
  if (version != kCheckpointVersion)
    throw FormatError("checkpoint: unsupported version " + std::to_string(version), at_version);
  const auto flags = r.u32("checkpoint header");
  const double momentum = r.f64("checkpoint header");
  const double epsilon = r.f64("checkpoint header");
  Checkpoint ck{SrcnModel(0, {}, momentum, epsilon), std::nullopt};
  SrcnModel& m = ck.model;
  const auto expected = layer_table(m);
  const auto count = r.u32("checkpoint layer table");
  if (count != expected.size())
    throw ArchitectureError("checkpoint: " + std::to_string(count) + " layers, SRCN has " + std::to_string(expected.size()));
  for (std::size_t i = 0; i < count; ++i) {
    LayerEntry e{};
    e.tag = r.u32("checkpoint layer table");
    e.in = r.u32("checkpoint layer table");
    e.out = r.u32("checkpoint layer table");
    if (!(e == expected[i]))
      throw ArchitectureError("checkpoint: layer " + std::to_string(i) + " (tag " + std::to_string(e.tag) + ", " +
                              std::to_string(e.in) + "->" + std::to_string(e.out) + ") does not match SRCN");
  }
  auto get = [&r](auto& v) {
    r.need(v.size() * 4, "checkpoint parameters");
    for (auto& x : v) x = static_cast<double>(r.f32("checkpoint parameters"));
  };
  std::size_t bn = 0;
  for (std::size_t l = 0; l < m.convs().size(); ++l) {
    get(m.convs()[l].weight);
    get(m.convs()[l].bias);
    if (m.has_bn(l)) {
      auto& b = m.batchnorms()[bn++];
      get(b.gamma);
      get(b.beta);
      get(b.running_mean);
      get(b.running_var);
    }
  }
  if (flags & 4u) {
    nn::AdamState a;
    a.t = r.u64("checkpoint optimizer");
    a.lr = r.f64("checkpoint optimizer");
    a.beta1 = r.f64("checkpoint optimizer");
    a.beta2 = r.f64("checkpoint optimizer");
    a.epsilon = r.f64("checkpoint optimizer");
    const auto tensors = r.u32("checkpoint optimizer");
    auto params = m.parameters();
    if (tensors != 0 && tensors != params.size())
      throw ArchitectureError("checkpoint: optimizer state has " + std::to_string(tensors) + " tensors, model has " +
                              std::to_string(params.size()));
    for (std::size_t i = 0; i < tensors; ++i) {
      const auto len = r.u64("checkpoint optimizer");
      if (len != params[i].value.size()) throw ArchitectureError("checkpoint: optimizer tensor " + std::to_string(i) + " has wrong length");
      r.need(len * 16, "checkpoint optimizer");
      std::vector<double> mv(len), vv(len);
      for (auto& x : mv) x = r.f64("checkpoint optimizer");
      for (auto& x : vv) x = r.f64("checkpoint optimizer");
      a.m.push_back(std::move(mv));
      a.v.push_back(std::move(vv));
    }
    ck.adam = std::move(a);
  }
  if (r.remaining() != 0) throw FormatError("checkpoint: trailing bytes", r.offset());
  m.normalize_input = (flags & 1u) != 0;
  m.trained = (flags & 2u) != 0;
  return ck;
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(io::read_file(path)); }

}  // namespace srcnpat
