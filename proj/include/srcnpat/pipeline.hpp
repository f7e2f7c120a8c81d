#pragma once

// Experiment orchestration: phantom -> forward simulation -> degradation
// (subsample + noise) -> restoration (nearest-neighbour, MODWT, SRCN) ->
// time-reversal reconstruction -> metrics. Every intermediate artifact is
// written to {outdir}/{phantom}/{snr}/{stage}.{ext}; noise-free artifacts use
// "clean" in place of the SNR directory.

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "srcnpat/config.hpp"
#include "srcnpat/core.hpp"
#include "srcnpat/io.hpp"
#include "srcnpat/metrics.hpp"
#include "srcnpat/phantoms.hpp"
#include "srcnpat/rng.hpp"
#include "srcnpat/sinogram_ops.hpp"
#include "srcnpat/srcn.hpp"
#include "srcnpat/wave_sim.hpp"
#include "srcnpat/wavelet.hpp"

namespace srcnpat {

// Failure inside a named pipeline stage; wraps the underlying error.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& inner)
      : Error("stage '" + stage + "': " + inner.what()), stage_(std::move(stage)), inner_kind_(inner.kind()) {}
  const std::string& stage() const noexcept { return stage_; }
  const std::string& inner_kind() const noexcept { return inner_kind_; }
  const char* kind() const noexcept override { return inner_kind_.c_str(); }

 private:
  std::string stage_;
  std::string inner_kind_;
};

template <class F>
auto run_stage(const std::string& stage, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(stage, e);
  }
}

inline const std::vector<std::string>& known_methods() {
  static const std::vector<std::string> m{"direct50", "nn", "modwt", "srcn"};
  return m;
}

struct PipelineConfig {
  std::filesystem::path outdir = "srcnpat-out";
  std::uint64_t seed = 2024;

  std::size_t forward_n = 501;
  double forward_dx = 1e-4;
  std::size_t recon_n = 251;
  double recon_dx = 2e-4;

  AcousticMedium medium{};
  std::size_t detector_count = 100;
  double detector_radius = 22e-3;
  TransducerResponse transducer{};
  SolverConfig solver{};

  std::size_t factor = 2;
  std::vector<double> snr_list{20.0, 40.0, 60.0};

  std::string wavelet_id = "sym4";
  std::size_t wavelet_levels = 0;  // 0 = min(5, floor(log2 T))
  std::string wavelet_order = "interp-first";

  double amplitude = 1000.0;
  double disk_radius = 2e-3;
  std::filesystem::path image_path;
  unsigned image_threshold = 128;

  std::size_t train_phantoms = 40;
  std::vector<std::string> train_kinds{"vessel", "derenzo"};
  std::size_t patches_per_sinogram = 50;
  std::size_t patch_size = 32;

  std::size_t eval_phantoms = 5;
  std::vector<std::string> eval_kinds{"vessel"};

  TrainConfig train{};
  double bn_momentum = 0.99;
  double bn_epsilon = 1e-3;
  bool normalize_input = true;

  std::filesystem::path checkpoint;  // pretrained model; empty means train (or fresh init)
  bool train_model = true;
  std::vector<std::string> methods{"direct50", "nn", "modwt", "srcn"};
  bool previews = true;

  PipelineConfig() {
    train.batch_size = 100;
    train.epochs = 10;
  }

  Grid2D forward_grid() const { return Grid2D(forward_n, forward_n, forward_dx); }
  Grid2D recon_grid() const { return Grid2D(recon_n, recon_n, recon_dx); }
  DetectorArray detectors() const {
    DetectorArray d;
    d.count = detector_count;
    d.radius = detector_radius;
    d.response = transducer;
    return d;
  }
  std::size_t sparse_count() const { return detector_count / factor; }

  WaveletDenoiseOptions wavelet_options() const {
    WaveletDenoiseOptions o;
    o.wavelet_id = wavelet_id;
    if (wavelet_levels > 0) o.levels = wavelet_levels;
    return o;
  }

  void validate() const;
};

inline config::Registry bind_config(PipelineConfig& c) {
  config::Registry r;
  r.bind("outdir", "output directory for all artifacts", c.outdir);
  r.bind("seed", "master seed; every stage seed derives from it", c.seed);
  r.bind("grid.forward.n", "forward-simulation grid nodes per side", c.forward_n);
  r.bind("grid.forward.dx", "forward-simulation grid spacing (m)", c.forward_dx);
  r.bind("grid.recon.n", "reconstruction grid nodes per side", c.recon_n);
  r.bind("grid.recon.dx", "reconstruction grid spacing (m)", c.recon_dx);
  r.bind("medium.sound_speed", "sound speed (m/s)", c.medium.sound_speed);
  r.bind("medium.density", "ambient density (kg/m^3)", c.medium.density);
  r.bind("detectors.count", "full detector count on the ring", c.detector_count);
  r.bind("detectors.radius", "detector ring radius (m)", c.detector_radius);
  r.bind("transducer.center_frequency", "detector center frequency (Hz)", c.transducer.center_frequency);
  r.bind("transducer.bandwidth", "fractional bandwidth (FWHM / center)", c.transducer.fractional_bandwidth);
  r.bind("transducer.enabled", "apply the detector frequency response", c.transducer.enabled);
  r.bind("solver.time_steps", "recorded time samples", c.solver.time_steps);
  r.bind("solver.dt", "time step and sampling interval (s)", c.solver.dt);
  r.bind("solver.pml_width", "minimum absorbing layer width (grid points)", c.solver.pml_width);
  r.bind("solver.pml_alpha", "absorption at the outer layer edge (nepers per point)", c.solver.pml_alpha);
  r.bind("solver.pml_auto", "grow the layer to an FFT-friendly padded size", c.solver.pml_auto);
  r.bind("solver.interpolate_detectors", "band-limited detector sampling in the forward run (else nearest node)",
         c.solver.interpolate_detectors);
  r.bind("solver.smooth_p0", "band-limit the initial pressure before propagation", c.solver.smooth_p0);
  r.bind("degrade.factor", "detector subsampling factor", c.factor);
  r.bind("degrade.snr_list", "noise levels in dB", c.snr_list);
  r.bind("wavelet.id", "wavelet family (sym4, haar)", c.wavelet_id);
  r.bind("wavelet.levels", "decomposition levels, 0 = min(5, floor(log2 T))", c.wavelet_levels);
  r.bind("wavelet.order", "interp-first or denoise-first", c.wavelet_order);
  r.bind("phantom.amplitude", "initial pressure inside absorbers (Pa)", c.amplitude);
  r.bind("phantom.disk_radius", "disk phantom radius (m)", c.disk_radius);
  r.bind("phantom.image", "graymap used by the image phantom kind", c.image_path);
  r.bind("phantom.image_threshold", "graymap binarization threshold", c.image_threshold);
  r.bind("dataset.phantoms", "training phantom count", c.train_phantoms);
  r.bind("dataset.kinds", "training phantom kinds, assigned round-robin", c.train_kinds);
  r.bind("dataset.patches", "patch pairs cut from each training sinogram", c.patches_per_sinogram);
  r.bind("dataset.patch_size", "square patch side (pixels)", c.patch_size);
  r.bind("eval.phantoms", "held-out evaluation phantom count", c.eval_phantoms);
  r.bind("eval.kinds", "evaluation phantom kinds, assigned round-robin", c.eval_kinds);
  r.bind("train.lr", "Adam learning rate", c.train.lr);
  r.bind("train.beta1", "Adam first-moment decay", c.train.beta1);
  r.bind("train.beta2", "Adam second-moment decay", c.train.beta2);
  r.bind("train.epsilon", "Adam denominator epsilon", c.train.adam_epsilon);
  r.bind("train.batch_size", "mini-batch size", c.train.batch_size);
  r.bind("train.epochs", "training epochs", c.train.epochs);
  r.bind("train.validation_fraction", "share of patches held out for validation loss", c.train.validation_fraction);
  r.bind("train.checkpoint_every", "write a checkpoint every K epochs (0 = end only)", c.train.checkpoint_every);
  r.bind("train.recalibrate_bn", "reset BN running statistics to the training-split average after each epoch",
         c.train.recalibrate_bn);
  r.bind("train.bn_momentum", "batch-norm running-statistic momentum", c.bn_momentum);
  r.bind("train.bn_epsilon", "batch-norm variance epsilon", c.bn_epsilon);
  r.bind("train.normalize_input", "scale network input by its peak magnitude", c.normalize_input);
  r.bind("pipeline.checkpoint", "pretrained checkpoint; empty = train in the pipeline", c.checkpoint);
  r.bind("pipeline.train", "train a model when no checkpoint is given", c.train_model);
  r.bind("pipeline.methods", "methods to evaluate (direct50, nn, modwt, srcn)", c.methods);
  r.bind("pipeline.previews", "write graymap previews next to binary artifacts", c.previews);
  return r;
}

inline void PipelineConfig::validate() const {
  auto check = [](bool ok, const char* key, const std::string& what) {
    if (!ok) throw ConfigError(key, what);
  };
  check(forward_n >= 3, "grid.forward.n", "must be >= 3");
  check(forward_dx > 0.0 && std::isfinite(forward_dx), "grid.forward.dx", "must be > 0");
  check(recon_n >= 3, "grid.recon.n", "must be >= 3");
  check(recon_dx > 0.0 && std::isfinite(recon_dx), "grid.recon.dx", "must be > 0");
  check(medium.sound_speed > 0.0 && std::isfinite(medium.sound_speed), "medium.sound_speed", "must be > 0");
  check(medium.density > 0.0 && std::isfinite(medium.density), "medium.density", "must be > 0");
  check(detector_count >= 2, "detectors.count", "must be >= 2");
  check(detector_radius > 0.0, "detectors.radius", "must be > 0");
  const double fwd_half = 0.5 * static_cast<double>(forward_n - 1) * forward_dx;
  const double rec_half = 0.5 * static_cast<double>(recon_n - 1) * recon_dx;
  check(detector_radius < fwd_half, "detectors.radius", "ring does not fit inside the forward grid");
  check(detector_radius < rec_half, "detectors.radius", "ring does not fit inside the reconstruction grid");
  check(0.5 * kPhantomRegionWidth < detector_radius, "detectors.radius", "ring must enclose the phantom region");
  check(transducer.center_frequency > 0.0, "transducer.center_frequency", "must be > 0");
  check(transducer.fractional_bandwidth > 0.0 && transducer.fractional_bandwidth < 2.0, "transducer.bandwidth",
        "must lie in (0, 2)");
  check(solver.time_steps >= 8, "solver.time_steps", "must be >= 8");
  check(solver.dt > 0.0 && std::isfinite(solver.dt), "solver.dt", "must be > 0");
  check(solver.pml_width >= 10, "solver.pml_width", "must be >= 10");
  check(solver.pml_alpha >= 0.0, "solver.pml_alpha", "must be >= 0");
  check(medium.sound_speed * solver.dt / std::min(forward_dx, recon_dx) <= 1.0, "solver.dt", "CFL number exceeds 1");
  check(medium.sound_speed * static_cast<double>(solver.time_steps) * solver.dt >= detector_radius, "solver.time_steps",
        "record too short for a wave to reach the detector ring");
  check(factor >= 1, "degrade.factor", "must be >= 1");
  check(detector_count % factor == 0, "degrade.factor", "must divide detectors.count");
  check(!snr_list.empty(), "degrade.snr_list", "must not be empty");
  for (double s : snr_list) check(std::isfinite(s), "degrade.snr_list", "entries must be finite");
  for (std::size_t i = 0; i < snr_list.size(); ++i)
    for (std::size_t j = i + 1; j < snr_list.size(); ++j) check(snr_list[i] != snr_list[j], "degrade.snr_list", "duplicate level");
  try {
    (void)wavelet_filter(wavelet_id);
  } catch (const Error& e) {
    throw ConfigError("wavelet.id", e.what());
  }
  check(wavelet_levels <= max_modwt_level(solver.time_steps), "wavelet.levels", "exceeds floor(log2 solver.time_steps)");
  check(solver.time_steps >= wavelet_filter(wavelet_id).length(), "solver.time_steps", "shorter than the wavelet filter");
  check(wavelet_order == "interp-first" || wavelet_order == "denoise-first", "wavelet.order",
        "must be interp-first or denoise-first");
  check(amplitude > 0.0 && std::isfinite(amplitude), "phantom.amplitude", "must be > 0");
  check(disk_radius >= 0.0 && disk_radius <= 0.5 * kPhantomRegionWidth, "phantom.disk_radius", "disk must fit the phantom region");
  auto check_kinds = [&](const std::vector<std::string>& kinds, const char* key, std::size_t count) {
    check(count == 0 || !kinds.empty(), key, "must not be empty");
    for (const auto& k : kinds) {
      try {
        if (phantom_kind_from_string(k) == PhantomKind::image_import)
          check(!image_path.empty(), "phantom.image", "required by the image phantom kind");
      } catch (const ValidationError& e) {
        throw ConfigError(key, e.what());
      }
    }
  };
  check_kinds(train_kinds, "dataset.kinds", train_phantoms);
  check_kinds(eval_kinds, "eval.kinds", eval_phantoms);
  check(patch_size >= 1 && patch_size <= solver.time_steps && patch_size <= detector_count, "dataset.patch_size",
        "must fit inside the interpolated sinogram");
  check(train.batch_size >= 1, "train.batch_size", "must be >= 1");
  check(train.epochs >= 1, "train.epochs", "must be >= 1");
  check(train.lr >= 0.0 && std::isfinite(train.lr), "train.lr", "must be >= 0");
  check(train.beta1 >= 0.0 && train.beta1 < 1.0, "train.beta1", "must lie in [0, 1)");
  check(train.beta2 >= 0.0 && train.beta2 < 1.0, "train.beta2", "must lie in [0, 1)");
  check(train.adam_epsilon > 0.0, "train.epsilon", "must be > 0");
  check(train.validation_fraction >= 0.0 && train.validation_fraction < 1.0, "train.validation_fraction",
        "must lie in [0, 1)");
  check(bn_momentum >= 0.0 && bn_momentum < 1.0, "train.bn_momentum", "must lie in [0, 1)");
  check(bn_epsilon > 0.0, "train.bn_epsilon", "must be > 0");
  check(!methods.empty(), "pipeline.methods", "must not be empty");
  for (const auto& m : methods)
    check(std::find(known_methods().begin(), known_methods().end(), m) != known_methods().end(), "pipeline.methods",
          "unknown method '" + m + "'");
}

// ---------------------------------------------------------------------------
// Naming and seeds

inline std::string snr_label(double snr_db) { return config::format_double(snr_db) + "dB"; }

inline std::string phantom_id(const std::string& role, const std::string& kind, std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04zu", index);
  return role + "-" + kind + "-" + buf;
}

inline std::filesystem::path artifact_path(const std::filesystem::path& outdir, const std::string& phantom,
                                           const std::string& snr_dir, const std::string& stage, const std::string& ext) {
  return outdir / phantom / snr_dir / (stage + "." + ext);
}

// Records every derived seed so a run manifest can reproduce each stage alone.
struct SeedBook {
  std::uint64_t master = 0;
  std::map<std::string, std::uint64_t> seeds;

  std::uint64_t derive(const std::string& stage) {
    const std::uint64_t s = stage_seed(master, stage);
    seeds[stage] = s;
    return s;
  }
};

// ---------------------------------------------------------------------------
// Thin stage wrappers

inline PhantomSpec phantom_spec(const PipelineConfig& c, PhantomKind kind, std::uint64_t seed) {
  PhantomSpec s;
  s.kind = kind;
  s.amplitude = c.amplitude;
  s.seed = seed;
  s.disk.radius = c.disk_radius;
  s.image.path = c.image_path;
  s.image.threshold = c.image_threshold;
  if (kind == PhantomKind::derenzo) {
    // Seeded rotation and size so a family of Derenzo phantoms differ.
    Rng rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    s.derenzo.rotation = 2.0 * std::numbers::pi * unit(rng);
    const double scale = 0.75 + 0.25 * unit(rng);
    for (auto& r : s.derenzo.radii) r *= scale;
  }
  return s;
}

inline PressureField stage_phantom(const PipelineConfig& c, const PhantomSpec& spec) {
  return run_stage("phantom", [&] { return make_phantom(spec, c.forward_grid()); });
}

inline Sinogram stage_simulate(const PipelineConfig& c, const PressureField& p0) {
  return run_stage("simulate", [&] {
    const auto det = c.detectors();
    c.solver.validate_for(p0.grid, c.medium, &det);
    return simulate_forward(p0, c.medium, det, c.solver);
  });
}

inline Sinogram stage_degrade(const PipelineConfig& c, const Sinogram& s_full, double snr_db, std::uint64_t seed) {
  return run_stage("degrade", [&] { return add_gaussian_noise(subsample_detectors(s_full, c.factor), snr_db, seed); });
}

inline Sinogram stage_interp(const PipelineConfig& c, const Sinogram& s) {
  return run_stage("interp", [&] { return nn_interpolate(s, c.detector_count); });
}

inline Sinogram stage_wavelet(const PipelineConfig& c, const Sinogram& s) {
  return run_stage("wavelet", [&] { return denoise_sinogram(s, c.wavelet_options()); });
}

// MODWT restoration honouring the configured order relative to interpolation.
inline Sinogram stage_modwt_restore(const PipelineConfig& c, const Sinogram& s_sparse, const Sinogram& s_interp) {
  if (c.wavelet_order == "denoise-first") return stage_interp(c, stage_wavelet(c, s_sparse));
  return stage_wavelet(c, s_interp);
}

inline PressureField stage_reconstruct(const PipelineConfig& c, const Sinogram& s) {
  return run_stage("reconstruct", [&] {
    DetectorArray det = c.detectors().with_count(s.detectors());
    SolverConfig cfg = c.solver;
    cfg.time_steps = s.samples();
    cfg.dt = s.dt;
    return time_reversal_reconstruct(s, det, c.recon_grid(), c.medium, cfg);
  });
}

inline void preview(const PipelineConfig& c, const PressureField& f, const std::filesystem::path& pafd) {
  if (c.previews) export_graymap(f, std::filesystem::path(pafd).replace_extension(".pgm"));
}
inline void preview(const PipelineConfig& c, const Sinogram& s, const std::filesystem::path& pasg) {
  if (c.previews) export_graymap(s, std::filesystem::path(pasg).replace_extension(".pgm"));
}

// ---------------------------------------------------------------------------
// Dataset manifest

struct DatasetSinogram {
  std::string id;
  std::string kind;
  std::uint64_t phantom_seed = 0;
  double snr_db = 0.0;
  std::filesystem::path input;   // S_IN, relative to the manifest
  std::filesystem::path target;  // S_IN - S_F, relative to the manifest
  double scale = 1.0;            // patches are divided by this
};

struct PatchRef {
  std::size_t sinogram = 0;
  std::size_t row = 0;
  std::size_t col = 0;
};

struct DatasetManifest {
  std::uint64_t master_seed = 0;
  std::size_t patch_size = 32;
  bool normalized = true;
  std::vector<DatasetSinogram> sinograms;
  std::vector<PatchRef> patches;
  std::filesystem::path root;  // directory holding the manifest
};

inline nlohmann::json to_json(const DatasetManifest& m) {
  nlohmann::json j;
  j["format"] = "srcnpat-dataset";
  j["version"] = 1;
  j["master_seed"] = m.master_seed;
  j["patch_size"] = m.patch_size;
  j["normalization"] = m.normalized ? "peak" : "none";
  j["sinograms"] = nlohmann::json::array();
  for (const auto& s : m.sinograms)
    j["sinograms"].push_back({{"id", s.id},
                              {"kind", s.kind},
                              {"phantom_seed", s.phantom_seed},
                              {"snr_db", s.snr_db},
                              {"input", s.input.generic_string()},
                              {"target", s.target.generic_string()},
                              {"scale", s.scale}});
  j["patches"] = nlohmann::json::array();
  for (const auto& p : m.patches)
    j["patches"].push_back({{"source", m.sinograms.at(p.sinogram).id}, {"row", p.row}, {"col", p.col}});
  j["patch_count"] = m.patches.size();
  return j;
}

inline void write_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
  const std::string text = to_json(m).dump(1) + "\n";
  io::write_file(path, std::span<const char>(text.data(), text.size()));
}

inline DatasetManifest read_manifest(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  DatasetManifest m;
  try {
    const auto j = nlohmann::json::parse(bytes.begin(), bytes.end());
    if (j.at("format") != "srcnpat-dataset") throw FormatError("manifest '" + path.string() + "': not a dataset manifest", 0);
    m.master_seed = j.at("master_seed").get<std::uint64_t>();
    m.patch_size = j.at("patch_size").get<std::size_t>();
    m.normalized = j.at("normalization") == "peak";
    std::map<std::string, std::size_t> index;
    for (const auto& s : j.at("sinograms")) {
      DatasetSinogram d;
      d.id = s.at("id").get<std::string>();
      d.kind = s.at("kind").get<std::string>();
      d.phantom_seed = s.at("phantom_seed").get<std::uint64_t>();
      d.snr_db = s.at("snr_db").get<double>();
      d.input = s.at("input").get<std::string>();
      d.target = s.at("target").get<std::string>();
      d.scale = s.at("scale").get<double>();
      index[d.id] = m.sinograms.size();
      m.sinograms.push_back(std::move(d));
    }
    for (const auto& p : j.at("patches")) {
      const auto src = p.at("source").get<std::string>();
      const auto it = index.find(src);
      if (it == index.end()) throw FormatError("manifest '" + path.string() + "': patch refers to unknown sinogram '" + src + "'", 0);
      m.patches.push_back({it->second, p.at("row").get<std::size_t>(), p.at("col").get<std::size_t>()});
    }
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("manifest '" + path.string() + "': " + e.what(), e.byte);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("manifest '" + path.string() + "': " + e.what(), 0);
  }
  m.root = path.parent_path();
  return m;
}

inline std::vector<PatchPair> load_patches(const DatasetManifest& m) {
  std::vector<PatchPair> out;
  out.reserve(m.patches.size());
  std::vector<std::optional<std::pair<Sinogram, Sinogram>>> cache(m.sinograms.size());
  for (const auto& p : m.patches) {
    auto& slot = cache.at(p.sinogram);
    const auto& meta = m.sinograms[p.sinogram];
    if (!slot) slot.emplace(read_sinogram(m.root / meta.input), read_sinogram(m.root / meta.target));
    out.push_back(cut_patch(slot->first, slot->second, {p.row, p.col}, m.patch_size, meta.id, m.normalized ? meta.scale : 1.0));
  }
  return out;
}

using Logger = std::function<void(const std::string&)>;

// Simulates every training phantom, degrades it at its round-robin SNR, and
// cuts patches of (interpolated input, residual) pairs.
inline DatasetManifest build_dataset(const PipelineConfig& c, SeedBook& seeds, const Logger& log = {}) {
  c.validate();
  DatasetManifest m;
  m.master_seed = c.seed;
  m.patch_size = c.patch_size;
  m.normalized = c.normalize_input;
  m.root = c.outdir;
  for (std::size_t i = 0; i < c.train_phantoms; ++i) {
    const std::string kind = c.train_kinds[i % c.train_kinds.size()];
    const double snr = c.snr_list[i % c.snr_list.size()];
    const std::string id = phantom_id("train", kind, i);
    if (log) log("dataset: " + id + " at " + snr_label(snr));
    const auto spec = phantom_spec(c, phantom_kind_from_string(kind), seeds.derive("phantom/" + id));
    const PressureField p0 = stage_phantom(c, spec);
    const Sinogram s_f = stage_simulate(c, p0);
    const Sinogram s_sparse = stage_degrade(c, s_f, snr, seeds.derive("noise/" + id + "/" + snr_label(snr)));
    const Sinogram s_in = stage_interp(c, s_sparse);
    const Sinogram target = compute_residual(s_in, s_f);
    const auto dir = snr_label(snr);
    write_field(p0, artifact_path(c.outdir, id, "clean", "p0", "pafd"));
    write_sinogram(s_f, artifact_path(c.outdir, id, "clean", "sinogram_full", "pasg"));
    write_sinogram(s_sparse, artifact_path(c.outdir, id, dir, "sinogram_sparse", "pasg"));
    write_sinogram(s_in, artifact_path(c.outdir, id, dir, "sinogram_nn", "pasg"));
    write_sinogram(target, artifact_path(c.outdir, id, dir, "residual_target", "pasg"));
    preview(c, p0, artifact_path(c.outdir, id, "clean", "p0", "pafd"));
    DatasetSinogram d;
    d.id = id;
    d.kind = kind;
    d.phantom_seed = spec.seed;
    d.snr_db = snr;
    d.input = std::filesystem::path(id) / dir / "sinogram_nn.pasg";
    d.target = std::filesystem::path(id) / dir / "residual_target.pasg";
    const double peak = s_in.data.cwiseAbs().maxCoeff();
    d.scale = (c.normalize_input && peak > 0.0) ? peak : 1.0;
    const std::size_t index = m.sinograms.size();
    m.sinograms.push_back(d);
    for (const auto& o : patch_offsets(s_in.samples(), s_in.detectors(), c.patches_per_sinogram, c.patch_size,
                                       seeds.derive("patches/" + id)))
      m.patches.push_back({index, o.row, o.col});
  }
  write_manifest(m, c.outdir / "dataset.json");
  return m;
}

inline TrainConfig effective_train_config(const PipelineConfig& c) {
  TrainConfig t = c.train;
  t.seed = stage_seed(c.seed, "train");
  t.snr_mix = c.snr_list;
  return t;
}

inline SrcnModel fresh_model(const PipelineConfig& c) {
  SrcnModel m(stage_seed(c.seed, "init"), {}, c.bn_momentum, c.bn_epsilon);
  m.normalize_input = c.normalize_input;
  return m;
}

// ---------------------------------------------------------------------------
// Full comparison

struct SinogramCheck {
  std::string phantom;
  double snr_db = 0.0;
  double rmse_input = 0.0;     // RMSE(T_IN, S_F)
  double rmse_restored = 0.0;  // RMSE(T_F, S_F)
};

struct PhantomMetrics {
  std::string phantom;
  MetricsReport report;
};

struct PipelineResult {
  MetricsReport summary;  // mean over evaluation phantoms
  std::vector<PhantomMetrics> per_phantom;
  std::vector<SinogramCheck> sinogram_checks;
  std::filesystem::path checkpoint;
  std::optional<TrainingLog> training;
  SeedBook seeds;
};

inline void write_sinogram_checks(const std::vector<SinogramCheck>& checks, const std::filesystem::path& path) {
  std::string text = "phantom,snr_db,rmse_input,rmse_restored\n";
  for (const auto& s : checks)
    text += s.phantom + "," + MetricsReport::format_number(s.snr_db) + "," + MetricsReport::format_number(s.rmse_input) +
            "," + MetricsReport::format_number(s.rmse_restored) + "\n";
  io::write_file(path, std::span<const char>(text.data(), text.size()));
}

inline void write_run_manifest(const PipelineConfig& c, const PipelineResult& r, const std::filesystem::path& path) {
  PipelineConfig copy = c;
  nlohmann::json j;
  j["format"] = "srcnpat-run";
  j["version"] = 1;
  j["master_seed"] = c.seed;
  j["seed_derivation"] = "stage_seed(master, name) = mix(master, fnv1a64(name)); mix(m, i) = splitmix64(m ^ splitmix64(i))";
  nlohmann::json cfg = nlohmann::json::object();
  for (const auto& [k, v] : bind_config(copy).snapshot()) cfg[k] = v;
  j["config"] = cfg;
  nlohmann::json seeds = nlohmann::json::object();
  for (const auto& [k, v] : r.seeds.seeds) seeds[k] = v;
  j["stage_seeds"] = seeds;
  nlohmann::json phantoms = nlohmann::json::array();
  for (const auto& p : r.per_phantom) phantoms.push_back(p.phantom);
  j["eval_phantoms"] = phantoms;
  j["checkpoint"] = r.checkpoint.generic_string();
  j["metrics"] = "metrics.csv";
  const std::string text = j.dump(1) + "\n";
  io::write_file(path, std::span<const char>(text.data(), text.size()));
}

// Trains (or loads) the network, then evaluates each held-out phantom at
// every SNR level with every configured method against the noise-free
// full-ring reconstruction.
inline PipelineResult run_pipeline(const PipelineConfig& c, const Logger& log = {}) {
  c.validate();
  PipelineResult result;
  result.seeds.master = c.seed;
  std::filesystem::create_directories(c.outdir);

  const bool want_srcn = std::find(c.methods.begin(), c.methods.end(), "srcn") != c.methods.end();
  std::optional<SrcnModel> model;
  if (want_srcn) {
    if (!c.checkpoint.empty()) {
      model = run_stage("load-checkpoint", [&] { return load_checkpoint(c.checkpoint).model; });
      result.checkpoint = c.checkpoint;
    } else if (c.train_model && c.train_phantoms > 0) {
      const DatasetManifest manifest = build_dataset(c, result.seeds, log);
      const auto patches = run_stage("dataset", [&] { return load_patches(manifest); });
      model = fresh_model(c);
      TrainConfig t = effective_train_config(c);
      result.seeds.seeds["train"] = t.seed;
      result.seeds.seeds["init"] = stage_seed(c.seed, "init");
      t.log_path = c.outdir / "model" / "train_log.csv";
      t.checkpoint_path = c.outdir / "model" / "srcn.ckpt";
      if (log) log("train: " + std::to_string(patches.size()) + " patch pairs, " + std::to_string(t.epochs) + " epochs");
      result.training = run_stage("train", [&] {
        return train(*model, patches, t, nullptr, [&](const EpochRecord& e) {
          if (log)
            log("train: epoch " + std::to_string(e.epoch) + " loss " + config::format_double(e.train_loss) + " val " +
                config::format_double(e.val_loss));
        });
      });
      save_checkpoint(*model, nullptr, t.checkpoint_path);
      result.checkpoint = t.checkpoint_path;
    } else {
      model = fresh_model(c);
    }
  }

  std::map<std::pair<std::string, double>, std::pair<double, double>> sums;  // (method, snr) -> (rmse, psnr)
  std::map<std::pair<std::string, double>, std::size_t> counts;
  for (std::size_t i = 0; i < c.eval_phantoms; ++i) {
    const std::string kind = c.eval_kinds[i % c.eval_kinds.size()];
    const std::string id = phantom_id("eval", kind, i);
    if (log) log("eval: " + id);
    const auto spec = phantom_spec(c, phantom_kind_from_string(kind), result.seeds.derive("phantom/" + id));
    const PressureField p0 = stage_phantom(c, spec);
    const Sinogram s_f = stage_simulate(c, p0);
    const PressureField reference = stage_reconstruct(c, s_f);
    write_field(p0, artifact_path(c.outdir, id, "clean", "p0", "pafd"));
    write_sinogram(s_f, artifact_path(c.outdir, id, "clean", "sinogram_full", "pasg"));
    write_field(reference, artifact_path(c.outdir, id, "clean", "recon_reference", "pafd"));
    preview(c, p0, artifact_path(c.outdir, id, "clean", "p0", "pafd"));
    preview(c, s_f, artifact_path(c.outdir, id, "clean", "sinogram_full", "pasg"));
    preview(c, reference, artifact_path(c.outdir, id, "clean", "recon_reference", "pafd"));

    PhantomMetrics pm;
    pm.phantom = id;
    pm.report.reference = "time reversal of the noise-free " + std::to_string(c.detector_count) + "-detector sinogram";
    for (double snr : c.snr_list) {
      const auto dir = snr_label(snr);
      auto at = [&](const std::string& stage, const std::string& ext) { return artifact_path(c.outdir, id, dir, stage, ext); };
      const Sinogram s_sparse = stage_degrade(c, s_f, snr, result.seeds.derive("noise/" + id + "/" + dir));
      write_sinogram(s_sparse, at("sinogram_sparse", "pasg"));
      const Sinogram s_in = stage_interp(c, s_sparse);
      write_sinogram(s_in, at("sinogram_nn", "pasg"));
      preview(c, s_in, at("sinogram_nn", "pasg"));
      for (const auto& method : c.methods) {
        Sinogram restored;
        if (method == "direct50") {
          restored = s_sparse;
        } else if (method == "nn") {
          restored = s_in;
        } else if (method == "modwt") {
          restored = stage_modwt_restore(c, s_sparse, s_in);
          write_sinogram(restored, at("sinogram_modwt", "pasg"));
          preview(c, restored, at("sinogram_modwt", "pasg"));
        } else {
          auto rest = run_stage("infer", [&] { return infer_sinogram(*model, s_in); });
          write_sinogram(rest.t_r, at("residual_srcn", "pasg"));
          write_sinogram(rest.t_f, at("sinogram_srcn", "pasg"));
          preview(c, rest.t_f, at("sinogram_srcn", "pasg"));
          result.sinogram_checks.push_back({id, snr, rmse(s_in, s_f), rmse(rest.t_f, s_f)});
          restored = std::move(rest.t_f);
        }
        const PressureField recon = stage_reconstruct(c, restored);
        write_field(recon, at("recon_" + method, "pafd"));
        preview(c, recon, at("recon_" + method, "pafd"));
        const MetricsRow row{method, snr, rmse(reference, recon), psnr(reference, recon)};
        pm.report.add(row);
        auto& s = sums[{method, snr}];
        s.first += row.rmse;
        s.second += row.psnr_db;
        ++counts[{method, snr}];
      }
    }
    pm.report.write_csv(c.outdir / id / "metrics.csv");
    result.per_phantom.push_back(std::move(pm));
  }

  result.summary.reference = "mean over " + std::to_string(c.eval_phantoms) + " evaluation phantoms";
  for (double snr : c.snr_list)
    for (const auto& method : c.methods) {
      const auto key = std::make_pair(method, snr);
      if (!counts.count(key)) continue;
      const double n = static_cast<double>(counts[key]);
      result.summary.add({method, snr, sums[key].first / n, sums[key].second / n});
    }
  result.summary.write_csv(c.outdir / "metrics.csv");
  if (!result.sinogram_checks.empty()) write_sinogram_checks(result.sinogram_checks, c.outdir / "sinogram_rmse.csv");
  write_run_manifest(c, result, c.outdir / "run.json");
  return result;
}

}  // namespace srcnpat
