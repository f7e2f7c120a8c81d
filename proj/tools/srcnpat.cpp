// srcnpat: command-line driver. Each subcommand wraps one library operation;
// `pipeline` runs the whole comparison. Failures print a single line
//   error: command=<cmd> stage=<stage> kind=<kind> key=<key> message="<text>"
// and exit nonzero (2 usage/config, 3 io/format, 1 anything else).

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "srcnpat/pipeline.hpp"

using namespace srcnpat;

namespace {

struct Options {
  std::string config_file;
  std::vector<std::string> assignments;
  bool explain = false;

  std::string in, out, reference, recon, manifest, checkpoint, resume, residual, csv, method, kind;
  std::optional<double> snr, threshold, lr;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> factor, detectors, levels, phantoms, patches, epochs;
  std::optional<std::string> wavelet;
};

std::string quote(const std::string& s) {
  std::string q = "\"";
  for (char ch : s) {
    if (ch == '"' || ch == '\\') q += '\\';
    q += (ch == '\n') ? ' ' : ch;
  }
  return q + "\"";
}

int report(const std::string& command, const std::string& stage, const std::string& kind, const std::string& key,
           const std::string& message, int code) {
  std::cerr << "error: command=" << command << " stage=" << stage << " kind=" << kind << " key=" << (key.empty() ? "-" : key)
            << " message=" << quote(message) << "\n";
  return code;
}

int exit_code(const std::string& kind) {
  if (kind == "config" || kind == "usage") return 2;
  if (kind == "io" || kind == "format") return 3;
  return 1;
}

void log_line(const std::string& s) { std::cerr << "[srcnpat] " << s << "\n"; }

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw ConfigError(flag, std::string("missing required option ") + flag);
}

// Folds subcommand flags into the config as if given with --set.
void apply_flags(const Options& o, config::Registry& reg) {
  auto put = [&](const char* key, const auto& v) {
    if (v) {
      if constexpr (std::is_same_v<std::decay_t<decltype(*v)>, std::string>)
        reg.set(key, *v);
      else if constexpr (std::is_floating_point_v<std::decay_t<decltype(*v)>>)
        reg.set(key, config::format_double(*v));
      else
        reg.set(key, std::to_string(*v));
    }
  };
  put("degrade.factor", o.factor);
  put("wavelet.levels", o.levels);
  put("wavelet.id", o.wavelet);
  put("dataset.phantoms", o.phantoms);
  put("dataset.patches", o.patches);
  put("train.epochs", o.epochs);
  put("train.lr", o.lr);
}

void print_row(const MetricsRow& r) { std::cout << MetricsReport::format_row(r) << "\n"; }

int run(const std::string& cmd, Options& o, PipelineConfig& c, SeedBook& seeds) {
  if (cmd == "phantom") {
    require(o.out, "--out");
    const auto kind = phantom_kind_from_string(o.kind.empty() ? "disk" : o.kind);
    const std::uint64_t s = o.seed ? *o.seed : seeds.derive("phantom/cli");
    const auto p0 = stage_phantom(c, phantom_spec(c, kind, s));
    write_field(p0, o.out);
    preview(c, p0, o.out);
  } else if (cmd == "simulate") {
    require(o.in, "--in");
    require(o.out, "--out");
    const auto s = stage_simulate(c, read_field(o.in));
    write_sinogram(s, o.out);
    preview(c, s, o.out);
  } else if (cmd == "degrade") {
    require(o.in, "--in");
    require(o.out, "--out");
    const double snr = o.snr ? *o.snr : c.snr_list.front();
    const std::uint64_t s = o.seed ? *o.seed : seeds.derive("noise/cli/" + snr_label(snr));
    write_sinogram(stage_degrade(c, read_sinogram(o.in), snr, s), o.out);
  } else if (cmd == "interp") {
    require(o.in, "--in");
    require(o.out, "--out");
    const std::size_t target = o.detectors ? *o.detectors : c.detector_count;
    write_sinogram(run_stage("interp", [&] { return nn_interpolate(read_sinogram(o.in), target); }), o.out);
  } else if (cmd == "wavelet") {
    require(o.in, "--in");
    require(o.out, "--out");
    auto opt = c.wavelet_options();
    if (o.threshold) opt.threshold = *o.threshold;
    write_sinogram(run_stage("wavelet", [&] { return denoise_sinogram(read_sinogram(o.in), opt); }), o.out);
  } else if (cmd == "dataset") {
    const auto m = build_dataset(c, seeds, log_line);
    std::cout << (c.outdir / "dataset.json").string() << " " << m.patches.size() << " patch pairs from " << m.sinograms.size()
              << " sinograms\n";
  } else if (cmd == "train") {
    require(o.manifest, "--manifest");
    const auto manifest = run_stage("dataset", [&] { return read_manifest(o.manifest); });
    const auto patches = run_stage("dataset", [&] { return load_patches(manifest); });
    const std::filesystem::path out = o.out.empty() ? c.outdir / "model" / "srcn.ckpt" : std::filesystem::path(o.out);
    std::optional<Checkpoint> start;
    if (!o.resume.empty()) start = run_stage("load-checkpoint", [&] { return load_checkpoint(o.resume); });
    SrcnModel model = start ? start->model : fresh_model(c);
    nn::AdamState opt = (start && start->adam) ? *start->adam : nn::AdamState{};
    TrainConfig t = effective_train_config(c);
    t.log_path = std::filesystem::path(out).replace_extension(".log.csv");
    if (t.checkpoint_every > 0) t.checkpoint_path = out;
    if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
    run_stage("train", [&] {
      return train(model, patches, t, &opt, [](const EpochRecord& e) {
        log_line("epoch " + std::to_string(e.epoch) + " train " + config::format_double(e.train_loss) + " val " +
                 config::format_double(e.val_loss));
      });
    });
    save_checkpoint(model, &opt, out);
    std::cout << out.string() << "\n";
  } else if (cmd == "infer") {
    require(o.checkpoint, "--checkpoint");
    require(o.in, "--in");
    require(o.out, "--out");
    auto model = run_stage("load-checkpoint", [&] { return load_checkpoint(o.checkpoint).model; });
    const auto r = run_stage("infer", [&] { return infer_sinogram(model, read_sinogram(o.in)); });
    write_sinogram(r.t_f, o.out);
    if (!o.residual.empty()) write_sinogram(r.t_r, o.residual);
  } else if (cmd == "reconstruct") {
    require(o.in, "--in");
    require(o.out, "--out");
    const auto f = stage_reconstruct(c, read_sinogram(o.in));
    write_field(f, o.out);
    preview(c, f, o.out);
  } else if (cmd == "eval") {
    require(o.method, "--method");
    require(o.reference, "--reference");
    require(o.recon, "--recon");
    const auto ref = read_field(o.reference), rec = read_field(o.recon);
    const MetricsRow row{o.method, o.snr ? *o.snr : c.snr_list.front(), rmse(ref, rec), psnr(ref, rec)};
    append_metrics_row(o.csv.empty() ? c.outdir / "metrics.csv" : std::filesystem::path(o.csv), row);
    print_row(row);
  } else if (cmd == "pipeline") {
    const auto r = run_pipeline(c, log_line);
    std::cout << r.summary.to_csv();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse-view photoacoustic sinogram restoration experiments"};
  app.require_subcommand(0, 1);
  app.fallthrough();
  Options o;
  app.add_option("--config", o.config_file, "key = value configuration file");
  app.add_option("--set", o.assignments, "override one config key (key=value); repeatable")->take_all();
  app.add_flag("--explain", o.explain, "print the resolved configuration and exit");

  auto io_opts = [&](CLI::App* s) {
    s->add_option("--in", o.in, "input file");
    s->add_option("--out", o.out, "output file");
  };
  auto* phantom = app.add_subcommand("phantom", "write an initial pressure field");
  phantom->add_option("--kind", o.kind, "disk, derenzo, vessel or image");
  phantom->add_option("--seed", o.seed, "phantom seed");
  phantom->add_option("--out", o.out, "output .pafd");
  auto* simulate = app.add_subcommand("simulate", "forward-simulate a sinogram");
  io_opts(simulate);
  auto* degrade = app.add_subcommand("degrade", "subsample detectors and add noise");
  io_opts(degrade);
  degrade->add_option("--snr", o.snr, "SNR in dB");
  degrade->add_option("--factor", o.factor, "detector subsampling factor");
  degrade->add_option("--seed", o.seed, "noise seed");
  auto* interp = app.add_subcommand("interp", "nearest-neighbour detector interpolation");
  io_opts(interp);
  interp->add_option("--detectors", o.detectors, "output detector count");
  auto* wavelet = app.add_subcommand("wavelet", "MODWT denoising of each detector column");
  io_opts(wavelet);
  wavelet->add_option("--wavelet", o.wavelet, "wavelet id (sym4, haar)");
  wavelet->add_option("--levels", o.levels, "decomposition depth");
  wavelet->add_option("--threshold", o.threshold, "fixed threshold instead of the universal one");
  auto* dataset = app.add_subcommand("dataset", "simulate training phantoms and cut patch pairs");
  dataset->add_option("--phantoms", o.phantoms, "number of training phantoms");
  dataset->add_option("--patches", o.patches, "patches per sinogram");
  auto* trainc = app.add_subcommand("train", "train the network on a dataset manifest");
  trainc->add_option("--manifest", o.manifest, "dataset.json");
  trainc->add_option("--out", o.out, "checkpoint to write");
  trainc->add_option("--resume", o.resume, "checkpoint to continue from");
  trainc->add_option("--epochs", o.epochs, "epochs");
  trainc->add_option("--lr", o.lr, "learning rate");
  auto* infer = app.add_subcommand("infer", "restore an interpolated sinogram with a checkpoint");
  io_opts(infer);
  infer->add_option("--checkpoint", o.checkpoint, "model checkpoint");
  infer->add_option("--residual", o.residual, "also write the predicted residual");
  auto* recon = app.add_subcommand("reconstruct", "time-reversal reconstruction");
  io_opts(recon);
  auto* eval = app.add_subcommand("eval", "append one metrics row");
  eval->add_option("--method", o.method, "method id");
  eval->add_option("--snr", o.snr, "SNR label in dB");
  eval->add_option("--reference", o.reference, "reference .pafd");
  eval->add_option("--recon", o.recon, "reconstruction .pafd");
  eval->add_option("--csv", o.csv, "metrics CSV (default {outdir}/metrics.csv)");
  app.add_subcommand("pipeline", "run the full comparison");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report("-", "cli", "usage", "-", e.what(), 2);
  }

  const std::string cmd = app.get_subcommands().empty() ? "-" : app.get_subcommands().front()->get_name();
  try {
    PipelineConfig c;
    auto reg = bind_config(c);
    if (!o.config_file.empty()) reg.load_file(o.config_file);
    for (const auto& a : o.assignments) reg.set_assignment(a);
    apply_flags(o, reg);
    if (o.explain) {
      std::cout << reg.dump(true);
      return 0;
    }
    if (cmd == "-") {
      std::cerr << app.help();
      return 2;
    }
    c.validate();
    SeedBook seeds{c.seed, {}};
    return run(cmd, o, c, seeds);
  } catch (const StageError& e) {
    return report(cmd, e.stage(), e.inner_kind(), "", e.what(), exit_code(e.inner_kind()));
  } catch (const ConfigError& e) {
    return report(cmd, "config", e.kind(), e.key(), e.what(), 2);
  } catch (const Error& e) {
    return report(cmd, cmd, e.kind(), "", e.what(), exit_code(e.kind()));
  } catch (const std::exception& e) {
    return report(cmd, cmd, "internal", "", e.what(), 1);
  }
}
