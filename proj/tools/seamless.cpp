#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "seamless/app.hpp"
#include "seamless/error.hpp"
#include "seamless/log.hpp"

namespace fs = std::filesystem;
using namespace seamless;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kPrerequisite = 3;
constexpr int kRuntime = 4;

struct Options {
  std::string config = "configs/default.json";
  std::optional<std::string> output_dir, corpus_dir, manifest_dir;
  std::optional<std::uint64_t> seed;
  bool verbose = false;
  bool quiet = false;
};

RunConfig load(const Options& o) {
  auto config = load_run_config(o.config);
  if (o.output_dir) config.paths.output_dir = *o.output_dir;
  if (o.corpus_dir) config.paths.corpus_dir = *o.corpus_dir;
  if (o.manifest_dir) config.paths.manifest_dir = *o.manifest_dir;
  return config;
}

MelSpectrogram read_mel_sidecar(const fs::path& path, const MelSpectrogram& like) {
  std::vector<std::size_t> shape;
  auto values = read_float_array(path, &shape);
  if (shape.size() != 2) throw FormatError(path.string() + ": expected a [frames, mels] array");
  return MelSpectrogram(shape[0], shape[1], std::move(values), like.hop_length(), like.win_length());
}

MaskSpec read_mask(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return mask_spec_from_json(j.contains("mask") ? j.at("mask") : j);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"seamless: diffusion-based text speech editing"};
  app.require_subcommand(1);
  Options o;
  app.add_option("-c,--config", o.config, "Run config (JSON)")->check(CLI::ExistingFile);
  app.add_option("--output-dir", o.output_dir, "Override paths.output_dir");
  app.add_option("--corpus-dir", o.corpus_dir, "Override paths.corpus_dir");
  app.add_option("--manifest-dir", o.manifest_dir, "Override paths.manifest_dir");
  app.add_flag("-v,--verbose", o.verbose, "Debug logging");
  app.add_flag("-q,--quiet", o.quiet, "Warnings and errors only");

  auto* prepare = app.add_subcommand("prepare", "Ingest WAV + alignment corpus into a manifest");
  auto* synthset = app.add_subcommand("synthset", "Generate the synthetic corpus and its manifest");
  auto* pretrain = app.add_subcommand("pretrain-gst", "Pretrain and freeze the prosody extractor");
  auto* train = app.add_subcommand("train", "Train the editing model");
  auto* edit = app.add_subcommand("edit", "Apply an edit script to one utterance");
  auto* evaluate = app.add_subcommand("evaluate", "Masked-region evaluation report");
  auto* ablate = app.add_subcommand("ablate", "Train and evaluate full / w/o L_AC / w/o L_PC");
  auto* plot = app.add_subcommand("plot", "Write a spectrogram PNG with mask regions outlined");

  std::string utterance, script_path, out_path, edit_prefix, mask_path;
  bool oracle = false;
  edit->add_option("-u,--utterance", utterance, "Utterance id")->required();
  edit->add_option("-s,--script", script_path, "Edit script JSON")->required()->check(CLI::ExistingFile);
  edit->add_option("-o,--out", out_path, "Output prefix (.wav, .mel.bin, .mask.json)")->required();
  edit->add_option("--seed", o.seed, "Sampling seed");
  evaluate->add_option("--seed", o.seed, "Override eval.seed");
  evaluate->add_flag("--oracle", oracle, "Score a generator that returns ground truth");
  plot->add_option("-u,--utterance", utterance, "Utterance id")->required();
  plot->add_option("--edit", edit_prefix, "Prefix written by 'edit'; plots original and edited mels");
  plot->add_option("--mask", mask_path, "MaskSpec JSON to outline on the original");
  plot->add_option("-o,--out", out_path, "PNG path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kConfigError;
  }
  if (o.verbose) log::set_threshold(log::Level::Debug);
  if (o.quiet) log::set_threshold(log::Level::Warn);

  try {
    auto config = load(o);
    if (prepare->parsed()) {
      const auto m = run_prepare(config);
      std::cout << "prepared " << m.entries.size() << " utterances (train " << m.count(Split::Train) << ", valid "
                << m.count(Split::Valid) << ", test " << m.count(Split::Test) << ")\n";
    } else if (synthset->parsed()) {
      const auto m = run_synthset(config);
      std::cout << "synthesised " << m.entries.size() << " utterances into " << config.paths.corpus_dir << "\n";
    } else if (pretrain->parsed()) {
      const auto r = run_pretrain_gst(config);
      std::cout << "prosody extractor: train acc " << r.train_accuracy << ", held-out acc " << r.heldout_accuracy
                << " on " << r.heldout_items << " items (chance " << r.chance << ")\n";
    } else if (train->parsed()) {
      const int every = std::max(1, config.train.steps / 20);
      const auto s = run_train(config, [&](int step, const LossBreakdown& l, double lr) {
        if (step % every == 0) {
          log::info("step ", step, " total ", l.total, " rec ", l.rec, " ac ", l.ac, " pc ", l.pc, " lr ", lr);
        }
      });
      std::cout << "trained " << s.steps << " steps in " << s.seconds << " s; final total " << s.last.total << "\n";
    } else if (edit->parsed()) {
      const auto out = run_edit(config, utterance, load_edit_script(script_path), out_path, o.seed.value_or(0));
      std::cout << "edited '" << utterance << "': " << out.result.plan.edited.utterance.text << "\n"
                << "  " << out.result.plan.regions.regions.size() << " region(s), " << out.result.mel.num_frames()
                << " frames -> " << out.wav.string() << "\n";
    } else if (evaluate->parsed()) {
      if (o.seed) config.eval.seed = *o.seed;
      const auto report = run_evaluate(config, oracle, oracle ? "oracle" : "full");
      std::cout << report.table();
    } else if (ablate->parsed()) {
      std::cout << run_ablate(config).table();
    } else if (plot->parsed()) {
      const auto manifest = load_prepared_manifest(config);
      const AlignedUtterance* item = nullptr;
      for (const auto& e : manifest.entries) {
        if (e.utterance.id == utterance) item = &e;
      }
      if (!item) throw InvalidArgument("utterance '" + utterance + "' is not in the prepared corpus");
      std::vector<MelSpectrogram> panels{item->mel};
      std::vector<MaskSpec> masks;
      if (!mask_path.empty()) masks.push_back(read_mask(mask_path));
      if (!edit_prefix.empty()) {
        if (masks.empty()) masks.emplace_back();
        panels.push_back(read_mel_sidecar(edit_prefix + ".mel.bin", item->mel));
        masks.push_back(read_mask(edit_prefix + ".mask.json"));
      }
      write_spectrogram_png(out_path, panels, masks);
      std::cout << "wrote " << out_path << "\n";
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const PrerequisiteError& e) {
    std::cerr << "missing prerequisite: " << e.what() << "\n";
    return kPrerequisite;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kOk;
}
