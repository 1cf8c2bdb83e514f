#include <chrono>
#include <fstream>

#include "seamless/app.hpp"
#include "seamless/audio.hpp"
#include "seamless/error.hpp"
#include "seamless/log.hpp"

namespace fs = std::filesystem;

namespace seamless {

namespace {

void write_json(const fs::path& path, const nlohmann::json& json) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << json.dump(2) << '\n';
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

nlohmann::json checkpoint_meta(const fs::path& path) { return load_checkpoint(path).meta; }

void stamp_manifest(const RunConfig& config, const fs::path& dir) {
  write_json(dir / "run.json", {{"data_hash", data_hash(config)}, {"config_hash", config_hash(config)}});
}

Gst load_matching_gst(const RunConfig& config, const RunPaths& paths) {
  if (!fs::exists(paths.gst_checkpoint)) {
    throw PrerequisiteError("pretrain-gst", "no prosody extractor checkpoint at " + paths.gst_checkpoint.string());
  }
  if (checkpoint_meta(paths.gst_checkpoint).value("gst_hash", "") != gst_hash(config)) {
    throw PrerequisiteError("pretrain-gst", "prosody extractor at " + paths.gst_checkpoint.string() +
                                                " was built from a different corpus or extractor config");
  }
  return load_gst(paths.gst_checkpoint);
}

EditorModel load_matching_model(const RunConfig& config, const RunPaths& paths) {
  if (!fs::exists(paths.model_checkpoint)) {
    throw PrerequisiteError("train", "no model checkpoint at " + paths.model_checkpoint.string());
  }
  if (checkpoint_meta(paths.model_checkpoint).value("config_hash", "") != config_hash(config)) {
    throw PrerequisiteError("train", "model at " + paths.model_checkpoint.string() +
                                         " was trained with a different config");
  }
  return load_model(paths.model_checkpoint);
}

const AlignedUtterance& find_utterance(const CorpusManifest& manifest, const std::string& id) {
  for (const auto& e : manifest.entries) {
    if (e.utterance.id == id) return e;
  }
  throw InvalidArgument("utterance '" + id + "' is not in the prepared corpus");
}

}  // namespace

RunPaths::RunPaths(const RunConfig& config)
    : manifest_dir(config.paths.manifest_dir),
      output_dir(config.paths.output_dir),
      gst_checkpoint(output_dir / "gst.ckpt"),
      model_checkpoint(output_dir / "model.ckpt"),
      train_log(output_dir / "train_log.jsonl"),
      lexicon(config.paths.lexicon.empty() ? fs::path(config.paths.corpus_dir) / "lexicon.txt"
                                           : fs::path(config.paths.lexicon)) {}

CorpusManifest run_prepare(const RunConfig& config) {
  BuildStats stats;
  auto manifest = build_manifest(config.paths.corpus_dir, config.features, &stats);
  if (manifest.entries.empty()) {
    throw InvalidArgument("prepare: no usable utterances under " + config.paths.corpus_dir);
  }
  log::info("prepare: ingested ", stats.ingested, ", skipped ", stats.skipped);
  manifest = split_corpus(std::move(manifest), config.split.ratios, config.split.seed);
  write_manifest(manifest, config.paths.manifest_dir);
  stamp_manifest(config, config.paths.manifest_dir);
  return manifest;
}

CorpusManifest run_synthset(const RunConfig& config) {
  auto manifest = synth_corpus(config.synth.utterances, config.synth.seed, config.features,
                               fs::path(config.paths.corpus_dir));
  manifest = split_corpus(std::move(manifest), config.split.ratios, config.split.seed);
  write_manifest(manifest, config.paths.manifest_dir);
  stamp_manifest(config, config.paths.manifest_dir);
  return manifest;
}

CorpusManifest load_prepared_manifest(const RunConfig& config) {
  const fs::path dir = config.paths.manifest_dir;
  const auto stamp = dir / "run.json";
  if (!fs::exists(stamp)) {
    throw PrerequisiteError("synthset", "no prepared corpus at " + dir.string() + " (or run 'prepare')");
  }
  std::ifstream in(stamp);
  nlohmann::json meta;
  try {
    in >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(stamp.string() + ": " + e.what());
  }
  if (meta.value("data_hash", "") != data_hash(config)) {
    throw PrerequisiteError("synthset", "prepared corpus at " + dir.string() + " was built with a different config");
  }
  return read_manifest(dir);
}

GstPretrainResult run_pretrain_gst(const RunConfig& config) {
  const auto manifest = load_prepared_manifest(config);
  const RunPaths paths(config);
  auto result = pretrain_gst(manifest, config.gst, config.gst_train);
  fs::create_directories(paths.output_dir);
  save_gst(result.gst, paths.gst_checkpoint,
           {{"gst_hash", gst_hash(config)},
            {"config_hash", config_hash(config)},
            {"train_accuracy", result.train_accuracy},
            {"heldout_accuracy", result.heldout_accuracy},
            {"chance", result.chance}});
  return result;
}

TrainSummary run_train(const RunConfig& config, const Trainer::StepCallback& on_step, const TrainerHook& after_step) {
  const auto manifest = load_prepared_manifest(config);
  const RunPaths paths(config);
  const auto items = manifest.subset(Split::Train);
  if (items.empty()) throw InvalidArgument("train: the train split is empty");

  Gst gst{nullptr};
  if (config.train.loss.w_pc > 0.0) gst = load_matching_gst(config, paths);

  std::vector<std::string> extra;
  if (fs::exists(paths.lexicon)) extra = Lexicon::load(paths.lexicon).phoneme_symbols();
  torch::manual_seed(config.train.seed);
  auto model = make_model(config.model, manifest, extra);
  Trainer trainer(model, gst, make_schedule(config.schedule), config.train);

  fs::create_directories(paths.output_dir);
  std::ofstream log_file(paths.train_log);
  if (!log_file) throw IoError("cannot write " + paths.train_log.string());
  const auto hash = config_hash(config);
  const nlohmann::json meta{{"config_hash", hash}, {"gst_hash", gst ? gst_hash(config) : std::string()}};

  TrainSummary summary;
  const auto start = std::chrono::steady_clock::now();
  trainer.fit(items, [&](int step, const LossBreakdown& losses, double lr) {
    summary.last = losses;
    summary.steps = step;
    const int every = std::max(1, config.train.log_every);
    if (step % every == 0 || step == config.train.steps) {
      log_file << nlohmann::json{{"step", step},       {"total", losses.total}, {"rec", losses.rec},
                                 {"ac", losses.ac},     {"pc", losses.pc},       {"duration", losses.duration},
                                 {"pitch", losses.pitch}, {"lr", lr},            {"config_hash", hash}}
                      .dump()
               << '\n';
    }
    if (config.train.checkpoint_every > 0 && step % config.train.checkpoint_every == 0) {
      save_model(model, paths.model_checkpoint, meta);
    }
    if (on_step) on_step(step, losses, lr);
    if (after_step) after_step(step, trainer);
  });
  summary.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  save_model(model, paths.model_checkpoint, meta);
  return summary;
}

EditOutputs run_edit(const RunConfig& config, const std::string& utterance_id, const EditScript& script,
                     const fs::path& out_prefix, std::uint64_t seed) {
  const auto manifest = load_prepared_manifest(config);
  const RunPaths paths(config);
  auto model = load_matching_model(config, paths);
  if (!fs::exists(paths.lexicon)) throw IoError("no pronunciation lexicon at " + paths.lexicon.string());
  const auto lexicon = Lexicon::load(paths.lexicon);
  const auto& original = find_utterance(manifest, utterance_id);

  Rng rng(seed);
  EditOutputs out;
  out.result = edit_utterance(model, original, script, lexicon, make_schedule(config.schedule), rng);
  if (out_prefix.has_parent_path()) fs::create_directories(out_prefix.parent_path());
  out.wav = out_prefix.string() + ".wav";
  out.mel = out_prefix.string() + ".mel.bin";
  out.mask = out_prefix.string() + ".mask.json";

  GriffinLimConfig gl;
  gl.iterations = config.eval.vocoder_iterations;
  write_wav(out.wav, vocode(out.result.mel, config.features, gl), config.features.sample_rate);
  const auto& mel = out.result.mel;
  write_float_array(out.mel, {mel.num_frames(), mel.num_mels()}, mel.values());
  nlohmann::json mapping = nlohmann::json::array();
  for (const auto& s : out.result.plan.source_frame) mapping.push_back(s ? nlohmann::json(*s) : nlohmann::json(nullptr));
  write_json(out.mask, {{"config_hash", config_hash(config)},
                        {"utterance", utterance_id},
                        {"script", to_json(script)},
                        {"text", out.result.plan.edited.utterance.text},
                        {"phonemes", out.result.plan.edited.phonemes},
                        {"durations", out.result.plan.edited.durations},
                        {"mask", to_json(out.result.plan.regions)},
                        {"source_frame", mapping}});
  return out;
}

EvalReport run_evaluate(const RunConfig& config, bool oracle, const std::string& label) {
  const auto manifest = load_prepared_manifest(config);
  const RunPaths paths(config);
  auto items = manifest.subset(split_from_string(config.eval.split));
  if (config.eval.max_utterances > 0 && items.size() > config.eval.max_utterances) {
    items.resize(config.eval.max_utterances);
  }
  if (items.empty()) throw InvalidArgument("evaluate: split '" + config.eval.split + "' is empty");

  EvalConfig eval;
  eval.seed = config.eval.seed;
  eval.mask_rate = config.eval.mask_rate;
  eval.score_audio = config.eval.score_audio;
  eval.vocoder.iterations = config.eval.vocoder_iterations;
  eval.config_hash = config_hash(config);
  eval.protocol_hash = protocol_hash(config);

  std::unique_ptr<RegionGenerator> generator;
  if (oracle) {
    generator = std::make_unique<OracleGenerator>();
  } else {
    ReconstructOptions options;
    options.predicted_pitch = config.eval.predicted_pitch;
    generator = std::make_unique<DiffusionGenerator>(load_matching_model(config, paths),
                                                     make_schedule(config.schedule), options);
  }
  auto report = evaluate_corpus(items, *generator, config.features, eval);
  report.label = label;
  const std::string stem = oracle ? "report_oracle" : "report";
  write_json(paths.output_dir / (stem + ".json"), report.to_json());
  write_text(paths.output_dir / (stem + ".txt"), report.table());
  return report;
}

AblationTable run_ablate(const RunConfig& config, const Trainer::StepCallback& on_step) {
  const RunPaths base(config);
  struct Variant {
    std::string label, slug;
    double w_ac, w_pc;
  };
  const std::vector<Variant> variants{{"full", "full", config.train.loss.w_ac, config.train.loss.w_pc},
                                      {"w/o L_AC", "no_ac", 0.0, config.train.loss.w_pc},
                                      {"w/o L_PC", "no_pc", config.train.loss.w_ac, 0.0}};
  std::vector<EvalReport> rows;
  for (const auto& v : variants) {
    RunConfig variant = config;
    variant.train.loss.w_ac = v.w_ac;
    variant.train.loss.w_pc = v.w_pc;
    variant.paths.output_dir = (base.output_dir / "ablate" / v.slug).string();
    const RunPaths paths(variant);
    fs::create_directories(paths.output_dir);
    if (variant.train.loss.w_pc > 0.0 && !fs::exists(paths.gst_checkpoint)) {
      load_matching_gst(config, base);
      fs::copy_file(base.gst_checkpoint, paths.gst_checkpoint, fs::copy_options::overwrite_existing);
    }
    const bool reuse = fs::exists(paths.model_checkpoint) &&
                       checkpoint_meta(paths.model_checkpoint).value("config_hash", "") == config_hash(variant);
    if (reuse) {
      log::info("ablate: reusing trained model for '", v.label, "'");
    } else {
      log::info("ablate: training '", v.label, "'");
      run_train(variant, on_step);
    }
    rows.push_back(run_evaluate(variant, false, v.label));
  }
  auto table = combine_reports(std::move(rows));
  write_json(base.output_dir / "ablation.json", table.to_json());
  write_text(base.output_dir / "ablation.txt", table.table());
  return table;
}

}  // namespace seamless
