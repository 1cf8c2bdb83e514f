#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "seamless/corpus.hpp"
#include "seamless/diffusion.hpp"
#include "seamless/editor.hpp"
#include "seamless/fluency.hpp"
#include "seamless/metrics.hpp"
#include "seamless/model.hpp"
#include "seamless/training.hpp"

namespace seamless {

struct PathsConfig {
  std::string corpus_dir = "data/corpus";
  std::string manifest_dir = "data/manifest";
  std::string output_dir = "runs/default";
  // Pronunciation lexicon; empty means <corpus_dir>/lexicon.txt.
  std::string lexicon;
};

struct SynthConfig {
  std::size_t utterances = 200;
  std::uint64_t seed = 7;
};

struct SplitConfig {
  SplitRatios ratios;
  std::uint64_t seed = 11;
};

struct ScheduleConfig {
  int steps = 8;
  double beta_min = 1e-4;
  double beta_max = 0.7;
};

struct EvalSection {
  std::string split = "test";
  std::uint64_t seed = 7;
  double mask_rate = 0.8;
  std::size_t max_utterances = 0;  // 0 = all
  bool score_audio = true;
  int vocoder_iterations = 32;
  bool predicted_pitch = true;
};

// Everything a multi-phase run needs, loaded from one JSON file. Unknown keys
// are rejected with the dotted key path.
struct RunConfig {
  PathsConfig paths;
  FeatureConfig features;
  SynthConfig synth;
  SplitConfig split;
  ModelConfig model;
  ScheduleConfig schedule;
  TrainConfig train;
  GstConfig gst;
  GstTrainConfig gst_train;
  EvalSection eval;
};

RunConfig run_config_from_json(const nlohmann::json& json);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& config);

std::string sha256_hex(std::string_view data);
// Hash of every setting that shapes trained artifacts (all but paths and eval).
std::string config_hash(const RunConfig& config);
// Hash of the inputs that determine the prepared corpus.
std::string data_hash(const RunConfig& config);
// Data plus extractor settings: decides whether a GST checkpoint is reusable.
std::string gst_hash(const RunConfig& config);
// Data plus schedule and evaluation settings: reports sharing it are comparable.
std::string protocol_hash(const RunConfig& config);

NoiseSchedule make_schedule(const ScheduleConfig& config);

// Writes a PNG with one panel per spectrogram stacked vertically, low bands at
// the bottom; each panel's mask regions are outlined. `masks` may be shorter
// than `panels`.
void write_spectrogram_png(const std::filesystem::path& path, const std::vector<MelSpectrogram>& panels,
                           const std::vector<MaskSpec>& masks = {}, int frame_px = 2, int band_px = 3);

// Phase runners shared by the CLI and the Python module. Artifacts live under
// paths.output_dir and embed the relevant hashes.
struct RunPaths {
  std::filesystem::path manifest_dir, output_dir, gst_checkpoint, model_checkpoint, train_log, lexicon;
  explicit RunPaths(const RunConfig& config);
};

CorpusManifest run_prepare(const RunConfig& config);
CorpusManifest run_synthset(const RunConfig& config);
// Throws PrerequisiteError("synthset") when no manifest exists for the config.
CorpusManifest load_prepared_manifest(const RunConfig& config);
GstPretrainResult run_pretrain_gst(const RunConfig& config);

struct TrainSummary {
  int steps = 0;
  LossBreakdown last;
  double seconds = 0.0;
};
// Throws PrerequisiteError("pretrain-gst") when w_pc > 0 and no matching GST checkpoint exists.
// `after_step` sees the live trainer after each update, e.g. for probes.
using TrainerHook = std::function<void(int step, Trainer& trainer)>;
TrainSummary run_train(const RunConfig& config, const Trainer::StepCallback& on_step = {},
                       const TrainerHook& after_step = {});

struct EditOutputs {
  EditResult result;
  std::filesystem::path wav, mel, mask;
};
EditOutputs run_edit(const RunConfig& config, const std::string& utterance_id, const EditScript& script,
                     const std::filesystem::path& out_prefix, std::uint64_t seed);

EvalReport run_evaluate(const RunConfig& config, bool oracle = false, const std::string& label = "full");
// Trains (or reuses) and evaluates the full model and the two ablations.
AblationTable run_ablate(const RunConfig& config, const Trainer::StepCallback& on_step = {});

}  // namespace seamless
