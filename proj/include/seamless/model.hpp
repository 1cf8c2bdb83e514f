#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "seamless/checkpoint.hpp"
#include "seamless/corpus.hpp"
#include "seamless/json_io.hpp"
#include "seamless/masking.hpp"
#include "seamless/rng.hpp"

namespace seamless {

struct ModelConfig {
  int num_mels = 80;
  int d_model = 256;
  int encoder_layers = 4;
  int encoder_heads = 2;
  int encoder_ffn_dim = 1024;
  int encoder_kernel = 9;
  int predictor_channels = 256;
  int predictor_kernel = 3;
  int denoiser_channels = 256;
  int denoiser_layers = 20;
  int denoiser_dilation_cycle = 4;
  int pitch_bins = 256;
  double pitch_fmin = 50.0;
  double pitch_fmax = 800.0;
  double dropout = 0.1;
  int diffusion_steps = 8;

  bool operator==(const ModelConfig&) const = default;
};

nlohmann::json to_json(const ModelConfig& config);
void read_model_config(JsonReader& reader, ModelConfig& config);

// Phoneme symbol table. Index 0 is reserved for padding.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> symbols);

  std::int64_t index(const std::string& symbol) const;  // VocabularyError if unknown
  bool contains(const std::string& symbol) const { return lookup_.count(symbol) != 0; }
  std::size_t size() const { return symbols_.size() + 1; }
  const std::vector<std::string>& symbols() const { return symbols_; }

 private:
  std::vector<std::string> symbols_;
  std::map<std::string, std::int64_t> lookup_;
};

// Corpus statistics the model needs at inference: mel normalisation, log-F0
// normalisation and per-phoneme mean durations (fallback duration source).
struct ModelStats {
  std::vector<float> mel_mean;
  std::vector<float> mel_std;
  float logf0_mean = 5.3f;
  float logf0_std = 0.3f;
  std::map<std::string, double> mean_duration;
  double global_mean_duration = 8.0;
};

ModelStats compute_model_stats(const std::vector<const AlignedUtterance*>& items);
nlohmann::json to_json(const ModelStats& stats);
ModelStats model_stats_from_json(const nlohmann::json& json);

// F0 to embedding index: 0 for unvoiced, 1..bins for log-spaced voiced bins.
torch::Tensor quantize_pitch(const torch::Tensor& f0_hz, int bins, double fmin, double fmax);

// Repeats row i of `encoding` ([P, d]) durations[i] times.
torch::Tensor length_regulate(const torch::Tensor& encoding, const std::vector<int>& durations);
// Batched form: [B, P, d] with [B, P] int64 durations, padded to num_frames rows.
torch::Tensor length_regulate(const torch::Tensor& encoding, const torch::Tensor& durations,
                              std::int64_t num_frames);

// Padded batch of aligned utterances plus their mask specs.
struct Batch {
  torch::Tensor phonemes;     // [B, P] int64, 0 = pad
  torch::Tensor phone_mask;   // [B, P] bool, true for real phonemes
  torch::Tensor durations;    // [B, P] int64
  torch::Tensor mel;          // [B, F, M] log-mel, zero padded
  torch::Tensor frame_mask;   // [B, F] bool
  torch::Tensor pitch;        // [B, F] Hz
  torch::Tensor speakers;     // [B] int64
  torch::Tensor region_mask;  // [B, F] bool, true inside mask regions
  torch::Tensor masked_phones;  // [B, P] bool, phoneme lies in a region
  std::vector<const AlignedUtterance*> items;
  std::vector<MaskSpec> specs;

  std::int64_t size() const { return phonemes.size(0); }
};

class EditorModelImpl;

Batch make_batch(const std::vector<const AlignedUtterance*>& items, const std::vector<MaskSpec>& specs,
                 const EditorModelImpl& model);

// Conditioning inputs of the denoiser for one batch.
struct ConditionBundle {
  torch::Tensor frame_linguistic;   // [B, F, d]
  torch::Tensor reference_mel;      // [B, F, M]
  torch::Tensor masked_mel;         // [B, F, M], unit Gaussian inside regions
  torch::Tensor speaker_embedding;  // [B, d]
  torch::Tensor pitch_embedding;    // [B, F, d]
  torch::Tensor frame_mask;         // [B, F]
  torch::Tensor region_mask;        // [B, F]
  torch::Tensor phoneme_encoding;   // [B, P, d]
  torch::Tensor projected;          // [B, F, d], what the denoiser blocks consume

  std::int64_t num_frames() const { return frame_linguistic.size(1); }
};

struct TextEncoderImpl : torch::nn::Module {
  TextEncoderImpl(const ModelConfig& config, std::int64_t vocab_size);
  torch::Tensor forward(const torch::Tensor& phonemes, const torch::Tensor& phone_mask);

  std::int64_t d_model;
  torch::nn::Embedding embedding{nullptr};
  torch::nn::Dropout dropout{nullptr};
  std::vector<torch::nn::MultiheadAttention> attention;
  std::vector<torch::nn::LayerNorm> norm1, norm2;
  std::vector<torch::nn::Conv1d> ffn1, ffn2;
};
TORCH_MODULE(TextEncoder);

// Two convolution layers followed by a per-position linear head.
struct ConvPredictorImpl : torch::nn::Module {
  ConvPredictorImpl(std::int64_t in_channels, std::int64_t channels, std::int64_t kernel,
                    std::int64_t outputs, double dropout);
  // x: [B, L, in]; mask: [B, L]. Returns [B, L, outputs].
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& mask);

  torch::nn::Conv1d conv1{nullptr}, conv2{nullptr};
  torch::nn::LayerNorm norm1{nullptr}, norm2{nullptr};
  torch::nn::Dropout dropout{nullptr};
  torch::nn::Linear head{nullptr};
};
TORCH_MODULE(ConvPredictor);

// Residual stack of gated dilated convolutions with a diffusion-step
// embedding and a condition projection added in every block.
struct DenoiserImpl : torch::nn::Module {
  DenoiserImpl(const ModelConfig& config);
  // y_t: [B, F, M] normalised mel, t: [B] int64, cond: [B, F, d], mask: [B, F].
  torch::Tensor forward(const torch::Tensor& y_t, const torch::Tensor& t, const torch::Tensor& cond,
                        const torch::Tensor& frame_mask);

  std::int64_t channels;
  torch::nn::Conv1d input{nullptr};
  torch::nn::Linear step_mlp1{nullptr}, step_mlp2{nullptr};
  std::vector<torch::nn::Linear> step_proj;
  std::vector<torch::nn::Conv1d> dilated, cond_proj, out_proj;
  torch::nn::Conv1d skip_proj{nullptr}, output{nullptr};
};
TORCH_MODULE(Denoiser);

class EditorModelImpl : public torch::nn::Module {
 public:
  EditorModelImpl(ModelConfig config, Vocabulary vocabulary, std::vector<std::string> speakers,
                  ModelStats stats);

  const ModelConfig& config() const { return config_; }
  const Vocabulary& vocabulary() const { return vocabulary_; }
  const std::vector<std::string>& speakers() const { return speakers_; }
  const ModelStats& stats() const { return stats_; }
  std::int64_t speaker_index(const std::string& speaker_id) const;

  bool trained() const { return trained_; }
  void set_trained(bool value) { trained_ = value; }
  std::int64_t steps() const { return steps_; }
  void set_steps(std::int64_t value) { steps_ = value; }

  torch::Tensor normalize_mel(const torch::Tensor& mel) const;    // [..., M]
  torch::Tensor denormalize_mel(const torch::Tensor& mel) const;

  // [B, P] ids -> [B, P, d]
  torch::Tensor encode_text(const torch::Tensor& phonemes, const torch::Tensor& phone_mask);
  // Log-domain duration prediction [B, P].
  torch::Tensor duration_log(const torch::Tensor& encoding, const torch::Tensor& speaker_embedding,
                             const torch::Tensor& phone_mask);
  // Normalised log-F0 and voicing logit, [B, F, 2]. Context pitch is hidden inside regions.
  torch::Tensor pitch_outputs(const torch::Tensor& frame_linguistic, const torch::Tensor& speaker_embedding,
                              const torch::Tensor& context_pitch, const torch::Tensor& region_mask,
                              const torch::Tensor& frame_mask);
  // Turns pitch_outputs into Hz (0 = unvoiced).
  torch::Tensor pitch_from_outputs(const torch::Tensor& outputs) const;
  torch::Tensor speaker_embedding(const torch::Tensor& speakers);

  // masked_mel is drawn from `rng` inside regions. `pitch` ([B, F] Hz) feeds the pitch embedding.
  ConditionBundle build_condition(const Batch& batch, const torch::Tensor& pitch, Rng& rng);
  // Predicted normalised Y0, [B, F, M].
  torch::Tensor denoise(const torch::Tensor& y_t_norm, const torch::Tensor& t, const ConditionBundle& cond);

  Checkpoint to_checkpoint(const nlohmann::json& extra_meta = {}) const;
  static std::shared_ptr<EditorModelImpl> from_checkpoint(const Checkpoint& checkpoint);

 private:
  ModelConfig config_;
  Vocabulary vocabulary_;
  std::vector<std::string> speakers_;
  ModelStats stats_;
  bool trained_ = false;
  std::int64_t steps_ = 0;

  TextEncoder encoder_{nullptr};
  torch::nn::Embedding speaker_table_{nullptr};
  torch::nn::Embedding pitch_table_{nullptr};
  ConvPredictor duration_predictor_{nullptr};
  torch::nn::Linear pitch_context_{nullptr};
  ConvPredictor pitch_predictor_{nullptr};
  torch::nn::Linear condition_proj_{nullptr};
  Denoiser denoiser_{nullptr};
  torch::Tensor mel_mean_, mel_std_;
};
TORCH_MODULE(EditorModel);

// Builds a fresh model whose vocabulary covers the manifest and any extra symbols.
EditorModel make_model(const ModelConfig& config, const CorpusManifest& manifest,
                       const std::vector<std::string>& extra_symbols = {});

void save_model(const EditorModel& model, const std::filesystem::path& path,
                const nlohmann::json& extra_meta = {});
EditorModel load_model(const std::filesystem::path& path);

// Single-utterance conveniences.
torch::Tensor encode_text(EditorModel& model, const std::vector<std::string>& phonemes);
// Per-phoneme frame counts, all >= 1. Throws UntrainedError on an untrained model.
std::vector<int> predict_durations(EditorModel& model, const std::vector<std::string>& phonemes,
                                   int speaker_index);
// Context frames keep `context_pitch`; frames inside regions get predictions.
std::vector<float> predict_pitch(EditorModel& model, const AlignedUtterance& utterance,
                                 const MaskSpec& spec);

}  // namespace seamless
