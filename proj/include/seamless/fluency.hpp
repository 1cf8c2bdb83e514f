#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "seamless/checkpoint.hpp"
#include "seamless/corpus.hpp"
#include "seamless/json_io.hpp"
#include "seamless/masking.hpp"
#include "seamless/mel.hpp"
#include "seamless/rng.hpp"

namespace seamless {

// Scalar summary of one frame used to measure boundary jumps. Variance is
// the default; AdjacentEuclidean replaces the variance difference with the
// distance between the two neighbouring frame vectors.
enum class SmoothnessStatistic { Variance, AdjacentEuclidean };
SmoothnessStatistic smoothness_from_string(const std::string& name);
const char* to_string(SmoothnessStatistic statistic);

// Population variance across mel bands.
double frame_variance(std::span<const float> frame);
// Over the last axis: [..., M] -> [...].
torch::Tensor frame_variance(const torch::Tensor& frames);

struct BoundaryStats {
  double delta_left = 0.0;
  double delta_right = 0.0;
  bool left_present = false;
  bool right_present = false;
};

BoundaryStats boundary_deltas(const MelSpectrogram& mel, const MaskRegion& region,
                              SmoothnessStatistic statistic = SmoothnessStatistic::Variance);

// pred_region: [L, M] frames for `region`; gt_mel: [F, M] ground truth.
// Squared error of left and right boundary deltas, where predicted deltas pair
// the predicted edge frame with the ground-truth neighbour. Absent sides add 0.
torch::Tensor acoustic_consistency_loss(const torch::Tensor& pred_region, const torch::Tensor& gt_mel,
                                        const MaskRegion& region,
                                        SmoothnessStatistic statistic = SmoothnessStatistic::Variance);
// Sum over the regions of `spec`; pred_regions is parallel to spec.regions.
torch::Tensor acoustic_consistency_loss(const std::vector<torch::Tensor>& pred_regions, const torch::Tensor& gt_mel,
                                        const MaskSpec& spec,
                                        SmoothnessStatistic statistic = SmoothnessStatistic::Variance);

torch::Tensor mae_loss(const torch::Tensor& pred, const torch::Tensor& gt);

struct SsimOptions {
  int window = 8;
  double c1 = 0.01 * 0.01;
  double c2 = 0.03 * 0.03;
};
// Both inputs are scaled by (x - lo) / (hi - lo); lo/hi default to gt's range.
// Uniform window clamped to the input size, stride 1, result clamped to [0, 1].
torch::Tensor ssim(const torch::Tensor& pred, const torch::Tensor& gt, std::optional<double> lo = std::nullopt,
                   std::optional<double> hi = std::nullopt, const SsimOptions& options = {});
// MAE + (1 - SSIM).
torch::Tensor reconstruction_loss(const torch::Tensor& pred, const torch::Tensor& gt,
                                  std::optional<double> lo = std::nullopt, std::optional<double> hi = std::nullopt,
                                  const SsimOptions& options = {});

struct GstConfig {
  int num_mels = 80;
  std::vector<int> conv_channels{32, 32, 64, 64, 128, 128};
  int gru_units = 128;
  int num_tokens = 10;
  int num_heads = 4;
  int embedding_dim = 256;

  bool operator==(const GstConfig&) const = default;
};
nlohmann::json to_json(const GstConfig& config);
void read_gst_config(JsonReader& reader, GstConfig& config);

// Reference encoder (strided 2-D convolutions + GRU summary) followed by
// multi-head attention over learned style tokens.
class GstImpl : public torch::nn::Module {
 public:
  explicit GstImpl(GstConfig config);

  const GstConfig& config() const { return config_; }
  // mel: [B, F, M]; lengths: [B] valid frame counts. Returns [B, embedding_dim].
  torch::Tensor forward(const torch::Tensor& mel, const torch::Tensor& lengths);

  bool trained() const { return trained_; }
  void set_trained(bool value) { trained_ = value; }
  bool frozen() const { return frozen_; }
  // Disables gradients on every parameter and switches to eval mode.
  void freeze();
  // Per-band input normalisation, stored with the weights.
  void set_normalization(const torch::Tensor& mean, const torch::Tensor& stddev);

  Checkpoint to_checkpoint(const nlohmann::json& extra_meta = {}) const;
  static std::shared_ptr<GstImpl> from_checkpoint(const Checkpoint& checkpoint);

 private:
  GstConfig config_;
  bool trained_ = false;
  bool frozen_ = false;
  std::vector<torch::nn::Conv2d> convs_;
  torch::nn::GRU gru_{nullptr};
  torch::Tensor tokens_;
  torch::nn::Linear query_{nullptr}, key_{nullptr}, value_{nullptr};
  torch::Tensor mel_mean_, mel_std_;
};
TORCH_MODULE(Gst);

// Single spectrogram [F, M] -> [embedding_dim]. Throws UntrainedError for an
// untrained extractor and InvalidArgument for zero frames.
torch::Tensor gst_encode(Gst& gst, const torch::Tensor& mel);
torch::Tensor gst_encode(Gst& gst, const MelSpectrogram& mel);
// Variable-length frames batched with padding: returns [N, embedding_dim].
torch::Tensor gst_encode_many(Gst& gst, const std::vector<torch::Tensor>& mels);

// Mean squared difference between the region embedding and `target` ([embedding_dim]).
torch::Tensor prosody_consistency_loss(Gst& gst, const torch::Tensor& pred_region, const torch::Tensor& target);
torch::Tensor prosody_consistency_loss_from_mel(Gst& gst, const torch::Tensor& pred_region,
                                                const torch::Tensor& full_gt_mel);

struct GstTrainConfig {
  int steps = 600;
  int batch_size = 16;
  double learning_rate = 1e-3;
  int crop_min = 16;
  int crop_max = 64;
  std::uint64_t seed = 1234;
};
nlohmann::json to_json(const GstTrainConfig& config);
void read_gst_train_config(JsonReader& reader, GstTrainConfig& config);

struct GstPretrainResult {
  Gst gst{nullptr};
  double train_accuracy = 0.0;
  double heldout_accuracy = 0.0;
  double chance = 0.0;
  std::size_t heldout_items = 0;
};

// Speaker-classification proxy task on random crops. Held-out items are the
// non-train splits, or every fifth item when those are empty. The returned
// extractor is frozen. Throws InvalidArgument for fewer than two speakers.
GstPretrainResult pretrain_gst(const CorpusManifest& manifest, const GstConfig& config,
                               const GstTrainConfig& train_config);

void save_gst(const Gst& gst, const std::filesystem::path& path, const nlohmann::json& extra_meta = {});
Gst load_gst(const std::filesystem::path& path);

}  // namespace seamless
