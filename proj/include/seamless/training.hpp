#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "seamless/diffusion.hpp"
#include "seamless/fluency.hpp"
#include "seamless/json_io.hpp"
#include "seamless/model.hpp"

namespace seamless {

struct LossConfig {
  double w_ac = 1.0;
  double w_pc = 1.0;
  SmoothnessStatistic statistic = SmoothnessStatistic::Variance;
  // Auxiliary predictor losses; they only reach predictor parameters.
  double w_duration = 1.0;
  double w_pitch = 1.0;
};

struct OptimizerConfig {
  double learning_rate = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  int batch_size = 16;
  // Cosine decay from learning_rate to learning_rate * final_lr_fraction; 1 keeps it constant.
  double final_lr_fraction = 1.0;
  // Global gradient-norm clip; 0 disables.
  double grad_clip = 0.0;
};

struct TrainConfig {
  int steps = 20000;
  double mask_rate = 0.8;
  LossConfig loss;
  OptimizerConfig optimizer;
  std::uint64_t seed = 1;
  int log_every = 1;
  int checkpoint_every = 0;
};

nlohmann::json to_json(const TrainConfig& config);
void read_train_config(JsonReader& reader, TrainConfig& config);

struct LossBreakdown {
  double total = 0.0;  // rec + w_ac * ac + w_pc * pc
  double rec = 0.0;
  double ac = 0.0;
  double pc = 0.0;
  double duration = 0.0;
  double pitch = 0.0;
};

// Draws a MaskSpec with at least one region: resamples a few times and then
// falls back to masking one random non-empty phoneme.
MaskSpec sample_training_mask(const AlignedUtterance& utterance, double rate, Rng& rng);

class Trainer {
 public:
  // `gst` may be empty when loss.w_pc == 0.
  Trainer(EditorModel model, Gst gst, NoiseSchedule schedule, TrainConfig config);

  // Forward + backward for one batch; gradients accumulate in the model.
  // All randomness (masks, steps, noise) comes from `rng`.
  LossBreakdown compute_gradients(const std::vector<const AlignedUtterance*>& items, Rng& rng);
  // Same draws, but only the reconstruction and predictor terms contribute.
  LossBreakdown compute_reconstruction_gradients(const std::vector<const AlignedUtterance*>& items, Rng& rng);
  void apply_update();
  void zero_grad();

  // compute_gradients + apply_update; throws TrainingError on a non-finite loss.
  LossBreakdown step(const std::vector<const AlignedUtterance*>& items, Rng& rng);

  // Loss on `items` under draws from `seed`, leaving parameters and optimizer
  // state untouched. Probes sharing a seed see the same masks, steps and noise,
  // so their differences track the model alone.
  LossBreakdown probe(const std::vector<const AlignedUtterance*>& items, std::uint64_t seed);

  using StepCallback = std::function<void(int step, const LossBreakdown& losses, double lr)>;
  // Runs config.steps steps over `corpus`, drawing batches of
  // min(batch_size, corpus size) from a per-epoch shuffle.
  void fit(const std::vector<const AlignedUtterance*>& corpus, const StepCallback& on_step = {});

  double current_lr() const;
  int steps_done() const { return steps_done_; }
  EditorModel& model() { return model_; }
  const TrainConfig& config() const { return config_; }

 private:
  LossBreakdown run(const std::vector<const AlignedUtterance*>& items, Rng& rng, bool consistency);
  const torch::Tensor& prosody_target(const AlignedUtterance& utterance);

  EditorModel model_;
  Gst gst_;
  NoiseSchedule schedule_;
  TrainConfig config_;
  torch::optim::Adam optimizer_;
  std::map<std::string, torch::Tensor> prosody_targets_;
  int steps_done_ = 0;
};

struct ReconstructOptions {
  // Use the pitch predictor inside regions (as at edit time) instead of the reference pitch.
  bool predicted_pitch = true;
};

struct Reconstruction {
  MelSpectrogram mel;        // regions regenerated, context bit-identical
  std::vector<float> pitch;  // pitch fed to the condition
};

// Runs the reverse chain for the regions of `spec`. Throws UntrainedError for an untrained model.
Reconstruction reconstruct(EditorModel& model, const AlignedUtterance& utterance, const MaskSpec& spec,
                           const NoiseSchedule& schedule, Rng& rng, const ReconstructOptions& options = {});

}  // namespace seamless
