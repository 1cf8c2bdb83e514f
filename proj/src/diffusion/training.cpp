#include "seamless/training.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "seamless/error.hpp"
#include "seamless/log.hpp"
#include "seamless/tensor.hpp"

namespace seamless {

nlohmann::json to_json(const TrainConfig& c) {
  return {{"steps", c.steps},
          {"mask_rate", c.mask_rate},
          {"seed", c.seed},
          {"log_every", c.log_every},
          {"checkpoint_every", c.checkpoint_every},
          {"loss",
           {{"w_ac", c.loss.w_ac},
            {"w_pc", c.loss.w_pc},
            {"statistic", to_string(c.loss.statistic)},
            {"w_duration", c.loss.w_duration},
            {"w_pitch", c.loss.w_pitch}}},
          {"optimizer",
           {{"learning_rate", c.optimizer.learning_rate},
            {"beta1", c.optimizer.beta1},
            {"beta2", c.optimizer.beta2},
            {"batch_size", c.optimizer.batch_size},
            {"final_lr_fraction", c.optimizer.final_lr_fraction},
            {"grad_clip", c.optimizer.grad_clip}}}};
}

void read_train_config(JsonReader& r, TrainConfig& c) {
  r.read("steps", c.steps);
  r.read("mask_rate", c.mask_rate);
  r.read("seed", c.seed);
  r.read("log_every", c.log_every);
  r.read("checkpoint_every", c.checkpoint_every);
  if (c.steps < 0) throw ConfigError(r.path("steps"), "must be >= 0");
  if (!(c.mask_rate > 0.0 && c.mask_rate <= 1.0)) throw ConfigError(r.path("mask_rate"), "must be in (0, 1]");
  if (r.has("loss")) {
    auto l = r.child("loss");
    l.read("w_ac", c.loss.w_ac);
    l.read("w_pc", c.loss.w_pc);
    l.read("w_duration", c.loss.w_duration);
    l.read("w_pitch", c.loss.w_pitch);
    if (l.has("statistic")) {
      std::string name;
      l.read("statistic", name);
      try {
        c.loss.statistic = smoothness_from_string(name);
      } catch (const InvalidArgument&) {
        throw ConfigError(l.path("statistic"), "expected 'variance' or 'adjacent_euclidean'");
      }
    }
    for (const char* key : {"w_ac", "w_pc", "w_duration", "w_pitch"}) {
      const double w = key == std::string("w_ac") ? c.loss.w_ac
                       : key == std::string("w_pc") ? c.loss.w_pc
                       : key == std::string("w_duration") ? c.loss.w_duration
                                                          : c.loss.w_pitch;
      if (!(w >= 0.0)) throw ConfigError(l.path(key), "must be >= 0");
    }
    l.finish();
  }
  if (r.has("optimizer")) {
    auto o = r.child("optimizer");
    o.read("learning_rate", c.optimizer.learning_rate);
    o.read("beta1", c.optimizer.beta1);
    o.read("beta2", c.optimizer.beta2);
    o.read("batch_size", c.optimizer.batch_size);
    o.read("final_lr_fraction", c.optimizer.final_lr_fraction);
    o.read("grad_clip", c.optimizer.grad_clip);
    if (!(c.optimizer.learning_rate > 0.0)) throw ConfigError(o.path("learning_rate"), "must be positive");
    if (c.optimizer.batch_size <= 0) throw ConfigError(o.path("batch_size"), "must be positive");
    if (!(c.optimizer.final_lr_fraction > 0.0 && c.optimizer.final_lr_fraction <= 1.0)) {
      throw ConfigError(o.path("final_lr_fraction"), "must be in (0, 1]");
    }
    o.finish();
  }
}

MaskSpec sample_training_mask(const AlignedUtterance& utterance, double rate, Rng& rng) {
  for (int attempt = 0; attempt < 8; ++attempt) {
    auto spec = sample_mask_spans(utterance, rate, rng);
    if (!spec.regions.empty()) return spec;
  }
  std::vector<std::size_t> candidates;
  for (std::size_t k = 0; k < utterance.durations.size(); ++k) {
    if (utterance.durations[k] > 0) candidates.push_back(k);
  }
  if (candidates.empty()) throw InvalidArgument("utterance " + utterance.utterance.id + " has no frames to mask");
  std::vector<bool> flags(utterance.durations.size(), false);
  flags[candidates[rng.index(candidates.size())]] = true;
  return regions_from_phone_flags(utterance.durations, flags, rate);
}

Trainer::Trainer(EditorModel model, Gst gst, NoiseSchedule schedule, TrainConfig config)
    : model_(std::move(model)),
      gst_(std::move(gst)),
      schedule_(std::move(schedule)),
      config_(std::move(config)),
      optimizer_(model_->parameters(), torch::optim::AdamOptions(config_.optimizer.learning_rate)
                                           .betas({config_.optimizer.beta1, config_.optimizer.beta2})) {
  if (schedule_.steps != model_->config().diffusion_steps) {
    throw ConfigError("schedule.steps", "differs from model diffusion_steps");
  }
  if (config_.loss.w_pc > 0.0) {
    if (gst_.is_empty() || !gst_->trained()) {
      throw PrerequisiteError("pretrain-gst", "prosody consistency loss needs a pretrained extractor");
    }
    if (!gst_->frozen()) gst_->freeze();
    if (gst_->config().num_mels != model_->config().num_mels) {
      throw ConfigError("gst.num_mels", "differs from model num_mels");
    }
  }
}

const torch::Tensor& Trainer::prosody_target(const AlignedUtterance& u) {
  auto it = prosody_targets_.find(u.utterance.id);
  if (it != prosody_targets_.end()) return it->second;
  torch::NoGradGuard no_grad;
  return prosody_targets_.emplace(u.utterance.id, gst_encode(gst_, u.mel)).first->second;
}

LossBreakdown Trainer::run(const std::vector<const AlignedUtterance*>& items, Rng& rng, bool consistency) {
  using torch::indexing::Slice;
  model_->train();
  std::vector<MaskSpec> specs;
  for (const auto* u : items) specs.push_back(sample_training_mask(*u, config_.mask_rate, rng));
  const auto batch = make_batch(items, specs, *model_);
  const auto B = batch.size();
  auto cond = model_->build_condition(batch, batch.pitch, rng);

  std::vector<std::int64_t> steps;
  for (std::int64_t b = 0; b < B; ++b) steps.push_back(static_cast<std::int64_t>(rng.index(schedule_.steps)));
  auto t = torch::tensor(steps, torch::kInt64);
  auto keep = batch.frame_mask.unsqueeze(-1).to(torch::kFloat32);
  auto y0 = model_->normalize_mel(batch.mel) * keep;
  auto noise = normal_tensor(rng, y0.sizes());
  auto y_t = forward_diffuse(y0, t, noise, schedule_) * keep;
  auto pred = model_->denormalize_mel(model_->denoise(y_t, t, cond));

  const bool use_ac = consistency && config_.loss.w_ac > 0.0;
  const bool use_pc = consistency && config_.loss.w_pc > 0.0;
  auto rec = torch::zeros({});
  auto ac = torch::zeros({});
  auto pc = torch::zeros({});
  double ac_report = 0.0;
  std::vector<torch::Tensor> pc_regions, pc_targets;
  for (std::int64_t b = 0; b < B; ++b) {
    const auto& u = *items[b];
    const auto frames = static_cast<std::int64_t>(u.mel.num_frames());
    auto gt = batch.mel[b].slice(0, 0, frames);
    const double lo = gt.min().item<double>();
    const double hi = gt.max().item<double>();
    for (const auto& r : specs[b].regions) {
      const auto s = static_cast<std::int64_t>(r.start_frame);
      const auto e = static_cast<std::int64_t>(r.end_frame);
      auto region = pred[b].slice(0, s, e);
      rec = rec + reconstruction_loss(region, gt.slice(0, s, e), lo, hi);
      if (use_ac) {
        ac = ac + acoustic_consistency_loss(region, gt, r, config_.loss.statistic);
      } else {
        torch::NoGradGuard no_grad;
        ac_report += acoustic_consistency_loss(region.detach(), gt, r, config_.loss.statistic).item<double>();
      }
      if (!gst_.is_empty() && gst_->trained()) {
        pc_regions.push_back(region);
        pc_targets.push_back(prosody_target(u));
      }
    }
  }
  double pc_report = 0.0;
  if (!pc_regions.empty()) {
    if (use_pc) {
      auto embeddings = gst_encode_many(gst_, pc_regions);
      pc = (embeddings - torch::stack(pc_targets)).pow(2).mean(1).sum();
    } else {
      torch::NoGradGuard no_grad;
      std::vector<torch::Tensor> detached;
      for (auto& r : pc_regions) detached.push_back(r.detach());
      pc_report = (gst_encode_many(gst_, detached) - torch::stack(pc_targets)).pow(2).mean(1).sum().item<double>();
    }
  }
  const double inv_b = 1.0 / static_cast<double>(B);
  rec = rec * inv_b;
  auto objective = rec;
  if (use_ac) {
    ac = ac * inv_b;
    objective = objective + config_.loss.w_ac * ac;
  }
  if (use_pc) {
    pc = pc * inv_b;
    objective = objective + config_.loss.w_pc * pc;
  }

  // Duration predictor: log(d + 1) targets on unmasked phonemes.
  auto log_d = model_->duration_log(cond.phoneme_encoding, cond.speaker_embedding, batch.phone_mask);
  auto dur_mask = batch.phone_mask.logical_and(batch.masked_phones.logical_not()).to(torch::kFloat32);
  auto dur_target = torch::log1p(batch.durations.to(torch::kFloat32));
  auto duration = ((log_d - dur_target).pow(2) * dur_mask).sum() / dur_mask.sum().clamp_min(1.0);

  // Pitch predictor: masked frames, log-F0 on voiced ones plus voicing.
  auto pitch_out = model_->pitch_outputs(cond.frame_linguistic, cond.speaker_embedding, batch.pitch,
                                         batch.region_mask, batch.frame_mask);
  auto in_region = batch.region_mask.logical_and(batch.frame_mask);
  auto voiced = in_region.logical_and(batch.pitch > 0).to(torch::kFloat32);
  auto region_f = in_region.to(torch::kFloat32);
  const auto& st = model_->stats();
  auto logf0 = (torch::log(batch.pitch.clamp_min(1.0)) - st.logf0_mean) / st.logf0_std;
  auto f0_loss = ((pitch_out.select(-1, 0) - logf0).pow(2) * voiced).sum() / voiced.sum().clamp_min(1.0);
  auto vuv = torch::binary_cross_entropy_with_logits(pitch_out.select(-1, 1), (batch.pitch > 0).to(torch::kFloat32),
                                                     {}, {}, at::Reduction::None);
  auto pitch_loss = f0_loss + (vuv * region_f).sum() / region_f.sum().clamp_min(1.0);

  auto full = objective + config_.loss.w_duration * duration + config_.loss.w_pitch * pitch_loss;
  LossBreakdown out;
  out.rec = rec.item<double>();
  out.ac = use_ac ? ac.item<double>() : ac_report * inv_b;
  out.pc = use_pc ? pc.item<double>() : pc_report * inv_b;
  out.total = out.rec + config_.loss.w_ac * out.ac + config_.loss.w_pc * out.pc;
  out.duration = duration.item<double>();
  out.pitch = pitch_loss.item<double>();
  if (!std::isfinite(full.item<double>())) {
    std::ostringstream msg;
    msg << "non-finite loss at step " << steps_done_ << ": rec=" << out.rec << " ac=" << out.ac << " pc=" << out.pc
        << " duration=" << out.duration << " pitch=" << out.pitch << "; batch:";
    for (const auto* u : items) msg << ' ' << u->utterance.id;
    throw TrainingError(msg.str());
  }
  full.backward();
  return out;
}

LossBreakdown Trainer::compute_gradients(const std::vector<const AlignedUtterance*>& items, Rng& rng) {
  return run(items, rng, true);
}

LossBreakdown Trainer::compute_reconstruction_gradients(const std::vector<const AlignedUtterance*>& items, Rng& rng) {
  return run(items, rng, false);
}

double Trainer::current_lr() const {
  const auto& o = config_.optimizer;
  if (o.final_lr_fraction >= 1.0 || config_.steps <= 1) return o.learning_rate;
  const double progress = std::min(1.0, static_cast<double>(steps_done_) / (config_.steps - 1));
  const double floor = o.learning_rate * o.final_lr_fraction;
  return floor + 0.5 * (o.learning_rate - floor) * (1.0 + std::cos(std::numbers::pi * progress));
}

void Trainer::zero_grad() { optimizer_.zero_grad(); }

void Trainer::apply_update() {
  const double lr = current_lr();
  for (auto& group : optimizer_.param_groups()) static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
  if (config_.optimizer.grad_clip > 0.0) torch::nn::utils::clip_grad_norm_(model_->parameters(), config_.optimizer.grad_clip);
  optimizer_.step();
  optimizer_.zero_grad();
  ++steps_done_;
  model_->set_trained(true);
  model_->set_steps(model_->steps() + 1);
}

LossBreakdown Trainer::step(const std::vector<const AlignedUtterance*>& items, Rng& rng) {
  zero_grad();
  auto losses = compute_gradients(items, rng);
  apply_update();
  return losses;
}

LossBreakdown Trainer::probe(const std::vector<const AlignedUtterance*>& items, std::uint64_t seed) {
  Rng rng(seed);
  zero_grad();
  auto losses = compute_gradients(items, rng);
  zero_grad();
  return losses;
}

void Trainer::fit(const std::vector<const AlignedUtterance*>& corpus, const StepCallback& on_step) {
  if (corpus.empty()) throw InvalidArgument("training corpus is empty");
  Rng rng(config_.seed);
  const auto batch = std::min<std::size_t>(static_cast<std::size_t>(config_.optimizer.batch_size), corpus.size());
  std::vector<std::size_t> order(corpus.size());
  std::size_t cursor = order.size();
  for (int s = 0; s < config_.steps; ++s) {
    std::vector<const AlignedUtterance*> items;
    while (items.size() < batch) {
      if (cursor == order.size()) {
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
        cursor = 0;
      }
      items.push_back(corpus[order[cursor++]]);
    }
    const double lr = current_lr();
    const auto losses = step(items, rng);
    if (on_step) on_step(steps_done_, losses, lr);
  }
}

Reconstruction reconstruct(EditorModel& model, const AlignedUtterance& utterance, const MaskSpec& spec,
                           const NoiseSchedule& schedule, Rng& rng, const ReconstructOptions& options) {
  if (!model->trained()) throw UntrainedError("model is untrained (run 'train' first)");
  spec.validate(utterance.mel.num_frames());
  Reconstruction out{utterance.mel, utterance.pitch};
  if (spec.regions.empty()) return out;
  model->eval();
  torch::NoGradGuard no_grad;
  if (options.predicted_pitch) out.pitch = predict_pitch(model, utterance, spec);
  const auto batch = make_batch({&utterance}, {spec}, *model);
  auto cond = model->build_condition(batch, to_tensor(out.pitch).unsqueeze(0), rng);
  auto context = model->normalize_mel(batch.mel[0]);
  DenoiseFn fn = [&](const torch::Tensor& y, int t) {
    return model->denoise(y.unsqueeze(0), torch::tensor({static_cast<std::int64_t>(t)}), cond).squeeze(0);
  };
  auto regions = generate_regions(context, spec, schedule, fn, rng);
  for (std::size_t i = 0; i < regions.size(); ++i) {
    auto frames = model->denormalize_mel(regions[i]).contiguous();
    const auto& r = spec.regions[i];
    const float* src = frames.data_ptr<float>();
    std::copy(src, src + frames.numel(), out.mel.frame(r.start_frame).data());
  }
  return out;
}

}  // namespace seamless
