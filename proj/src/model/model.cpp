#include "seamless/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "seamless/error.hpp"
#include "seamless/tensor.hpp"

namespace seamless {
namespace {

// Standard transformer sinusoid table, [length, dim].
torch::Tensor sinusoid_table(std::int64_t length, std::int64_t dim) {
  auto pos = torch::arange(length, torch::kFloat32).unsqueeze(1);
  auto i = torch::arange(0, dim, 2, torch::kFloat32);
  auto freq = torch::exp(i * (-std::log(10000.0) / static_cast<double>(dim)));
  auto table = torch::zeros({length, dim});
  table.index_put_({torch::indexing::Slice(), torch::indexing::Slice(0, torch::indexing::None, 2)},
                   torch::sin(pos * freq));
  table.index_put_({torch::indexing::Slice(), torch::indexing::Slice(1, torch::indexing::None, 2)},
                   torch::cos(pos * freq));
  return table;
}

torch::Tensor step_sinusoid(const torch::Tensor& t, std::int64_t dim) {
  const auto half = dim / 2;
  auto freq = torch::exp(torch::arange(half, torch::kFloat32) * (-std::log(10000.0) / std::max<std::int64_t>(half - 1, 1)));
  auto arg = t.to(torch::kFloat32).unsqueeze(1) * freq.unsqueeze(0);
  return torch::cat({torch::sin(arg), torch::cos(arg)}, 1);
}

// LayerNorm over the channel axis of a [B, C, L] tensor.
torch::Tensor channel_norm(torch::nn::LayerNorm& norm, const torch::Tensor& x) {
  return norm(x.transpose(1, 2)).transpose(1, 2);
}

}  // namespace

nlohmann::json to_json(const ModelConfig& c) {
  return {{"num_mels", c.num_mels},
          {"d_model", c.d_model},
          {"encoder_layers", c.encoder_layers},
          {"encoder_heads", c.encoder_heads},
          {"encoder_ffn_dim", c.encoder_ffn_dim},
          {"encoder_kernel", c.encoder_kernel},
          {"predictor_channels", c.predictor_channels},
          {"predictor_kernel", c.predictor_kernel},
          {"denoiser_channels", c.denoiser_channels},
          {"denoiser_layers", c.denoiser_layers},
          {"denoiser_dilation_cycle", c.denoiser_dilation_cycle},
          {"pitch_bins", c.pitch_bins},
          {"pitch_fmin", c.pitch_fmin},
          {"pitch_fmax", c.pitch_fmax},
          {"dropout", c.dropout},
          {"diffusion_steps", c.diffusion_steps}};
}

void read_model_config(JsonReader& r, ModelConfig& c) {
  r.read("num_mels", c.num_mels);
  r.read("d_model", c.d_model);
  r.read("encoder_layers", c.encoder_layers);
  r.read("encoder_heads", c.encoder_heads);
  r.read("encoder_ffn_dim", c.encoder_ffn_dim);
  r.read("encoder_kernel", c.encoder_kernel);
  r.read("predictor_channels", c.predictor_channels);
  r.read("predictor_kernel", c.predictor_kernel);
  r.read("denoiser_channels", c.denoiser_channels);
  r.read("denoiser_layers", c.denoiser_layers);
  r.read("denoiser_dilation_cycle", c.denoiser_dilation_cycle);
  r.read("pitch_bins", c.pitch_bins);
  r.read("pitch_fmin", c.pitch_fmin);
  r.read("pitch_fmax", c.pitch_fmax);
  r.read("dropout", c.dropout);
  r.read("diffusion_steps", c.diffusion_steps);
  auto positive = [&](const char* key, int v) {
    if (v <= 0) throw ConfigError(r.path(key), "must be positive");
  };
  positive("num_mels", c.num_mels);
  positive("d_model", c.d_model);
  positive("encoder_heads", c.encoder_heads);
  positive("denoiser_channels", c.denoiser_channels);
  positive("denoiser_layers", c.denoiser_layers);
  positive("pitch_bins", c.pitch_bins);
  positive("diffusion_steps", c.diffusion_steps);
  if (c.d_model % c.encoder_heads != 0) throw ConfigError(r.path("encoder_heads"), "must divide d_model");
  if (c.d_model % 2 != 0) throw ConfigError(r.path("d_model"), "must be even");
  if (c.denoiser_channels % 2 != 0) throw ConfigError(r.path("denoiser_channels"), "must be even");
  if (!(c.pitch_fmin > 0 && c.pitch_fmax > c.pitch_fmin)) throw ConfigError(r.path("pitch_fmax"), "invalid pitch range");
  if (!(c.dropout >= 0 && c.dropout < 1)) throw ConfigError(r.path("dropout"), "must be in [0, 1)");
}

Vocabulary::Vocabulary(std::vector<std::string> symbols) {
  std::set<std::string> unique(symbols.begin(), symbols.end());
  symbols_.assign(unique.begin(), unique.end());
  for (std::size_t i = 0; i < symbols_.size(); ++i) lookup_[symbols_[i]] = static_cast<std::int64_t>(i + 1);
}

std::int64_t Vocabulary::index(const std::string& symbol) const {
  const auto it = lookup_.find(symbol);
  if (it == lookup_.end()) throw VocabularyError("phoneme vocabulary", symbol);
  return it->second;
}

ModelStats compute_model_stats(const std::vector<const AlignedUtterance*>& items) {
  if (items.empty()) throw InvalidArgument("compute_model_stats: no utterances");
  const auto mels = items.front()->mel.num_mels();
  std::vector<double> sum(mels, 0.0), sq(mels, 0.0);
  double frames = 0.0, f0_sum = 0.0, f0_sq = 0.0, voiced = 0.0;
  std::map<std::string, std::pair<double, double>> dur;
  double dur_total = 0.0, phones = 0.0;
  for (const auto* u : items) {
    if (u->mel.num_mels() != mels) throw ShapeError("compute_model_stats: mixed mel band counts");
    for (std::size_t f = 0; f < u->mel.num_frames(); ++f) {
      for (std::size_t m = 0; m < mels; ++m) {
        const double v = u->mel.at(f, m);
        sum[m] += v;
        sq[m] += v * v;
      }
      frames += 1.0;
    }
    for (float hz : u->pitch) {
      if (hz > 0.0f) {
        const double l = std::log(static_cast<double>(hz));
        f0_sum += l;
        f0_sq += l * l;
        voiced += 1.0;
      }
    }
    for (std::size_t k = 0; k < u->phonemes.size(); ++k) {
      auto& [total, count] = dur[u->phonemes[k]];
      total += u->durations[k];
      count += 1.0;
      dur_total += u->durations[k];
      phones += 1.0;
    }
  }
  ModelStats s;
  for (std::size_t m = 0; m < mels; ++m) {
    const double mean = sum[m] / frames;
    const double var = std::max(sq[m] / frames - mean * mean, 0.0);
    s.mel_mean.push_back(static_cast<float>(mean));
    s.mel_std.push_back(static_cast<float>(std::max(std::sqrt(var), 0.05)));
  }
  if (voiced > 1.0) {
    const double mean = f0_sum / voiced;
    s.logf0_mean = static_cast<float>(mean);
    s.logf0_std = static_cast<float>(std::max(std::sqrt(std::max(f0_sq / voiced - mean * mean, 0.0)), 0.05));
  }
  for (const auto& [symbol, entry] : dur) s.mean_duration[symbol] = entry.first / entry.second;
  s.global_mean_duration = dur_total / phones;
  return s;
}

nlohmann::json to_json(const ModelStats& s) {
  return {{"mel_mean", s.mel_mean},         {"mel_std", s.mel_std},
          {"logf0_mean", s.logf0_mean},     {"logf0_std", s.logf0_std},
          {"mean_duration", s.mean_duration}, {"global_mean_duration", s.global_mean_duration}};
}

ModelStats model_stats_from_json(const nlohmann::json& j) {
  ModelStats s;
  try {
    s.mel_mean = j.at("mel_mean").get<std::vector<float>>();
    s.mel_std = j.at("mel_std").get<std::vector<float>>();
    s.logf0_mean = j.at("logf0_mean").get<float>();
    s.logf0_std = j.at("logf0_std").get<float>();
    s.mean_duration = j.at("mean_duration").get<std::map<std::string, double>>();
    s.global_mean_duration = j.at("global_mean_duration").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model stats: ") + e.what());
  }
  return s;
}

torch::Tensor quantize_pitch(const torch::Tensor& f0_hz, int bins, double fmin, double fmax) {
  auto f0 = f0_hz.to(torch::kFloat64);
  auto scaled = (torch::log(f0.clamp_min(1e-3)) - std::log(fmin)) / (std::log(fmax) - std::log(fmin)) * bins;
  auto voiced_bin = torch::floor(scaled).clamp(0, bins - 1).to(torch::kInt64) + 1;
  return torch::where(f0 > 0, voiced_bin, torch::zeros_like(voiced_bin));
}

torch::Tensor length_regulate(const torch::Tensor& encoding, const std::vector<int>& durations) {
  if (encoding.dim() != 2 || encoding.size(0) != static_cast<std::int64_t>(durations.size())) {
    throw ShapeError("length_regulate: durations must have one entry per encoding row");
  }
  for (int d : durations) {
    if (d < 0) throw InvalidArgument("length_regulate: negative duration " + std::to_string(d));
  }
  auto repeats = torch::tensor(std::vector<std::int64_t>(durations.begin(), durations.end()), torch::kInt64);
  return torch::repeat_interleave(encoding, repeats, 0);
}

torch::Tensor length_regulate(const torch::Tensor& encoding, const torch::Tensor& durations,
                              std::int64_t num_frames) {
  const auto batch = encoding.size(0);
  auto dur = durations.to(torch::kInt64).contiguous();
  if (dur.size(0) != batch || dur.size(1) != encoding.size(1)) throw ShapeError("length_regulate: shape mismatch");
  auto index = torch::zeros({batch, num_frames}, torch::kInt64);
  auto valid = torch::zeros({batch, num_frames, 1}, encoding.options());
  auto idx = index.accessor<std::int64_t, 2>();
  auto d = dur.accessor<std::int64_t, 2>();
  for (std::int64_t b = 0; b < batch; ++b) {
    std::int64_t frame = 0;
    for (std::int64_t p = 0; p < dur.size(1); ++p) {
      if (d[b][p] < 0) throw InvalidArgument("length_regulate: negative duration");
      for (std::int64_t r = 0; r < d[b][p] && frame < num_frames; ++r) idx[b][frame++] = p;
    }
    valid.index_put_({b, torch::indexing::Slice(0, frame)}, 1.0);
  }
  auto gathered = torch::gather(encoding, 1, index.unsqueeze(-1).expand({batch, num_frames, encoding.size(2)}));
  return gathered * valid;
}

TextEncoderImpl::TextEncoderImpl(const ModelConfig& c, std::int64_t vocab_size) : d_model(c.d_model) {
  embedding = register_module("embedding",
                              torch::nn::Embedding(torch::nn::EmbeddingOptions(vocab_size, c.d_model).padding_idx(0)));
  dropout = register_module("dropout", torch::nn::Dropout(c.dropout));
  for (int l = 0; l < c.encoder_layers; ++l) {
    const auto n = std::to_string(l);
    attention.push_back(register_module(
        "attention" + n,
        torch::nn::MultiheadAttention(torch::nn::MultiheadAttentionOptions(c.d_model, c.encoder_heads).dropout(c.dropout))));
    norm1.push_back(register_module("norm1_" + n, torch::nn::LayerNorm(torch::nn::LayerNormOptions({c.d_model}))));
    norm2.push_back(register_module("norm2_" + n, torch::nn::LayerNorm(torch::nn::LayerNormOptions({c.d_model}))));
    ffn1.push_back(register_module(
        "ffn1_" + n, torch::nn::Conv1d(torch::nn::Conv1dOptions(c.d_model, c.encoder_ffn_dim, c.encoder_kernel)
                                           .padding(c.encoder_kernel / 2))));
    ffn2.push_back(register_module("ffn2_" + n, torch::nn::Conv1d(torch::nn::Conv1dOptions(c.encoder_ffn_dim, c.d_model, 1))));
  }
}

torch::Tensor TextEncoderImpl::forward(const torch::Tensor& phonemes, const torch::Tensor& phone_mask) {
  const auto length = phonemes.size(1);
  auto keep = phone_mask.unsqueeze(-1).to(torch::kFloat32);
  auto x = embedding(phonemes) * std::sqrt(static_cast<double>(d_model)) +
           sinusoid_table(length, d_model).unsqueeze(0);
  x = dropout(x) * keep;
  const auto padding = phone_mask.logical_not();
  for (std::size_t l = 0; l < attention.size(); ++l) {
    auto q = x.transpose(0, 1);
    auto attended = std::get<0>(attention[l](q, q, q, padding, false));
    x = norm1[l](x + dropout(attended.transpose(0, 1)));
    auto h = ffn2[l](torch::relu(ffn1[l]((x * keep).transpose(1, 2)))).transpose(1, 2);
    x = norm2[l](x + dropout(h)) * keep;
  }
  return x;
}

ConvPredictorImpl::ConvPredictorImpl(std::int64_t in_channels, std::int64_t channels, std::int64_t kernel,
                                     std::int64_t outputs, double p) {
  conv1 = register_module("conv1", torch::nn::Conv1d(torch::nn::Conv1dOptions(in_channels, channels, kernel).padding(kernel / 2)));
  conv2 = register_module("conv2", torch::nn::Conv1d(torch::nn::Conv1dOptions(channels, channels, kernel).padding(kernel / 2)));
  norm1 = register_module("norm1", torch::nn::LayerNorm(torch::nn::LayerNormOptions({channels})));
  norm2 = register_module("norm2", torch::nn::LayerNorm(torch::nn::LayerNormOptions({channels})));
  dropout = register_module("dropout", torch::nn::Dropout(p));
  head = register_module("head", torch::nn::Linear(channels, outputs));
}

torch::Tensor ConvPredictorImpl::forward(const torch::Tensor& x, const torch::Tensor& mask) {
  auto keep = mask.unsqueeze(1).to(x.dtype());
  auto h = x.transpose(1, 2) * keep;
  h = dropout(channel_norm(norm1, torch::relu(conv1(h)))) * keep;
  h = dropout(channel_norm(norm2, torch::relu(conv2(h)))) * keep;
  return head(h.transpose(1, 2)) * mask.unsqueeze(-1).to(x.dtype());
}

DenoiserImpl::DenoiserImpl(const ModelConfig& c) : channels(c.denoiser_channels) {
  const auto C = c.denoiser_channels;
  input = register_module("input", torch::nn::Conv1d(torch::nn::Conv1dOptions(c.num_mels, C, 1)));
  step_mlp1 = register_module("step_mlp1", torch::nn::Linear(C, 4 * C));
  step_mlp2 = register_module("step_mlp2", torch::nn::Linear(4 * C, C));
  for (int l = 0; l < c.denoiser_layers; ++l) {
    const auto n = std::to_string(l);
    const auto dilation = 1 << (l % std::max(c.denoiser_dilation_cycle, 1));
    step_proj.push_back(register_module("step_proj" + n, torch::nn::Linear(C, C)));
    dilated.push_back(register_module(
        "dilated" + n, torch::nn::Conv1d(torch::nn::Conv1dOptions(C, 2 * C, 3).padding(dilation).dilation(dilation))));
    cond_proj.push_back(register_module("cond_proj" + n, torch::nn::Conv1d(torch::nn::Conv1dOptions(c.d_model, 2 * C, 1))));
    out_proj.push_back(register_module("out_proj" + n, torch::nn::Conv1d(torch::nn::Conv1dOptions(C, 2 * C, 1))));
  }
  skip_proj = register_module("skip_proj", torch::nn::Conv1d(torch::nn::Conv1dOptions(C, C, 1)));
  output = register_module("output", torch::nn::Conv1d(torch::nn::Conv1dOptions(C, c.num_mels, 1)));
  torch::NoGradGuard no_grad;
  output->weight.zero_();
  output->bias.zero_();
}

torch::Tensor DenoiserImpl::forward(const torch::Tensor& y_t, const torch::Tensor& t, const torch::Tensor& cond,
                                    const torch::Tensor& frame_mask) {
  auto keep = frame_mask.unsqueeze(1).to(y_t.dtype());
  auto x = torch::relu(input(y_t.transpose(1, 2))) * keep;
  auto step = step_sinusoid(t, channels).to(y_t.dtype());
  step = step_mlp2(torch::silu(step_mlp1(step)));
  auto c = cond.transpose(1, 2);
  auto skip = torch::zeros_like(x);
  for (std::size_t l = 0; l < dilated.size(); ++l) {
    auto h = x + step_proj[l](step).unsqueeze(-1);
    h = dilated[l](h) + cond_proj[l](c);
    auto parts = h.chunk(2, 1);
    h = torch::sigmoid(parts[0]) * torch::tanh(parts[1]);
    auto out = out_proj[l](h).chunk(2, 1);
    x = (x + out[0]) * (keep / std::numbers::sqrt2);
    skip = skip + out[1];
  }
  skip = skip / std::sqrt(static_cast<double>(dilated.size()));
  auto y = output(torch::relu(skip_proj(skip))) * keep;
  return y.transpose(1, 2);
}

EditorModelImpl::EditorModelImpl(ModelConfig config, Vocabulary vocabulary, std::vector<std::string> speakers,
                                 ModelStats stats)
    : config_(config), vocabulary_(std::move(vocabulary)), speakers_(std::move(speakers)), stats_(std::move(stats)) {
  const auto& c = config_;
  if (speakers_.empty()) throw InvalidArgument("model needs at least one speaker");
  if (stats_.mel_mean.size() != static_cast<std::size_t>(c.num_mels) ||
      stats_.mel_std.size() != static_cast<std::size_t>(c.num_mels)) {
    throw ShapeError("model stats do not match num_mels");
  }
  encoder_ = register_module("encoder", TextEncoder(c, static_cast<std::int64_t>(vocabulary_.size())));
  speaker_table_ = register_module("speaker_table", torch::nn::Embedding(static_cast<std::int64_t>(speakers_.size()), c.d_model));
  pitch_table_ = register_module("pitch_table", torch::nn::Embedding(c.pitch_bins + 1, c.d_model));
  duration_predictor_ = register_module("duration_predictor",
                                        ConvPredictor(c.d_model, c.predictor_channels, c.predictor_kernel, 1, c.dropout));
  pitch_context_ = register_module("pitch_context", torch::nn::Linear(3, c.d_model));
  pitch_predictor_ = register_module("pitch_predictor",
                                     ConvPredictor(c.d_model, c.predictor_channels, c.predictor_kernel, 2, c.dropout));
  condition_proj_ = register_module("condition_proj", torch::nn::Linear(2 * c.d_model + c.num_mels + 1, c.d_model));
  denoiser_ = register_module("denoiser", Denoiser(c));
  mel_mean_ = register_buffer("mel_mean", to_tensor(stats_.mel_mean));
  mel_std_ = register_buffer("mel_std", to_tensor(stats_.mel_std));
}

std::int64_t EditorModelImpl::speaker_index(const std::string& speaker_id) const {
  const auto it = std::find(speakers_.begin(), speakers_.end(), speaker_id);
  if (it == speakers_.end()) throw VocabularyError("speaker table", speaker_id);
  return it - speakers_.begin();
}

torch::Tensor EditorModelImpl::normalize_mel(const torch::Tensor& mel) const {
  return (mel - mel_mean_.to(mel.dtype())) / mel_std_.to(mel.dtype());
}

torch::Tensor EditorModelImpl::denormalize_mel(const torch::Tensor& mel) const {
  return mel * mel_std_.to(mel.dtype()) + mel_mean_.to(mel.dtype());
}

torch::Tensor EditorModelImpl::encode_text(const torch::Tensor& phonemes, const torch::Tensor& phone_mask) {
  return encoder_(phonemes, phone_mask);
}

torch::Tensor EditorModelImpl::speaker_embedding(const torch::Tensor& speakers) { return speaker_table_(speakers); }

torch::Tensor EditorModelImpl::duration_log(const torch::Tensor& encoding, const torch::Tensor& speaker_embedding,
                                            const torch::Tensor& phone_mask) {
  auto x = encoding.detach() + speaker_embedding.detach().unsqueeze(1);
  return duration_predictor_(x, phone_mask).squeeze(-1);
}

torch::Tensor EditorModelImpl::pitch_outputs(const torch::Tensor& frame_linguistic, const torch::Tensor& speaker_embedding,
                                             const torch::Tensor& context_pitch, const torch::Tensor& region_mask,
                                             const torch::Tensor& frame_mask) {
  auto visible = frame_mask.logical_and(region_mask.logical_not());
  auto voiced = visible.logical_and(context_pitch > 0);
  auto logf0 = (torch::log(context_pitch.clamp_min(1.0)) - stats_.logf0_mean) / stats_.logf0_std;
  auto features = torch::stack({torch::where(voiced, logf0, torch::zeros_like(logf0)), voiced.to(torch::kFloat32),
                                region_mask.logical_and(frame_mask).to(torch::kFloat32)},
                               -1)
                      .to(frame_linguistic.dtype());
  auto x = frame_linguistic.detach() + speaker_embedding.detach().unsqueeze(1) + pitch_context_(features);
  return pitch_predictor_(x, frame_mask);
}

torch::Tensor EditorModelImpl::pitch_from_outputs(const torch::Tensor& outputs) const {
  auto hz = torch::exp(outputs.select(-1, 0) * stats_.logf0_std + stats_.logf0_mean);
  auto voiced = outputs.select(-1, 1) > 0;
  return torch::where(voiced, hz, torch::zeros_like(hz)).to(torch::kFloat32);
}

ConditionBundle EditorModelImpl::build_condition(const Batch& batch, const torch::Tensor& pitch, Rng& rng) {
  ConditionBundle b;
  const auto B = batch.size();
  const auto F = batch.mel.size(1);
  const auto M = batch.mel.size(2);
  if (pitch.size(0) != B || pitch.size(1) != F) throw ShapeError("build_condition: pitch shape mismatch");
  b.frame_mask = batch.frame_mask;
  b.region_mask = batch.region_mask;
  b.phoneme_encoding = encode_text(batch.phonemes, batch.phone_mask);
  b.speaker_embedding = speaker_embedding(batch.speakers);
  b.frame_linguistic = length_regulate(b.phoneme_encoding, batch.durations, F);
  b.reference_mel = batch.mel;
  auto noise = normal_tensor(rng, {B, F, M});
  auto region = batch.region_mask.unsqueeze(-1);
  auto keep = batch.frame_mask.unsqueeze(-1).to(torch::kFloat32);
  b.masked_mel = torch::where(region, noise, batch.mel) * keep;
  auto context = torch::where(region, noise, normalize_mel(batch.mel)) * keep;
  auto bins = quantize_pitch(pitch, config_.pitch_bins, config_.pitch_fmin, config_.pitch_fmax);
  b.pitch_embedding = pitch_table_(bins) * keep;
  auto joined = torch::cat({b.frame_linguistic, context, region.to(torch::kFloat32), b.pitch_embedding}, -1);
  b.projected = (condition_proj_(joined) + b.speaker_embedding.unsqueeze(1)) * keep;
  return b;
}

torch::Tensor EditorModelImpl::denoise(const torch::Tensor& y_t_norm, const torch::Tensor& t, const ConditionBundle& cond) {
  if (y_t_norm.dim() != 3 || y_t_norm.size(1) != cond.num_frames() || y_t_norm.size(2) != config_.num_mels) {
    throw ShapeError("denoise: y_t must be [B, " + std::to_string(cond.num_frames()) + ", " +
                     std::to_string(config_.num_mels) + "]");
  }
  if ((t < 0).any().item<bool>() || (t >= config_.diffusion_steps).any().item<bool>()) {
    throw InvalidArgument("denoise: diffusion step out of range");
  }
  return denoiser_(y_t_norm, t, cond.projected, cond.frame_mask);
}

Checkpoint EditorModelImpl::to_checkpoint(const nlohmann::json& extra_meta) const {
  Checkpoint ck;
  ck.meta = extra_meta.is_object() ? extra_meta : nlohmann::json::object();
  ck.meta["kind"] = "model";
  ck.meta["model_config"] = to_json(config_);
  ck.meta["vocabulary"] = vocabulary_.symbols();
  ck.meta["speakers"] = speakers_;
  ck.meta["stats"] = to_json(stats_);
  ck.meta["trained"] = trained_;
  ck.meta["steps"] = steps_;
  ck.tensors = module_tensors(*this, "model.");
  return ck;
}

std::shared_ptr<EditorModelImpl> EditorModelImpl::from_checkpoint(const Checkpoint& ck) {
  if (ck.meta.value("kind", "") != "model") throw FormatError("checkpoint does not hold an editing model");
  ModelConfig config;
  JsonReader reader(ck.meta.at("model_config"), "model_config");
  read_model_config(reader, config);
  reader.finish();
  auto model = std::make_shared<EditorModelImpl>(config, Vocabulary(ck.meta.at("vocabulary").get<std::vector<std::string>>()),
                                                 ck.meta.at("speakers").get<std::vector<std::string>>(),
                                                 model_stats_from_json(ck.meta.at("stats")));
  assign_module_tensors(*model, ck, "model.");
  model->trained_ = ck.meta.value("trained", false);
  model->steps_ = ck.meta.value("steps", std::int64_t{0});
  return model;
}

Batch make_batch(const std::vector<const AlignedUtterance*>& items, const std::vector<MaskSpec>& specs,
                 const EditorModelImpl& model) {
  if (items.empty()) throw InvalidArgument("make_batch: empty batch");
  if (specs.size() != items.size()) throw ShapeError("make_batch: one MaskSpec per utterance required");
  const auto B = static_cast<std::int64_t>(items.size());
  const auto M = static_cast<std::int64_t>(model.config().num_mels);
  std::int64_t P = 0, F = 0;
  for (const auto* u : items) {
    P = std::max<std::int64_t>(P, static_cast<std::int64_t>(u->phonemes.size()));
    F = std::max<std::int64_t>(F, static_cast<std::int64_t>(u->mel.num_frames()));
    if (static_cast<std::int64_t>(u->mel.num_mels()) != M) {
      throw ShapeError("utterance " + u->utterance.id + " has " + std::to_string(u->mel.num_mels()) +
                       " mel bands, model expects " + std::to_string(M));
    }
  }
  Batch batch;
  batch.items = items;
  batch.specs = specs;
  batch.phonemes = torch::zeros({B, P}, torch::kInt64);
  batch.phone_mask = torch::zeros({B, P}, torch::kBool);
  batch.durations = torch::zeros({B, P}, torch::kInt64);
  batch.masked_phones = torch::zeros({B, P}, torch::kBool);
  batch.mel = torch::zeros({B, F, M});
  batch.frame_mask = torch::zeros({B, F}, torch::kBool);
  batch.region_mask = torch::zeros({B, F}, torch::kBool);
  batch.pitch = torch::zeros({B, F});
  batch.speakers = torch::zeros({B}, torch::kInt64);
  using torch::indexing::Slice;
  for (std::int64_t b = 0; b < B; ++b) {
    const auto& u = *items[b];
    const auto n = static_cast<std::int64_t>(u.phonemes.size());
    const auto frames = static_cast<std::int64_t>(u.mel.num_frames());
    std::vector<std::int64_t> ids, durs;
    for (std::size_t k = 0; k < u.phonemes.size(); ++k) {
      ids.push_back(model.vocabulary().index(u.phonemes[k]));
      durs.push_back(u.durations[k]);
    }
    batch.phonemes.index_put_({b, Slice(0, n)}, torch::tensor(ids, torch::kInt64));
    batch.durations.index_put_({b, Slice(0, n)}, torch::tensor(durs, torch::kInt64));
    batch.phone_mask.index_put_({b, Slice(0, n)}, true);
    batch.mel.index_put_({b, Slice(0, frames)}, to_tensor(u.mel));
    batch.frame_mask.index_put_({b, Slice(0, frames)}, true);
    if (u.pitch.size() != u.mel.num_frames()) throw ShapeError("utterance " + u.utterance.id + ": pitch length mismatch");
    batch.pitch.index_put_({b, Slice(0, frames)}, to_tensor(u.pitch));
    batch.speakers[b] = model.speaker_index(u.utterance.speaker_id);
    specs[b].validate(u.mel.num_frames());
    for (const auto& r : specs[b].regions) {
      batch.region_mask.index_put_({b, Slice(static_cast<std::int64_t>(r.start_frame), static_cast<std::int64_t>(r.end_frame))}, true);
      batch.masked_phones.index_put_({b, Slice(static_cast<std::int64_t>(r.first_phone), static_cast<std::int64_t>(r.last_phone) + 1)}, true);
    }
  }
  return batch;
}

EditorModel make_model(const ModelConfig& config, const CorpusManifest& manifest,
                       const std::vector<std::string>& extra_symbols) {
  std::vector<std::string> symbols = extra_symbols;
  std::vector<const AlignedUtterance*> train;
  for (const auto* u : manifest.subset(Split::Train)) train.push_back(u);
  if (train.empty()) {
    for (const auto& u : manifest.entries) train.push_back(&u);
  }
  for (const auto& u : manifest.entries) symbols.insert(symbols.end(), u.phonemes.begin(), u.phonemes.end());
  if (config.num_mels != manifest.feature_config.num_mels) {
    throw ConfigError("model.num_mels", "does not match the corpus feature config (" +
                                            std::to_string(manifest.feature_config.num_mels) + ")");
  }
  return EditorModel(std::make_shared<EditorModelImpl>(config, Vocabulary(symbols), manifest.speakers,
                                                       compute_model_stats(train)));
}

void save_model(const EditorModel& model, const std::filesystem::path& path, const nlohmann::json& extra_meta) {
  save_checkpoint(path, model->to_checkpoint(extra_meta));
}

EditorModel load_model(const std::filesystem::path& path) {
  return EditorModel(EditorModelImpl::from_checkpoint(load_checkpoint(path)));
}

torch::Tensor encode_text(EditorModel& model, const std::vector<std::string>& phonemes) {
  if (phonemes.empty()) throw InvalidArgument("encode_text: empty phoneme sequence");
  std::vector<std::int64_t> ids;
  for (const auto& p : phonemes) ids.push_back(model->vocabulary().index(p));
  auto tensor = torch::tensor(ids, torch::kInt64).unsqueeze(0);
  auto mask = torch::ones_like(tensor, torch::kBool);
  return model->encode_text(tensor, mask).squeeze(0);
}

std::vector<int> predict_durations(EditorModel& model, const std::vector<std::string>& phonemes, int speaker_index) {
  if (!model->trained()) throw UntrainedError("duration predictor is untrained (run 'train' first)");
  if (speaker_index < 0 || speaker_index >= static_cast<int>(model->speakers().size())) {
    throw VocabularyError("speaker table", std::to_string(speaker_index));
  }
  torch::NoGradGuard no_grad;
  auto enc = encode_text(model, phonemes).unsqueeze(0);
  auto spk = model->speaker_embedding(torch::tensor({static_cast<std::int64_t>(speaker_index)}, torch::kInt64));
  auto mask = torch::ones({1, enc.size(1)}, torch::kBool);
  auto log_d = model->duration_log(enc, spk, mask).squeeze(0);
  std::vector<int> out;
  for (float v : to_vector(log_d)) {
    out.push_back(std::max(1, static_cast<int>(std::lround(std::exp(static_cast<double>(v)) - 1.0))));
  }
  return out;
}

std::vector<float> predict_pitch(EditorModel& model, const AlignedUtterance& utterance, const MaskSpec& spec) {
  if (!model->trained()) throw UntrainedError("pitch predictor is untrained (run 'train' first)");
  spec.validate(utterance.mel.num_frames());
  if (spec.regions.empty()) return utterance.pitch;
  torch::NoGradGuard no_grad;
  const auto batch = make_batch({&utterance}, {spec}, *model);
  auto enc = model->encode_text(batch.phonemes, batch.phone_mask);
  auto spk = model->speaker_embedding(batch.speakers);
  auto hf = length_regulate(enc, batch.durations, batch.mel.size(1));
  auto predicted = model->pitch_from_outputs(
      model->pitch_outputs(hf, spk, batch.pitch, batch.region_mask, batch.frame_mask));
  auto merged = torch::where(batch.region_mask, predicted, batch.pitch).squeeze(0);
  return to_vector(merged);
}

}  // namespace seamless
