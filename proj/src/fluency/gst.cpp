#include <algorithm>
#include <cmath>
#include <numeric>

#include "seamless/error.hpp"
#include "seamless/fluency.hpp"
#include "seamless/log.hpp"
#include "seamless/tensor.hpp"

namespace seamless {

nlohmann::json to_json(const GstConfig& c) {
  return {{"num_mels", c.num_mels},     {"conv_channels", c.conv_channels}, {"gru_units", c.gru_units},
          {"num_tokens", c.num_tokens}, {"num_heads", c.num_heads},         {"embedding_dim", c.embedding_dim}};
}

void read_gst_config(JsonReader& r, GstConfig& c) {
  r.read("num_mels", c.num_mels);
  r.read("conv_channels", c.conv_channels);
  r.read("gru_units", c.gru_units);
  r.read("num_tokens", c.num_tokens);
  r.read("num_heads", c.num_heads);
  r.read("embedding_dim", c.embedding_dim);
  if (c.conv_channels.empty()) throw ConfigError(r.path("conv_channels"), "must not be empty");
  for (int ch : c.conv_channels) {
    if (ch <= 0) throw ConfigError(r.path("conv_channels"), "channel counts must be positive");
  }
  if (c.num_heads <= 0 || c.embedding_dim % c.num_heads != 0) {
    throw ConfigError(r.path("num_heads"), "must be positive and divide embedding_dim");
  }
  if (c.num_tokens <= 0) throw ConfigError(r.path("num_tokens"), "must be positive");
  if (c.gru_units <= 0) throw ConfigError(r.path("gru_units"), "must be positive");
}

nlohmann::json to_json(const GstTrainConfig& c) {
  return {{"steps", c.steps},       {"batch_size", c.batch_size}, {"learning_rate", c.learning_rate},
          {"crop_min", c.crop_min}, {"crop_max", c.crop_max},     {"seed", c.seed}};
}

void read_gst_train_config(JsonReader& r, GstTrainConfig& c) {
  r.read("steps", c.steps);
  r.read("batch_size", c.batch_size);
  r.read("learning_rate", c.learning_rate);
  r.read("crop_min", c.crop_min);
  r.read("crop_max", c.crop_max);
  r.read("seed", c.seed);
  if (c.steps < 0) throw ConfigError(r.path("steps"), "must be >= 0");
  if (c.batch_size <= 0) throw ConfigError(r.path("batch_size"), "must be positive");
  if (c.crop_min < 1 || c.crop_max < c.crop_min) throw ConfigError(r.path("crop_max"), "need 1 <= crop_min <= crop_max");
}

GstImpl::GstImpl(GstConfig config) : config_(std::move(config)) {
  int in = 1;
  std::int64_t width = config_.num_mels;
  for (std::size_t i = 0; i < config_.conv_channels.size(); ++i) {
    const int out = config_.conv_channels[i];
    convs_.push_back(register_module("conv" + std::to_string(i),
                                     torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 3).stride(2).padding(1))));
    in = out;
    width = (width - 1) / 2 + 1;
  }
  gru_ = register_module("gru", torch::nn::GRU(torch::nn::GRUOptions(in * width, config_.gru_units).batch_first(true)));
  const auto token_dim = config_.embedding_dim / config_.num_heads;
  tokens_ = register_parameter("tokens", torch::randn({config_.num_tokens, token_dim}) * 0.5);
  query_ = register_module("query", torch::nn::Linear(config_.gru_units, config_.embedding_dim));
  key_ = register_module("key", torch::nn::Linear(token_dim, config_.embedding_dim));
  value_ = register_module("value", torch::nn::Linear(token_dim, config_.embedding_dim));
  mel_mean_ = register_buffer("mel_mean", torch::zeros({config_.num_mels}));
  mel_std_ = register_buffer("mel_std", torch::ones({config_.num_mels}));
}

void GstImpl::set_normalization(const torch::Tensor& mean, const torch::Tensor& stddev) {
  if (mean.numel() != config_.num_mels || stddev.numel() != config_.num_mels) {
    throw ShapeError("GST normalisation needs " + std::to_string(config_.num_mels) + " bands");
  }
  torch::NoGradGuard no_grad;
  mel_mean_.copy_(mean.reshape({-1}));
  mel_std_.copy_(stddev.reshape({-1}).clamp_min(0.05));
}

torch::Tensor GstImpl::forward(const torch::Tensor& mel, const torch::Tensor& lengths) {
  if (mel.dim() != 3 || mel.size(2) != config_.num_mels) {
    throw ShapeError("GST input must be [batch, frames, " + std::to_string(config_.num_mels) + "]");
  }
  auto len = lengths.to(torch::kInt64);
  const auto valid = torch::arange(mel.size(1), len.options()).unsqueeze(0) < len.unsqueeze(1);
  auto x = ((mel - mel_mean_.to(mel.dtype())) / mel_std_.to(mel.dtype())) * valid.unsqueeze(-1).to(mel.dtype());
  x = x.unsqueeze(1);
  for (auto& conv : convs_) {
    x = torch::relu(conv(x));
    len = torch::div(len - 1, 2, "floor") + 1;
    auto keep = torch::arange(x.size(2), len.options()).unsqueeze(0) < len.unsqueeze(1);
    x = x * keep.unsqueeze(1).unsqueeze(-1).to(x.dtype());
  }
  const auto B = x.size(0);
  x = x.permute({0, 2, 1, 3}).reshape({B, x.size(2), -1});
  auto out = std::get<0>(gru_(x));
  auto last = out.gather(1, (len - 1).view({B, 1, 1}).expand({B, 1, out.size(2)})).squeeze(1);

  const auto heads = config_.num_heads;
  const auto dh = config_.embedding_dim / heads;
  auto keys = torch::tanh(tokens_);
  auto q = query_(last).view({B, heads, 1, dh});
  auto k = key_(keys).view({-1, heads, dh}).permute({1, 2, 0});  // [h, dh, N]
  auto v = value_(keys).view({-1, heads, dh}).permute({1, 0, 2});  // [h, N, dh]
  auto weights = torch::softmax(torch::matmul(q, k) / std::sqrt(static_cast<double>(dh)), -1);  // [B, h, 1, N]
  return torch::matmul(weights, v).reshape({B, config_.embedding_dim});
}

void GstImpl::freeze() {
  for (auto& p : parameters()) p.set_requires_grad(false);
  eval();
  frozen_ = true;
}

Checkpoint GstImpl::to_checkpoint(const nlohmann::json& extra_meta) const {
  Checkpoint ck;
  ck.meta = extra_meta.is_object() ? extra_meta : nlohmann::json::object();
  ck.meta["kind"] = "gst";
  ck.meta["gst_config"] = to_json(config_);
  ck.meta["trained"] = trained_;
  ck.meta["frozen"] = frozen_;
  ck.tensors = module_tensors(*this, "gst.");
  return ck;
}

std::shared_ptr<GstImpl> GstImpl::from_checkpoint(const Checkpoint& ck) {
  if (ck.meta.value("kind", "") != "gst") throw FormatError("checkpoint does not hold a prosody extractor");
  GstConfig config;
  JsonReader reader(ck.meta.at("gst_config"), "gst_config");
  read_gst_config(reader, config);
  reader.finish();
  auto gst = std::make_shared<GstImpl>(config);
  assign_module_tensors(*gst, ck, "gst.");
  gst->trained_ = ck.meta.value("trained", false);
  if (ck.meta.value("frozen", false)) gst->freeze();
  return gst;
}

torch::Tensor gst_encode_many(Gst& gst, const std::vector<torch::Tensor>& mels) {
  if (!gst->trained()) throw UntrainedError("prosody extractor is untrained (run 'pretrain-gst' first)");
  if (mels.empty()) throw InvalidArgument("gst_encode_many: no inputs");
  std::int64_t longest = 0;
  for (const auto& m : mels) {
    if (m.dim() != 2 || m.size(0) == 0) throw InvalidArgument("gst_encode: input needs at least one frame");
    longest = std::max(longest, m.size(0));
  }
  std::vector<torch::Tensor> padded;
  std::vector<std::int64_t> lengths;
  for (const auto& m : mels) {
    padded.push_back(torch::constant_pad_nd(m, {0, 0, 0, longest - m.size(0)}));
    lengths.push_back(m.size(0));
  }
  return gst->forward(torch::stack(padded), torch::tensor(lengths, torch::kInt64));
}

torch::Tensor gst_encode(Gst& gst, const torch::Tensor& mel) { return gst_encode_many(gst, {mel}).squeeze(0); }

torch::Tensor gst_encode(Gst& gst, const MelSpectrogram& mel) { return gst_encode(gst, to_tensor(mel)); }

torch::Tensor prosody_consistency_loss(Gst& gst, const torch::Tensor& pred_region, const torch::Tensor& target) {
  if (pred_region.dim() != 2 || pred_region.size(0) == 0) {
    throw InvalidArgument("prosody_consistency_loss: empty predicted region");
  }
  return (gst_encode(gst, pred_region) - target.to(pred_region.dtype())).pow(2).mean();
}

torch::Tensor prosody_consistency_loss_from_mel(Gst& gst, const torch::Tensor& pred_region,
                                                const torch::Tensor& full_gt_mel) {
  torch::Tensor target;
  {
    torch::NoGradGuard no_grad;
    target = gst_encode(gst, full_gt_mel.to(pred_region.dtype()));
  }
  return prosody_consistency_loss(gst, pred_region, target);
}

namespace {

double accuracy(Gst& gst, torch::nn::Linear& head, const std::vector<const AlignedUtterance*>& items) {
  if (items.empty()) return 0.0;
  torch::NoGradGuard no_grad;
  std::size_t correct = 0;
  for (const auto* u : items) {
    auto logits = head(gst->forward(to_tensor(u->mel).unsqueeze(0),
                                    torch::tensor({static_cast<std::int64_t>(u->mel.num_frames())})));
    correct += logits.argmax(-1).item<std::int64_t>() == u->speaker_index;
  }
  return static_cast<double>(correct) / static_cast<double>(items.size());
}

}  // namespace

GstPretrainResult pretrain_gst(const CorpusManifest& manifest, const GstConfig& config, const GstTrainConfig& tc) {
  if (config.num_mels != manifest.feature_config.num_mels) {
    throw ConfigError("gst.num_mels", "does not match the corpus feature config");
  }
  std::vector<int> classes;
  for (const auto& e : manifest.entries) classes.push_back(e.speaker_index);
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  if (classes.size() < 2) {
    throw InvalidArgument("prosody extractor pretraining needs at least two speakers; corpus has " +
                          std::to_string(classes.size()));
  }
  std::vector<const AlignedUtterance*> train, heldout;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const bool is_train = manifest.splits.size() == manifest.entries.size() ? manifest.splits[i] == Split::Train : true;
    (is_train ? train : heldout).push_back(&manifest.entries[i]);
  }
  if (heldout.empty()) {
    train.clear();
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
      (i % 5 == 4 ? heldout : train).push_back(&manifest.entries[i]);
    }
  }
  if (train.empty()) throw InvalidArgument("prosody extractor pretraining: no training items");

  torch::manual_seed(tc.seed);
  Gst gst(config);
  {
    std::vector<torch::Tensor> frames;
    for (const auto* u : train) frames.push_back(to_tensor(u->mel));
    const auto all = torch::cat(frames, 0);
    gst->set_normalization(all.mean(0), all.std(0));
  }
  torch::nn::Linear head(config.embedding_dim, static_cast<std::int64_t>(manifest.speakers.size()));
  std::vector<torch::Tensor> params = gst->parameters();
  for (auto& p : head->parameters()) params.push_back(p);
  torch::optim::Adam optimizer(params, torch::optim::AdamOptions(tc.learning_rate));
  Rng rng(tc.seed);
  gst->train();
  for (int step = 0; step < tc.steps; ++step) {
    std::vector<torch::Tensor> crops;
    std::vector<std::int64_t> labels;
    for (int b = 0; b < tc.batch_size; ++b) {
      const auto* u = train[rng.index(train.size())];
      const auto frames = u->mel.num_frames();
      const auto want = static_cast<std::size_t>(tc.crop_min) + rng.index(static_cast<std::size_t>(tc.crop_max - tc.crop_min + 1));
      const auto length = std::min(want, frames);
      const auto start = rng.index(frames - length + 1);
      crops.push_back(to_tensor(u->mel.slice(start, start + length)));
      labels.push_back(u->speaker_index);
    }
    std::int64_t longest = 0;
    std::vector<std::int64_t> lengths;
    for (auto& c : crops) {
      longest = std::max(longest, c.size(0));
      lengths.push_back(c.size(0));
    }
    for (auto& c : crops) c = torch::constant_pad_nd(c, {0, 0, 0, longest - c.size(0)});
    auto logits = head(gst->forward(torch::stack(crops), torch::tensor(lengths)));
    auto loss = torch::nn::functional::cross_entropy(logits, torch::tensor(labels));
    optimizer.zero_grad();
    loss.backward();
    optimizer.step();
    if ((step + 1) % 100 == 0) log::info("pretrain-gst step ", step + 1, " loss ", loss.item<double>());
  }
  gst->set_trained(true);
  gst->freeze();
  head->eval();
  GstPretrainResult result;
  result.train_accuracy = accuracy(gst, head, train);
  result.heldout_accuracy = accuracy(gst, head, heldout);
  result.heldout_items = heldout.size();
  result.chance = 1.0 / static_cast<double>(classes.size());
  result.gst = gst;
  return result;
}

void save_gst(const Gst& gst, const std::filesystem::path& path, const nlohmann::json& extra_meta) {
  save_checkpoint(path, gst->to_checkpoint(extra_meta));
}

Gst load_gst(const std::filesystem::path& path) { return Gst(GstImpl::from_checkpoint(load_checkpoint(path))); }

}  // namespace seamless
