#include <cmath>
#include <fstream>

#include "doctest.h"
#include "model_fixtures.hpp"
#include "seamless/error.hpp"
#include "seamless/model.hpp"
#include "seamless/tensor.hpp"
#include "test_helpers.hpp"

using namespace seamless;
using namespace seamless::testing;

namespace {

const CorpusManifest& corpus() {
  static const CorpusManifest m = synth_corpus(6, 11, small_features());
  return m;
}

EditorModel tiny_model(std::uint64_t seed = 3) {
  torch::manual_seed(seed);
  auto model = make_model(tiny_model_config(), corpus());
  model->eval();
  return model;
}

}  // namespace

TEST_CASE("encode_text: shape, determinism and vocabulary errors") {
  auto model = tiny_model();
  torch::NoGradGuard no_grad;
  const std::vector<std::string> seven{"sil", "M", "UW", "N", "AA", "S", "sil"};
  auto a = encode_text(model, seven);
  CHECK(a.size(0) == 7);
  CHECK(a.size(1) == 32);
  CHECK(torch::equal(a, encode_text(model, seven)));
  try {
    encode_text(model, {"sil", "ZZZ"});
    FAIL("expected a vocabulary error");
  } catch (const VocabularyError& e) {
    CHECK(e.symbol() == "ZZZ");
  }
  CHECK_THROWS_AS(encode_text(model, {}), InvalidArgument);
}

TEST_CASE("length_regulate: repetition contract") {
  auto enc = torch::arange(6, torch::kFloat32).reshape({3, 2});
  CHECK(torch::equal(length_regulate(enc, std::vector<int>{1, 1, 1}), enc));
  auto two = length_regulate(enc.slice(0, 0, 2), std::vector<int>{2, 3});
  REQUIRE(two.size(0) == 5);
  const std::vector<int> expected_rows{0, 0, 1, 1, 1};
  for (int i = 0; i < 5; ++i) CHECK(torch::equal(two[i], enc[expected_rows[i]]));
  CHECK(length_regulate(enc, std::vector<int>{0, 2, 1}).size(0) == 3);
  CHECK_THROWS_AS(length_regulate(enc, std::vector<int>{1, -1, 1}), InvalidArgument);
  CHECK_THROWS_AS(length_regulate(enc, std::vector<int>{1, 1}), ShapeError);

  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = 1 + static_cast<std::int64_t>(rng.index(9));
    std::vector<int> d;
    int total = 0;
    for (std::int64_t i = 0; i < p; ++i) {
      d.push_back(static_cast<int>(rng.index(5)));
      total += d.back();
    }
    auto x = torch::randn({p, 4});
    auto single = length_regulate(x, d);
    CHECK(single.size(0) == total);
    auto batched = length_regulate(x.unsqueeze(0), torch::tensor(std::vector<std::int64_t>(d.begin(), d.end())).unsqueeze(0),
                                   total + 3);
    CHECK(torch::equal(batched[0].slice(0, 0, total), single));
    CHECK(batched[0].slice(0, total).abs().sum().item<float>() == 0.0f);
  }
}

TEST_CASE("quantize_pitch: unvoiced bin and log spacing") {
  auto bins = quantize_pitch(torch::tensor({0.0f, 50.0f, 101.0f, 205.0f, 799.0f, 5000.0f}), 256, 50.0, 800.0);
  auto b = bins.accessor<std::int64_t, 1>();
  CHECK(b[0] == 0);
  CHECK(b[1] == 1);
  // floor(log(f / 50) / log(16) * 256) + 1
  CHECK(b[2] == 65);
  CHECK(b[3] == 131);
  CHECK(b[4] == 256);
  CHECK(b[5] == 256);
}

TEST_CASE("build_condition: shapes, identity masking and speakers") {
  auto model = tiny_model();
  torch::NoGradGuard no_grad;
  const auto& u0 = corpus().entries[0];
  const auto& u1 = corpus().entries[1];
  REQUIRE(u0.speaker_index != u1.speaker_index);
  const auto batch = make_batch({&u0, &u1}, {MaskSpec{}, MaskSpec{{{3, 9, 1, 1}}, 0.5}}, *model);
  Rng rng(1);
  auto cond = model->build_condition(batch, batch.pitch, rng);
  const auto F = batch.mel.size(1);
  CHECK(cond.frame_linguistic.size(1) == F);
  CHECK(cond.masked_mel.size(1) == F);
  CHECK(cond.pitch_embedding.size(1) == F);
  CHECK(cond.projected.size(1) == F);
  CHECK(torch::equal(cond.masked_mel[0], cond.reference_mel[0]));
  CHECK_FALSE(torch::equal(cond.masked_mel[1].slice(0, 3, 9), cond.reference_mel[1].slice(0, 3, 9)));
  CHECK(torch::equal(cond.masked_mel[1].slice(0, 0, 3), cond.reference_mel[1].slice(0, 0, 3)));
  CHECK_FALSE(torch::equal(cond.speaker_embedding[0], cond.speaker_embedding[1]));

  AlignedUtterance stranger = u0;
  stranger.utterance.speaker_id = "nobody";
  CHECK_THROWS_AS(make_batch({&stranger}, {MaskSpec{}}, *model), VocabularyError);
}

TEST_CASE("denoise: shape contract, stability and argument checks") {
  auto model = tiny_model();
  torch::NoGradGuard no_grad;
  const auto& u = corpus().entries[2];
  const auto batch = make_batch({&u}, {MaskSpec{{{0, 5, 0, 0}}, 0.5}}, *model);
  Rng rng(2);
  auto cond = model->build_condition(batch, batch.pitch, rng);
  const auto F = batch.mel.size(1);
  auto y = torch::randn({1, F, 8});
  auto out = model->denoise(y, torch::tensor({3}, torch::kInt64), cond);
  CHECK(out.sizes() == y.sizes());
  CHECK(torch::equal(out, model->denoise(y, torch::tensor({3}, torch::kInt64), cond)));
  auto big = model->denoise(y * 1000.0, torch::tensor({7}, torch::kInt64), cond);
  CHECK(torch::isfinite(big).all().item<bool>());
  CHECK_THROWS_AS(model->denoise(y, torch::tensor({8}, torch::kInt64), cond), InvalidArgument);
  CHECK_THROWS_AS(model->denoise(torch::randn({1, F + 1, 8}), torch::tensor({0}, torch::kInt64), cond), ShapeError);
}

TEST_CASE("denoiser: parameter gradients match central differences") {
  torch::manual_seed(9);
  auto config = tiny_model_config();
  config.denoiser_channels = 8;
  config.denoiser_layers = 2;
  config.d_model = 8;
  Denoiser net(config);
  // The zero-initialised output layer would hide upstream gradients.
  {
    torch::NoGradGuard no_grad;
    for (auto& p : net->parameters()) p.copy_(torch::randn_like(p) * 0.3);
  }
  net->to(torch::kFloat64);
  auto y = torch::randn({1, 4, 8}, torch::kFloat64);
  auto cond = torch::randn({1, 4, 8}, torch::kFloat64);
  auto mask = torch::ones({1, 4}, torch::kBool);
  auto t = torch::tensor({2}, torch::kInt64);
  auto weights = torch::randn({1, 4, 8}, torch::kFloat64);
  auto objective = [&] { return (net->forward(y, t, cond, mask) * weights).sum(); };

  net->zero_grad();
  objective().backward();
  Rng rng(5);
  int checked = 0;
  for (auto& p : net->parameters()) {
    auto flat = p.data().view(-1);
    auto grad = p.grad().view(-1);
    for (int k = 0; k < 3; ++k) {
      const auto i = static_cast<std::int64_t>(rng.index(static_cast<std::size_t>(flat.numel())));
      const double original = flat[i].item<double>();
      const double eps = 1e-6;
      double up, down;
      {
        torch::NoGradGuard no_grad;
        flat[i] = original + eps;
        up = objective().item<double>();
        flat[i] = original - eps;
        down = objective().item<double>();
        flat[i] = original;
      }
      const double numeric = (up - down) / (2 * eps);
      const double analytic = grad[i].item<double>();
      const double rel = std::abs(numeric - analytic) / std::max({std::abs(numeric), std::abs(analytic), 1e-6});
      CHECK(rel < 1e-3);
      ++checked;
    }
  }
  CHECK(checked > 20);
}

TEST_CASE("checkpoint: bit-exact round trip and version refusal") {
  auto model = tiny_model(21);
  model->set_trained(true);
  const auto dir = scratch_dir("model_ck");
  save_model(model, dir / "m.ckpt", {{"config_hash", "abc"}});
  auto back = load_model(dir / "m.ckpt");
  back->eval();
  CHECK(back->trained());
  CHECK(back->config() == model->config());
  CHECK(back->vocabulary().symbols() == model->vocabulary().symbols());
  for (const auto& [name, tensor] : model->to_checkpoint().tensors) {
    CHECK(torch::equal(tensor, back->to_checkpoint().tensor(name)));
  }
  torch::NoGradGuard no_grad;
  const auto& u = corpus().entries[0];
  const MaskSpec spec{{{2, 10, 1, 2}}, 0.5};
  Rng r1(8), r2(8);
  auto c1 = model->build_condition(make_batch({&u}, {spec}, *model), make_batch({&u}, {spec}, *model).pitch, r1);
  auto c2 = back->build_condition(make_batch({&u}, {spec}, *back), make_batch({&u}, {spec}, *back).pitch, r2);
  auto y = torch::randn({1, c1.num_frames(), 8});
  auto t = torch::tensor({5}, torch::kInt64);
  CHECK(torch::equal(model->denoise(y, t, c1), back->denoise(y, t, c2)));
  CHECK(load_checkpoint(dir / "m.ckpt").meta.at("config_hash") == "abc");

  {
    std::fstream f(dir / "m.ckpt", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(4);
    const std::uint32_t bogus = 99;
    f.write(reinterpret_cast<const char*>(&bogus), 4);
  }
  CHECK_THROWS_AS(load_model(dir / "m.ckpt"), FormatError);
  CHECK_THROWS_AS(load_model(dir / "missing.ckpt"), IoError);
}

TEST_CASE("predictors: untrained flag and identity pitch") {
  auto model = tiny_model();
  const auto& u = corpus().entries[0];
  CHECK_THROWS_AS(predict_durations(model, u.phonemes, 0), UntrainedError);
  CHECK_THROWS_AS(predict_pitch(model, u, MaskSpec{}), UntrainedError);
  model->set_trained(true);
  CHECK(predict_pitch(model, u, MaskSpec{}) == u.pitch);
  const auto d = predict_durations(model, u.phonemes, 0);
  CHECK(d.size() == u.phonemes.size());
  for (int v : d) CHECK(v >= 1);
  CHECK(d == predict_durations(model, u.phonemes, 0));

  AlignedUtterance silent = u;
  std::fill(silent.pitch.begin(), silent.pitch.end(), 0.0f);
  const auto f0 = predict_pitch(model, silent, MaskSpec{{{4, 12, 1, 2}}, 0.5});
  for (float v : f0) CHECK(std::isfinite(v));
}

TEST_CASE("ModelConfig: JSON round trip and strict keys") {
  auto c = tiny_model_config();
  ModelConfig back;
  const auto json = to_json(c);
  JsonReader reader(json);
  read_model_config(reader, back);
  reader.finish();
  CHECK(back == c);
  auto bad = to_json(c);
  bad["d_modle"] = 3;
  JsonReader strict(bad, "model");
  ModelConfig ignored;
  read_model_config(strict, ignored);
  CHECK_THROWS_AS(strict.finish(), ConfigError);
  auto odd = to_json(c);
  odd["encoder_heads"] = 3;
  JsonReader odd_reader(odd);
  CHECK_THROWS_AS(read_model_config(odd_reader, ignored), ConfigError);
}
