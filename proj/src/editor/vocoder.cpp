#include <cmath>
#include <complex>
#include <cstdlib>
#include <random>

#include <torch/torch.h>

#include "seamless/audio.hpp"
#include "seamless/editor.hpp"
#include "seamless/error.hpp"

namespace seamless {

GriffinLimVocoder::GriffinLimVocoder(FeatureConfig features, GriffinLimConfig config)
    : features_(features), config_(config) {
  if (config_.iterations < 0) throw InvalidArgument("griffin-lim: iterations must be >= 0");
  const auto fb = mel_filterbank(features_.sample_rate, features_.n_fft, features_.num_mels, features_.fmin,
                                 features_.fmax);
  const auto bins = static_cast<std::int64_t>(features_.n_fft / 2 + 1);
  auto basis = torch::from_blob(const_cast<float*>(fb.data()), {features_.num_mels, bins}, torch::kFloat32)
                   .to(torch::kFloat64);
  auto inverse = torch::linalg_pinv(basis).to(torch::kFloat32).contiguous();  // [bins, mels]
  inverse_basis_.assign(inverse.data_ptr<float>(), inverse.data_ptr<float>() + inverse.numel());
}

std::vector<float> GriffinLimVocoder::vocode(const MelSpectrogram& mel) {
  mel.validate();
  if (mel.num_mels() != static_cast<std::size_t>(features_.num_mels)) {
    throw ShapeError("griffin-lim: mel has " + std::to_string(mel.num_mels()) + " bands, expected " +
                     std::to_string(features_.num_mels));
  }
  const std::size_t frames = mel.num_frames();
  const std::size_t mels = mel.num_mels();
  const std::size_t hop = static_cast<std::size_t>(features_.hop_length);
  const std::size_t num_samples = (frames - 1) * hop;
  const Stft stft(features_.n_fft, features_.win_length, features_.hop_length, features_.center);
  const std::size_t bins = stft.num_bins();

  std::vector<float> magnitude(frames * bins);
  std::vector<double> linear(mels);
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t m = 0; m < mels; ++m) linear[m] = std::exp(static_cast<double>(mel.at(f, m)));
    for (std::size_t k = 0; k < bins; ++k) {
      double acc = 0.0;
      const float* row = inverse_basis_.data() + k * mels;
      for (std::size_t m = 0; m < mels; ++m) acc += row[m] * linear[m];
      magnitude[f * bins + k] = static_cast<float>(std::max(acc, 0.0));
    }
  }

  std::mt19937_64 engine(config_.phase_seed);
  std::uniform_real_distribution<float> phase(0.0f, 2.0f * static_cast<float>(M_PI));
  std::vector<std::complex<float>> angles(frames * bins);
  for (auto& a : angles) a = std::polar(1.0f, phase(engine));

  auto synthesize = [&](const std::vector<std::complex<float>>& unit) {
    std::vector<std::complex<float>> spec(frames * bins);
    for (std::size_t i = 0; i < spec.size(); ++i) spec[i] = magnitude[i] * unit[i];
    return stft.inverse(spec, frames, num_samples);
  };

  const auto momentum = static_cast<float>(config_.momentum / (1.0 + config_.momentum));
  std::vector<std::complex<float>> previous(frames * bins, {0.0f, 0.0f});
  for (int it = 0; it < config_.iterations; ++it) {
    const auto signal = synthesize(angles);
    auto rebuilt = stft.forward(signal);
    rebuilt.resize(frames * bins, {0.0f, 0.0f});
    for (std::size_t i = 0; i < angles.size(); ++i) {
      const auto a = rebuilt[i] - momentum * previous[i];
      const float norm = std::abs(a);
      angles[i] = norm > 1e-16f ? a / norm : std::complex<float>(1.0f, 0.0f);
    }
    previous = std::move(rebuilt);
  }
  return synthesize(angles);
}

ExternalVocoder::ExternalVocoder(std::string command, FeatureConfig features)
    : command_(std::move(command)), features_(features) {
  if (command_.empty()) throw InvalidArgument("external vocoder: empty command");
}

std::vector<float> ExternalVocoder::vocode(const MelSpectrogram& mel) {
  mel.validate();
  const auto dir = std::filesystem::temp_directory_path() /
                   ("seamless-vocoder-" + std::to_string(std::random_device{}()));
  std::filesystem::create_directories(dir);
  const auto mel_path = dir / "mel.bin";
  const auto wav_path = dir / "out.wav";
  write_float_array(mel_path, {mel.num_frames(), mel.num_mels()}, mel.values());
  const std::string cmd = command_ + " '" + mel_path.string() + "' '" + wav_path.string() + "'";
  const int status = std::system(cmd.c_str());
  if (status != 0) {
    std::filesystem::remove_all(dir);
    throw Error("external vocoder failed with status " + std::to_string(status) + ": " + cmd);
  }
  auto samples = load_audio(wav_path, features_.sample_rate);
  std::filesystem::remove_all(dir);
  return samples;
}

std::vector<float> vocode(const MelSpectrogram& mel, const FeatureConfig& features, const GriffinLimConfig& config) {
  GriffinLimVocoder vocoder(features, config);
  return vocoder.vocode(mel);
}

}  // namespace seamless
