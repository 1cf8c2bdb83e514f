#include "seamless/metrics.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <memory>
#include <random>
#include <regex>

#include "seamless/audio.hpp"
#include "seamless/error.hpp"
#include "seamless/log.hpp"

namespace seamless {

namespace {

constexpr double kMcdScale = 10.0 / 2.302585092994045684;  // 10 / ln 10

}  // namespace

std::vector<double> mel_cepstrum(std::span<const float> log_mel, int order) {
  const auto m = static_cast<int>(log_mel.size());
  if (m < 2) throw InvalidArgument("mel_cepstrum: need at least two mel bands");
  const int dims = std::min(order, m - 1);
  std::vector<double> c(static_cast<std::size_t>(dims));
  const double scale = std::sqrt(2.0 / m);
  for (int k = 1; k <= dims; ++k) {
    double acc = 0.0;
    for (int i = 0; i < m; ++i) acc += log_mel[i] * std::cos(M_PI * k * (2.0 * i + 1.0) / (2.0 * m));
    c[k - 1] = scale * acc;
  }
  return c;
}

double mcd_cepstra(const std::vector<std::vector<double>>& ref, const std::vector<std::vector<double>>& test) {
  if (ref.size() != test.size()) {
    throw ShapeError("mcd: " + std::to_string(ref.size()) + " reference frames vs " +
                     std::to_string(test.size()) + " test frames");
  }
  if (ref.empty()) throw InvalidArgument("mcd: no frames");
  double total = 0.0;
  for (std::size_t f = 0; f < ref.size(); ++f) {
    if (ref[f].size() != test[f].size()) throw ShapeError("mcd: cepstral order mismatch");
    double sq = 0.0;
    for (std::size_t k = 0; k < ref[f].size(); ++k) {
      const double d = ref[f][k] - test[f][k];
      sq += d * d;
    }
    total += kMcdScale * std::sqrt(2.0 * sq);
  }
  return total / static_cast<double>(ref.size());
}

namespace {

double mcd_over(const MelSpectrogram& ref, const MelSpectrogram& test, const std::vector<std::size_t>& frames,
                int order) {
  if (ref.num_frames() != test.num_frames() || ref.num_mels() != test.num_mels()) {
    throw ShapeError("mcd: spectrogram shapes differ (" + std::to_string(ref.num_frames()) + "x" +
                     std::to_string(ref.num_mels()) + " vs " + std::to_string(test.num_frames()) + "x" +
                     std::to_string(test.num_mels()) + ")");
  }
  std::vector<std::vector<double>> a, b;
  a.reserve(frames.size());
  b.reserve(frames.size());
  for (const auto f : frames) {
    a.push_back(mel_cepstrum(ref.frame(f), order));
    b.push_back(mel_cepstrum(test.frame(f), order));
  }
  return mcd_cepstra(a, b);
}

}  // namespace

double mcd(const MelSpectrogram& ref, const MelSpectrogram& test, int order) {
  std::vector<std::size_t> frames(ref.num_frames());
  for (std::size_t i = 0; i < frames.size(); ++i) frames[i] = i;
  return mcd_over(ref, test, frames, order);
}

double masked_mcd(const MelSpectrogram& ref, const MelSpectrogram& test, const MaskSpec& spec, int order) {
  spec.validate(ref.num_frames());
  std::vector<std::size_t> frames;
  for (const auto& r : spec.regions) {
    for (std::size_t f = r.start_frame; f < r.end_frame; ++f) frames.push_back(f);
  }
  return mcd_over(ref, test, frames, order);
}

PesqAdapter PesqAdapter::from_environment() {
  const char* value = std::getenv("SEAMLESS_PESQ");
  return PesqAdapter(value ? std::string(value) : std::string());
}

std::optional<double> PesqAdapter::score(std::span<const float> ref, std::span<const float> test,
                                         int sample_rate) const {
  if (!available()) return std::nullopt;
  constexpr int kRate = 16000;
  const auto dir = std::filesystem::temp_directory_path() /
                   ("seamless-pesq-" + std::to_string(std::random_device{}()));
  std::filesystem::create_directories(dir);
  const auto ref_path = dir / "ref.wav";
  const auto deg_path = dir / "deg.wav";
  std::optional<double> result;
  try {
    write_wav(ref_path, resample(ref, sample_rate, kRate), kRate);
    write_wav(deg_path, resample(test, sample_rate, kRate), kRate);
    const std::string cmd = command_ + " '" + ref_path.string() + "' '" + deg_path.string() + "' 2>/dev/null";
    std::string output;
    if (FILE* pipe = popen(cmd.c_str(), "r")) {
      std::array<char, 256> buffer{};
      while (std::fgets(buffer.data(), buffer.size(), pipe)) output += buffer.data();
      const int status = pclose(pipe);
      if (status == 0) {
        static const std::regex number(R"([-+]?\d+(\.\d+)?([eE][-+]?\d+)?)");
        for (auto it = std::sregex_iterator(output.begin(), output.end(), number); it != std::sregex_iterator();
             ++it) {
          result = std::stod(it->str());
        }
      }
    }
  } catch (const Error& e) {
    log::warn("pesq: ", e.what());
    result.reset();
  }
  std::filesystem::remove_all(dir);
  if (!result) log::warn("pesq: scorer failed, utterance skipped");
  return result;
}

}  // namespace seamless
