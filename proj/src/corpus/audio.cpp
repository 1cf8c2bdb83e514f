#include "seamless/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>
#include <string>

#include "seamless/error.hpp"

namespace seamless {
namespace {

std::uint32_t le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put32(std::ostream& os, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}
void put16(std::ostream& os, std::uint16_t v) {
  const unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
  os.write(reinterpret_cast<const char*>(b), 2);
}

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

}  // namespace

WavData read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open audio file " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw FormatError(path.string() + ": not a RIFF/WAVE file");
  }

  WavData wav;
  int bits = 0;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t size = le32(chunk + 4);
    const std::size_t body = pos + 8;
    const std::size_t available = std::min<std::size_t>(size, bytes.size() - body);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (available < 16) throw FormatError(path.string() + ": truncated fmt chunk");
      std::uint16_t format = le16(bytes.data() + body);
      wav.channels = le16(bytes.data() + body + 2);
      wav.sample_rate = static_cast<int>(le32(bytes.data() + body + 4));
      bits = le16(bytes.data() + body + 14);
      if (format == kFormatExtensible && available >= 26) {
        format = le16(bytes.data() + body + 24);  // first two bytes of the subformat GUID
      }
      if (format != kFormatPcm || bits != 16) {
        throw FormatError(path.string() + ": unsupported encoding (format " +
                          std::to_string(format) + ", " + std::to_string(bits) +
                          " bits); expected 16-bit PCM");
      }
      if (wav.channels < 1) throw FormatError(path.string() + ": zero channels");
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) throw FormatError(path.string() + ": data chunk before fmt chunk");
      const std::size_t count = available / 2;
      wav.interleaved.resize(count);
      for (std::size_t i = 0; i < count; ++i) {
        const auto s = static_cast<std::int16_t>(le16(bytes.data() + body + 2 * i));
        wav.interleaved[i] = static_cast<float>(s) / 32768.0f;
      }
      wav.interleaved.resize(count - count % static_cast<std::size_t>(wav.channels));
      return wav;
    }
    pos = body + size + (size & 1u);
  }
  throw FormatError(path.string() + ": no data chunk");
}

void write_wav(const std::filesystem::path& path, std::span<const float> samples,
               int sample_rate) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  out.write("RIFF", 4);
  put32(out, 36 + data_bytes);
  out.write("WAVEfmt ", 8);
  put32(out, 16);
  put16(out, kFormatPcm);
  put16(out, 1);
  put32(out, static_cast<std::uint32_t>(sample_rate));
  put32(out, static_cast<std::uint32_t>(sample_rate) * 2);
  put16(out, 2);
  put16(out, 16);
  out.write("data", 4);
  put32(out, data_bytes);
  for (float s : samples) {
    const auto q = static_cast<std::int16_t>(std::clamp(std::lrint(s * 32768.0f), -32768L, 32767L));
    put16(out, static_cast<std::uint16_t>(q));
  }
  if (!out) throw IoError("short write to " + path.string());
}

std::vector<float> resample(std::span<const float> samples, int from_rate, int to_rate) {
  if (from_rate <= 0 || to_rate <= 0) throw InvalidArgument("resample: non-positive rate");
  if (from_rate == to_rate) return {samples.begin(), samples.end()};

  const double ratio = static_cast<double>(to_rate) / from_rate;
  const auto out_len = static_cast<std::size_t>(std::llround(samples.size() * ratio));
  const double cutoff = std::min(1.0, ratio);
  constexpr double kZeroCrossings = 16.0;
  constexpr double kBeta = 8.6;
  const double half_width = kZeroCrossings / cutoff;
  const double i0_beta = std::cyl_bessel_i(0.0, kBeta);

  // Kernel sampled at kTableRes points per input sample, linearly interpolated.
  constexpr int kTableRes = 512;
  const auto table_len = static_cast<std::size_t>(std::ceil(half_width * kTableRes)) + 2;
  std::vector<double> kernel(table_len);
  for (std::size_t i = 0; i < table_len; ++i) {
    const double x = static_cast<double>(i) / kTableRes;
    const double r = std::min(1.0, x / half_width);
    const double window = std::cyl_bessel_i(0.0, kBeta * std::sqrt(1.0 - r * r)) / i0_beta;
    const double arg = std::numbers::pi * cutoff * x;
    const double sinc = arg < 1e-12 ? 1.0 : std::sin(arg) / arg;
    kernel[i] = cutoff * sinc * window;
  }

  std::vector<float> out(out_len, 0.0f);
  const auto n = static_cast<std::ptrdiff_t>(samples.size());
  for (std::size_t j = 0; j < out_len; ++j) {
    const double t = static_cast<double>(j) / ratio;
    const auto lo = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(std::ceil(t - half_width)));
    const auto hi = std::min<std::ptrdiff_t>(n - 1, static_cast<std::ptrdiff_t>(std::floor(t + half_width)));
    double acc = 0.0;
    for (std::ptrdiff_t k = lo; k <= hi; ++k) {
      const double pos = std::abs(t - static_cast<double>(k)) * kTableRes;
      const auto idx = static_cast<std::size_t>(pos);
      if (idx + 1 >= table_len) continue;
      const double frac = pos - static_cast<double>(idx);
      acc += samples[static_cast<std::size_t>(k)] * (kernel[idx] + frac * (kernel[idx + 1] - kernel[idx]));
    }
    out[j] = static_cast<float>(acc);
  }
  return out;
}

std::vector<float> load_audio(const std::filesystem::path& path, int target_rate) {
  if (!std::filesystem::exists(path)) throw IoError("audio file not found: " + path.string());
  const WavData wav = read_wav(path);
  const std::size_t frames = wav.num_frames();
  if (frames == 0) throw InvalidArgument(path.string() + ": zero-length audio");

  std::vector<float> mono(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (int c = 0; c < wav.channels; ++c) acc += wav.interleaved[i * wav.channels + c];
    mono[i] = static_cast<float>(acc / wav.channels);
  }
  std::vector<float> out = resample(mono, wav.sample_rate, target_rate);
  for (auto& s : out) s = std::clamp(s, -1.0f, 1.0f);
  return out;
}

}  // namespace seamless
