#pragma once

#include <filesystem>
#include <span>
#include <vector>

namespace seamless {

struct WavData {
  int sample_rate = 0;
  int channels = 0;
  // Interleaved samples scaled to [-1, 1].
  std::vector<float> interleaved;
  std::size_t num_frames() const { return channels == 0 ? 0 : interleaved.size() / channels; }
};

// Reads a RIFF/WAVE file holding 16-bit PCM. Other encodings raise FormatError.
WavData read_wav(const std::filesystem::path& path);

// Writes mono 16-bit PCM (scale 32768, clipped); read_wav inverts it exactly.
void write_wav(const std::filesystem::path& path, std::span<const float> samples, int sample_rate);

// Band-limited (windowed-sinc) sample-rate conversion. Output length is
// round(n * to / from).
std::vector<float> resample(std::span<const float> samples, int from_rate, int to_rate);

// Mono samples at target_rate with amplitude in [-1, 1]. Multi-channel input
// is averaged. Throws IoError / FormatError / InvalidArgument (empty audio).
std::vector<float> load_audio(const std::filesystem::path& path, int target_rate);

}  // namespace seamless
