#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace seamless {

// Frame-major matrix of log mel-band amplitudes, [num_frames x num_mels].
class MelSpectrogram {
 public:
  MelSpectrogram() = default;
  MelSpectrogram(std::size_t num_frames, std::size_t num_mels, int hop_length = 256,
                 int win_length = 1024);
  MelSpectrogram(std::size_t num_frames, std::size_t num_mels, std::vector<float> values,
                 int hop_length = 256, int win_length = 1024);

  std::size_t num_frames() const noexcept { return num_frames_; }
  std::size_t num_mels() const noexcept { return num_mels_; }
  int hop_length() const noexcept { return hop_length_; }
  int win_length() const noexcept { return win_length_; }
  bool empty() const noexcept { return num_frames_ == 0; }

  float at(std::size_t frame, std::size_t band) const { return values_[frame * num_mels_ + band]; }
  float& at(std::size_t frame, std::size_t band) { return values_[frame * num_mels_ + band]; }

  std::span<const float> frame(std::size_t i) const {
    return {values_.data() + i * num_mels_, num_mels_};
  }
  std::span<float> frame(std::size_t i) { return {values_.data() + i * num_mels_, num_mels_}; }

  const std::vector<float>& values() const noexcept { return values_; }
  std::vector<float>& values() noexcept { return values_; }

  // Frames [begin, end) as a new spectrogram with the same metadata.
  MelSpectrogram slice(std::size_t begin, std::size_t end) const;
  void append_frames(const MelSpectrogram& other);

  // Throws InvalidArgument on zero frames or non-finite entries.
  void validate() const;

  // Bitwise comparison of metadata and every stored float.
  bool bit_equal(const MelSpectrogram& other) const;

 private:
  std::size_t num_frames_ = 0;
  std::size_t num_mels_ = 0;
  int hop_length_ = 256;
  int win_length_ = 1024;
  std::vector<float> values_;
};

}  // namespace seamless
