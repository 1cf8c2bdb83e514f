#include "seamless/mel.hpp"

#include <cmath>
#include <cstring>
#include <string>

#include "seamless/error.hpp"

namespace seamless {

MelSpectrogram::MelSpectrogram(std::size_t num_frames, std::size_t num_mels, int hop_length,
                               int win_length)
    : num_frames_(num_frames),
      num_mels_(num_mels),
      hop_length_(hop_length),
      win_length_(win_length),
      values_(num_frames * num_mels, 0.0f) {}

MelSpectrogram::MelSpectrogram(std::size_t num_frames, std::size_t num_mels,
                               std::vector<float> values, int hop_length, int win_length)
    : num_frames_(num_frames),
      num_mels_(num_mels),
      hop_length_(hop_length),
      win_length_(win_length),
      values_(std::move(values)) {
  if (values_.size() != num_frames_ * num_mels_) {
    throw ShapeError("MelSpectrogram: " + std::to_string(values_.size()) + " values for " +
                     std::to_string(num_frames_) + "x" + std::to_string(num_mels_));
  }
}

MelSpectrogram MelSpectrogram::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > num_frames_) {
    throw InvalidArgument("MelSpectrogram::slice: [" + std::to_string(begin) + ", " +
                          std::to_string(end) + ") outside " + std::to_string(num_frames_));
  }
  std::vector<float> out(values_.begin() + static_cast<std::ptrdiff_t>(begin * num_mels_),
                         values_.begin() + static_cast<std::ptrdiff_t>(end * num_mels_));
  return MelSpectrogram(end - begin, num_mels_, std::move(out), hop_length_, win_length_);
}

void MelSpectrogram::append_frames(const MelSpectrogram& other) {
  if (num_frames_ == 0 && num_mels_ == 0) {
    *this = other;
    return;
  }
  if (other.num_mels_ != num_mels_) throw ShapeError("MelSpectrogram::append_frames: band mismatch");
  values_.insert(values_.end(), other.values_.begin(), other.values_.end());
  num_frames_ += other.num_frames_;
}

void MelSpectrogram::validate() const {
  if (num_frames_ == 0) throw InvalidArgument("MelSpectrogram: zero frames");
  if (num_mels_ == 0) throw InvalidArgument("MelSpectrogram: zero mel bands");
  for (float v : values_) {
    if (!std::isfinite(v)) throw InvalidArgument("MelSpectrogram: non-finite entry");
  }
}

bool MelSpectrogram::bit_equal(const MelSpectrogram& other) const {
  return num_frames_ == other.num_frames_ && num_mels_ == other.num_mels_ &&
         hop_length_ == other.hop_length_ && win_length_ == other.win_length_ &&
         std::memcmp(values_.data(), other.values_.data(), values_.size() * sizeof(float)) == 0;
}

}  // namespace seamless
