#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "seamless/mel.hpp"

namespace seamless {

// Mel and pitch extraction parameters. Defaults are HiFiGAN-compatible.
struct FeatureConfig {
  int sample_rate = 22050;
  int n_fft = 1024;
  int win_length = 1024;
  int hop_length = 256;
  int num_mels = 80;
  double fmin = 0.0;
  double fmax = 8000.0;
  double log_floor = 1e-5;
  // Reflect-pad n_fft/2 samples on both sides before framing.
  bool center = true;
  double f0_min = 60.0;
  double f0_max = 500.0;
  // Minimum normalised autocorrelation peak for a frame to count as voiced.
  double voicing_threshold = 0.5;

  bool operator==(const FeatureConfig&) const = default;
};

// floor((len + pad - win) / hop) + 1, with pad = n_fft when centred.
std::size_t expected_frame_count(std::size_t num_samples, const FeatureConfig& config);

// Slaney-style triangular filterbank, [num_mels x (n_fft/2 + 1)] row-major.
std::vector<float> mel_filterbank(int sample_rate, int n_fft, int num_mels, double fmin,
                                  double fmax);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Periodic Hann window of win_length, zero-padded (centred) to n_fft.
std::vector<float> analysis_window(int win_length, int n_fft);

// Short-time Fourier transform. Returns frames x (n_fft/2 + 1) complex bins.
class Stft {
 public:
  Stft(int n_fft, int win_length, int hop_length, bool center);
  ~Stft();
  Stft(const Stft&) = delete;
  Stft& operator=(const Stft&) = delete;

  std::size_t num_bins() const { return static_cast<std::size_t>(n_fft_ / 2 + 1); }
  std::size_t frame_count(std::size_t num_samples) const;

  std::vector<std::complex<float>> forward(std::span<const float> samples) const;
  // Weighted overlap-add inverse; output has `num_samples` samples.
  std::vector<float> inverse(std::span<const std::complex<float>> spectrum, std::size_t num_frames,
                             std::size_t num_samples) const;

 private:
  struct Plans;
  int n_fft_;
  int win_length_;
  int hop_length_;
  bool center_;
  std::vector<float> window_;
  Plans* plans_;
};

// Log-compressed mel spectrogram: log(max(filterbank * |STFT|, floor)).
// Throws InvalidArgument if fewer samples than one window are supplied.
MelSpectrogram compute_mel(std::span<const float> samples, const FeatureConfig& config);

// Per-frame F0 in Hz by normalised autocorrelation; 0 marks unvoiced frames.
// Length equals expected_frame_count(samples.size(), config).
std::vector<float> extract_pitch(std::span<const float> samples, const FeatureConfig& config);

}  // namespace seamless
