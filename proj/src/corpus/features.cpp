#include "seamless/features.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <string>

#include "seamless/error.hpp"

namespace seamless {
namespace {

// FFTW planning is not thread-safe; execution with new-array functions is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

std::vector<float> reflect_pad(std::span<const float> x, std::size_t pad) {
  const std::size_t n = x.size();
  if (n <= pad) {
    throw InvalidArgument("reflect padding of " + std::to_string(pad) + " needs more than " +
                          std::to_string(n) + " samples");
  }
  std::vector<float> out(n + 2 * pad);
  for (std::size_t i = 0; i < pad; ++i) out[i] = x[pad - i];
  std::copy(x.begin(), x.end(), out.begin() + static_cast<std::ptrdiff_t>(pad));
  for (std::size_t i = 0; i < pad; ++i) out[pad + n + i] = x[n - 2 - i];
  return out;
}

}  // namespace

double hz_to_mel(double hz) {
  constexpr double f_sp = 200.0 / 3.0;
  constexpr double min_log_hz = 1000.0;
  constexpr double min_log_mel = min_log_hz / f_sp;
  const double logstep = std::log(6.4) / 27.0;
  return hz < min_log_hz ? hz / f_sp : min_log_mel + std::log(hz / min_log_hz) / logstep;
}

double mel_to_hz(double mel) {
  constexpr double f_sp = 200.0 / 3.0;
  constexpr double min_log_hz = 1000.0;
  constexpr double min_log_mel = min_log_hz / f_sp;
  const double logstep = std::log(6.4) / 27.0;
  return mel < min_log_mel ? mel * f_sp : min_log_hz * std::exp(logstep * (mel - min_log_mel));
}

std::vector<float> mel_filterbank(int sample_rate, int n_fft, int num_mels, double fmin,
                                  double fmax) {
  if (num_mels < 1 || n_fft < 2 || fmax <= fmin) throw InvalidArgument("mel_filterbank: bad parameters");
  const int bins = n_fft / 2 + 1;
  const double mel_lo = hz_to_mel(fmin);
  const double mel_hi = hz_to_mel(fmax);
  std::vector<double> edges(static_cast<std::size_t>(num_mels) + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) / (num_mels + 1));
  }
  std::vector<float> fb(static_cast<std::size_t>(num_mels) * bins, 0.0f);
  for (int m = 0; m < num_mels; ++m) {
    const double lower = edges[m];
    const double centre = edges[m + 1];
    const double upper = edges[m + 2];
    const double enorm = 2.0 / (upper - lower);
    for (int k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / n_fft;
      const double rise = (f - lower) / (centre - lower);
      const double fall = (upper - f) / (upper - centre);
      const double w = std::max(0.0, std::min(rise, fall));
      fb[static_cast<std::size_t>(m) * bins + k] = static_cast<float>(w * enorm);
    }
  }
  return fb;
}

std::vector<float> analysis_window(int win_length, int n_fft) {
  if (win_length > n_fft) throw InvalidArgument("analysis_window: win_length > n_fft");
  std::vector<float> window(static_cast<std::size_t>(n_fft), 0.0f);
  const int offset = (n_fft - win_length) / 2;
  for (int i = 0; i < win_length; ++i) {
    window[offset + i] = static_cast<float>(0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / win_length));
  }
  return window;
}

std::size_t expected_frame_count(std::size_t num_samples, const FeatureConfig& config) {
  const std::size_t padded = num_samples + (config.center ? static_cast<std::size_t>(config.n_fft) : 0);
  if (padded < static_cast<std::size_t>(config.n_fft)) return 0;
  return (padded - config.n_fft) / config.hop_length + 1;
}

struct Stft::Plans {
  float* time = nullptr;
  fftwf_complex* freq = nullptr;
  fftwf_plan r2c = nullptr;
  fftwf_plan c2r = nullptr;
};

Stft::Stft(int n_fft, int win_length, int hop_length, bool center)
    : n_fft_(n_fft),
      win_length_(win_length),
      hop_length_(hop_length),
      center_(center),
      window_(analysis_window(win_length, n_fft)),
      plans_(new Plans) {
  if (hop_length <= 0) throw InvalidArgument("Stft: hop_length must be positive");
  std::lock_guard lock(planner_mutex());
  plans_->time = fftwf_alloc_real(static_cast<std::size_t>(n_fft));
  plans_->freq = fftwf_alloc_complex(static_cast<std::size_t>(n_fft / 2 + 1));
  plans_->r2c = fftwf_plan_dft_r2c_1d(n_fft, plans_->time, plans_->freq, FFTW_ESTIMATE | FFTW_UNALIGNED);
  plans_->c2r = fftwf_plan_dft_c2r_1d(n_fft, plans_->freq, plans_->time, FFTW_ESTIMATE | FFTW_UNALIGNED);
}

Stft::~Stft() {
  std::lock_guard lock(planner_mutex());
  fftwf_destroy_plan(plans_->r2c);
  fftwf_destroy_plan(plans_->c2r);
  fftwf_free(plans_->time);
  fftwf_free(plans_->freq);
  delete plans_;
}

std::size_t Stft::frame_count(std::size_t num_samples) const {
  const std::size_t padded = num_samples + (center_ ? static_cast<std::size_t>(n_fft_) : 0);
  if (padded < static_cast<std::size_t>(n_fft_)) return 0;
  return (padded - n_fft_) / hop_length_ + 1;
}

std::vector<std::complex<float>> Stft::forward(std::span<const float> samples) const {
  std::vector<float> padded = center_ ? reflect_pad(samples, static_cast<std::size_t>(n_fft_ / 2))
                                      : std::vector<float>(samples.begin(), samples.end());
  const std::size_t frames = frame_count(samples.size());
  const std::size_t bins = num_bins();
  std::vector<std::complex<float>> out(frames * bins);
  std::vector<float> buffer(static_cast<std::size_t>(n_fft_));
  std::vector<std::complex<float>> spectrum(bins);
  for (std::size_t f = 0; f < frames; ++f) {
    const std::size_t start = f * hop_length_;
    for (int i = 0; i < n_fft_; ++i) buffer[i] = padded[start + i] * window_[i];
    fftwf_execute_dft_r2c(plans_->r2c, buffer.data(),
                          reinterpret_cast<fftwf_complex*>(spectrum.data()));
    std::copy(spectrum.begin(), spectrum.end(), out.begin() + static_cast<std::ptrdiff_t>(f * bins));
  }
  return out;
}

std::vector<float> Stft::inverse(std::span<const std::complex<float>> spectrum,
                                 std::size_t num_frames, std::size_t num_samples) const {
  const std::size_t bins = num_bins();
  if (spectrum.size() != num_frames * bins) throw ShapeError("Stft::inverse: spectrum size mismatch");
  const std::size_t pad = center_ ? static_cast<std::size_t>(n_fft_ / 2) : 0;
  const std::size_t total = std::max(num_samples + 2 * pad, (num_frames - 1) * hop_length_ + n_fft_);
  std::vector<double> acc(total, 0.0);
  std::vector<double> norm(total, 0.0);
  std::vector<std::complex<float>> bufc(bins);
  std::vector<float> buffer(static_cast<std::size_t>(n_fft_));
  for (std::size_t f = 0; f < num_frames; ++f) {
    std::copy(spectrum.begin() + static_cast<std::ptrdiff_t>(f * bins),
              spectrum.begin() + static_cast<std::ptrdiff_t>((f + 1) * bins), bufc.begin());
    fftwf_execute_dft_c2r(plans_->c2r, reinterpret_cast<fftwf_complex*>(bufc.data()), buffer.data());
    const std::size_t start = f * hop_length_;
    for (int i = 0; i < n_fft_; ++i) {
      const double w = window_[i];
      acc[start + i] += w * buffer[i] / n_fft_;
      norm[start + i] += w * w;
    }
  }
  std::vector<float> out(num_samples, 0.0f);
  for (std::size_t i = 0; i < num_samples; ++i) {
    const std::size_t j = i + pad;
    if (j < total && norm[j] > 1e-8) out[i] = static_cast<float>(acc[j] / norm[j]);
  }
  return out;
}

MelSpectrogram compute_mel(std::span<const float> samples, const FeatureConfig& config) {
  if (samples.size() < static_cast<std::size_t>(config.win_length)) {
    throw InvalidArgument("compute_mel: " + std::to_string(samples.size()) +
                          " samples is shorter than one window (" +
                          std::to_string(config.win_length) + ")");
  }
  const Stft stft(config.n_fft, config.win_length, config.hop_length, config.center);
  const auto spectrum = stft.forward(samples);
  const std::size_t frames = stft.frame_count(samples.size());
  const std::size_t bins = stft.num_bins();
  const auto fb = mel_filterbank(config.sample_rate, config.n_fft, config.num_mels, config.fmin,
                                 config.fmax);
  const auto mels = static_cast<std::size_t>(config.num_mels);

  MelSpectrogram mel(frames, mels, config.hop_length, config.win_length);
  std::vector<float> magnitude(bins);
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t k = 0; k < bins; ++k) magnitude[k] = std::abs(spectrum[f * bins + k]);
    for (std::size_t m = 0; m < mels; ++m) {
      double acc = 0.0;
      const float* row = fb.data() + m * bins;
      for (std::size_t k = 0; k < bins; ++k) acc += static_cast<double>(row[k]) * magnitude[k];
      mel.at(f, m) = static_cast<float>(std::log(std::max(acc, config.log_floor)));
    }
  }
  return mel;
}

std::vector<float> extract_pitch(std::span<const float> samples, const FeatureConfig& config) {
  const std::size_t frames = expected_frame_count(samples.size(), config);
  std::vector<float> f0(frames, 0.0f);
  const auto window = static_cast<std::ptrdiff_t>(config.n_fft);
  const auto min_lag = static_cast<std::ptrdiff_t>(std::floor(config.sample_rate / config.f0_max));
  const auto max_lag = std::min<std::ptrdiff_t>(
      static_cast<std::ptrdiff_t>(std::ceil(config.sample_rate / config.f0_min)), window / 2);
  const auto n = static_cast<std::ptrdiff_t>(samples.size());
  constexpr double kSilenceEnergy = 1e-8;

  std::vector<double> x(static_cast<std::size_t>(window));
  std::vector<double> prefix(static_cast<std::size_t>(window) + 1);
  std::vector<double> r(static_cast<std::size_t>(max_lag) + 2, 0.0);
  for (std::size_t f = 0; f < frames; ++f) {
    const std::ptrdiff_t centre = config.center ? static_cast<std::ptrdiff_t>(f) * config.hop_length
                                                : static_cast<std::ptrdiff_t>(f) * config.hop_length + window / 2;
    double mean = 0.0;
    for (std::ptrdiff_t i = 0; i < window; ++i) {
      const std::ptrdiff_t s = centre - window / 2 + i;
      x[i] = (s >= 0 && s < n) ? samples[s] : 0.0;
      mean += x[i];
    }
    mean /= static_cast<double>(window);
    prefix[0] = 0.0;
    for (std::ptrdiff_t i = 0; i < window; ++i) {
      x[i] -= mean;
      prefix[i + 1] = prefix[i] + x[i] * x[i];
    }
    if (prefix[window] / static_cast<double>(window) < kSilenceEnergy) continue;

    double best = -1.0;
    for (std::ptrdiff_t lag = min_lag; lag <= max_lag + 1 && lag < window; ++lag) {
      double dot = 0.0;
      for (std::ptrdiff_t i = 0; i + lag < window; ++i) dot += x[i] * x[i + lag];
      const double e0 = prefix[window - lag];
      const double e1 = prefix[window] - prefix[lag];
      r[lag] = (e0 > 0.0 && e1 > 0.0) ? dot / std::sqrt(e0 * e1) : 0.0;
      if (lag <= max_lag) best = std::max(best, r[lag]);
    }
    if (best < config.voicing_threshold) continue;

    // Smallest-lag local maximum within 90% of the global peak avoids octave-down errors.
    std::ptrdiff_t pick = -1;
    for (std::ptrdiff_t lag = std::max<std::ptrdiff_t>(min_lag + 1, 1); lag <= max_lag; ++lag) {
      if (r[lag] >= 0.9 * best && r[lag] >= r[lag - 1] && r[lag] >= r[lag + 1]) {
        pick = lag;
        break;
      }
    }
    if (pick < 0) continue;
    const double a = r[pick - 1], b = r[pick], c = r[pick + 1];
    const double denom = a - 2.0 * b + c;
    const double shift = std::abs(denom) > 1e-12 ? 0.5 * (a - c) / denom : 0.0;
    f0[f] = static_cast<float>(config.sample_rate / (static_cast<double>(pick) + std::clamp(shift, -0.5, 0.5)));
  }
  return f0;
}

}  // namespace seamless
