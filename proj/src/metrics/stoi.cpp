#include <cmath>
#include <limits>
#include <vector>

#include <fftw3.h>

#include "seamless/audio.hpp"
#include "seamless/error.hpp"
#include "seamless/metrics.hpp"

namespace seamless {

namespace {

constexpr int kRate = 10000;
constexpr int kFrame = 256;
constexpr int kFft = 512;
constexpr int kBands = 15;
constexpr double kMinFreq = 150.0;
constexpr int kSegment = 30;  // 384 ms
constexpr double kBeta = -15.0;
constexpr double kDynamicRange = 40.0;
constexpr double kEps = std::numeric_limits<double>::epsilon();

// Symmetric Hann of length n without its zero endpoints.
std::vector<double> hann_inner(int n) {
  std::vector<double> w(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) w[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * (i + 1) / (n + 1));
  return w;
}

// One-third-octave band matrix over the rfft bins, [bands x (fft/2 + 1)].
std::vector<std::vector<double>> third_octave_bands() {
  const int bins = kFft / 2 + 1;
  std::vector<double> f(static_cast<std::size_t>(bins));
  for (int i = 0; i < bins; ++i) f[i] = static_cast<double>(kRate) * i / kFft;
  auto nearest = [&](double hz) {
    int best = 0;
    for (int i = 1; i < bins; ++i) {
      if ((f[i] - hz) * (f[i] - hz) < (f[best] - hz) * (f[best] - hz)) best = i;
    }
    return best;
  };
  std::vector<std::vector<double>> obm(kBands, std::vector<double>(static_cast<std::size_t>(bins), 0.0));
  for (int k = 0; k < kBands; ++k) {
    const int lo = nearest(kMinFreq * std::pow(2.0, (2.0 * k - 1.0) / 6.0));
    const int hi = nearest(kMinFreq * std::pow(2.0, (2.0 * k + 1.0) / 6.0));
    for (int i = lo; i < hi; ++i) obm[k][i] = 1.0;
  }
  return obm;
}

using Frames = std::vector<std::vector<double>>;

Frames frame_signal(const std::vector<double>& x, const std::vector<double>& w, int hop) {
  Frames frames;
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  for (std::ptrdiff_t i = 0; i < n - kFrame; i += hop) {
    std::vector<double> frame(kFrame);
    for (int j = 0; j < kFrame; ++j) frame[j] = w[j] * x[static_cast<std::size_t>(i + j)];
    frames.push_back(std::move(frame));
  }
  return frames;
}

std::vector<double> overlap_add(const Frames& frames, int hop) {
  if (frames.empty()) return {};
  std::vector<double> out((frames.size() - 1) * hop + kFrame, 0.0);
  for (std::size_t f = 0; f < frames.size(); ++f) {
    for (int j = 0; j < kFrame; ++j) out[f * hop + j] += frames[f][j];
  }
  return out;
}

// Drops frames more than 40 dB below the loudest reference frame, then
// re-synthesises both signals by overlap-add.
void remove_silent_frames(std::vector<double>& x, std::vector<double>& y) {
  const auto w = hann_inner(kFrame);
  const int hop = kFrame / 2;
  const auto xf = frame_signal(x, w, hop);
  const auto yf = frame_signal(y, w, hop);
  std::vector<double> energy(xf.size());
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t f = 0; f < xf.size(); ++f) {
    double sq = 0.0;
    for (double v : xf[f]) sq += v * v;
    energy[f] = 20.0 * std::log10(std::sqrt(sq) + kEps);
    peak = std::max(peak, energy[f]);
  }
  Frames xk, yk;
  for (std::size_t f = 0; f < xf.size(); ++f) {
    if (peak - kDynamicRange - energy[f] < 0.0) {
      xk.push_back(xf[f]);
      yk.push_back(yf[f]);
    }
  }
  x = overlap_add(xk, hop);
  y = overlap_add(yk, hop);
}

// Band envelopes [bands][frames] of the windowed 512-point spectrum, hop 128.
std::vector<std::vector<double>> band_envelopes(const std::vector<double>& x,
                                                const std::vector<std::vector<double>>& obm) {
  const auto w = hann_inner(kFrame);
  const auto frames = frame_signal(x, w, kFrame / 2);
  const int bins = kFft / 2 + 1;
  std::vector<double> buffer(kFft, 0.0);
  std::vector<fftw_complex> spectrum(static_cast<std::size_t>(bins));
  fftw_plan plan = fftw_plan_dft_r2c_1d(kFft, buffer.data(), spectrum.data(), FFTW_ESTIMATE);
  std::vector<std::vector<double>> env(kBands, std::vector<double>(frames.size(), 0.0));
  std::vector<double> power(static_cast<std::size_t>(bins));
  for (std::size_t f = 0; f < frames.size(); ++f) {
    std::fill(buffer.begin(), buffer.end(), 0.0);
    std::copy(frames[f].begin(), frames[f].end(), buffer.begin());
    fftw_execute(plan);
    for (int i = 0; i < bins; ++i) power[i] = spectrum[i][0] * spectrum[i][0] + spectrum[i][1] * spectrum[i][1];
    for (int k = 0; k < kBands; ++k) {
      double acc = 0.0;
      for (int i = 0; i < bins; ++i) acc += obm[k][i] * power[i];
      env[k][f] = std::sqrt(acc);
    }
  }
  fftw_destroy_plan(plan);
  return env;
}

}  // namespace

double stoi(std::span<const float> ref, std::span<const float> test, int sample_rate) {
  if (ref.size() != test.size()) {
    throw InvalidArgument("stoi: signal lengths differ (" + std::to_string(ref.size()) + " vs " +
                          std::to_string(test.size()) + ")");
  }
  bool silent = true;
  for (float v : ref) silent = silent && v == 0.0f;
  if (silent) throw InvalidArgument("stoi: reference signal is silent");

  const auto xr = sample_rate == kRate ? std::vector<float>(ref.begin(), ref.end())
                                       : resample(ref, sample_rate, kRate);
  const auto yr = sample_rate == kRate ? std::vector<float>(test.begin(), test.end())
                                       : resample(test, sample_rate, kRate);
  std::vector<double> x(xr.begin(), xr.end());
  std::vector<double> y(yr.begin(), yr.end());
  remove_silent_frames(x, y);

  static const auto obm = third_octave_bands();
  const auto xe = band_envelopes(x, obm);
  const auto ye = band_envelopes(y, obm);
  const std::size_t frames = xe.front().size();
  if (frames < static_cast<std::size_t>(kSegment)) {
    throw InvalidArgument("stoi: " + std::to_string(frames) + " active frames, need at least " +
                          std::to_string(kSegment));
  }

  const double clip = std::pow(10.0, -kBeta / 20.0);
  double total = 0.0;
  std::size_t count = 0;
  std::vector<double> xs(kSegment), ys(kSegment);
  for (std::size_t m = kSegment; m <= frames; ++m) {
    for (int k = 0; k < kBands; ++k) {
      double xn = 0.0, yn = 0.0;
      for (int j = 0; j < kSegment; ++j) {
        xs[j] = xe[k][m - kSegment + j];
        ys[j] = ye[k][m - kSegment + j];
        xn += xs[j] * xs[j];
        yn += ys[j] * ys[j];
      }
      const double alpha = std::sqrt(xn) / (std::sqrt(yn) + kEps);
      double xm = 0.0, ym = 0.0;
      for (int j = 0; j < kSegment; ++j) {
        ys[j] = std::min(ys[j] * alpha, xs[j] * (1.0 + clip));
        xm += xs[j];
        ym += ys[j];
      }
      xm /= kSegment;
      ym /= kSegment;
      double xx = 0.0, yy = 0.0, xy = 0.0;
      for (int j = 0; j < kSegment; ++j) {
        const double a = xs[j] - xm;
        const double b = ys[j] - ym;
        xx += a * a;
        yy += b * b;
        xy += a * b;
      }
      total += xy / ((std::sqrt(xx) + kEps) * (std::sqrt(yy) + kEps));
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

}  // namespace seamless
