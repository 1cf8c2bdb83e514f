#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>

#include <png.h>

#include "seamless/app.hpp"
#include "seamless/error.hpp"

namespace seamless {

namespace {

using Rgb = std::array<std::uint8_t, 3>;

// Piecewise-linear approximation of the viridis colour map.
Rgb colour(double v) {
  static constexpr std::array<std::array<double, 3>, 6> kStops{{{68, 1, 84},
                                                                {65, 68, 135},
                                                                {42, 120, 142},
                                                                {34, 168, 132},
                                                                {122, 209, 81},
                                                                {253, 231, 37}}};
  v = std::clamp(v, 0.0, 1.0) * (kStops.size() - 1);
  const auto i = std::min<std::size_t>(static_cast<std::size_t>(v), kStops.size() - 2);
  const double t = v - static_cast<double>(i);
  Rgb out{};
  for (int c = 0; c < 3; ++c) {
    out[c] = static_cast<std::uint8_t>(std::lround(kStops[i][c] * (1.0 - t) + kStops[i + 1][c] * t));
  }
  return out;
}

constexpr Rgb kOutline{255, 40, 40};
constexpr Rgb kSeparator{255, 255, 255};
constexpr int kGap = 4;

}  // namespace

void write_spectrogram_png(const std::filesystem::path& path, const std::vector<MelSpectrogram>& panels,
                           const std::vector<MaskSpec>& masks, int frame_px, int band_px) {
  if (panels.empty()) throw InvalidArgument("plot: no spectrograms");
  if (frame_px < 1 || band_px < 1) throw InvalidArgument("plot: pixel scale must be positive");
  std::size_t max_frames = 0;
  std::size_t height = 0;
  float lo = std::numeric_limits<float>::infinity();
  float hi = -std::numeric_limits<float>::infinity();
  for (const auto& mel : panels) {
    mel.validate();
    max_frames = std::max(max_frames, mel.num_frames());
    height += mel.num_mels() * static_cast<std::size_t>(band_px);
    for (float v : mel.values()) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  height += kGap * (panels.size() - 1);
  const std::size_t width = max_frames * static_cast<std::size_t>(frame_px);
  const double range = hi > lo ? hi - lo : 1.0;

  std::vector<std::uint8_t> image(width * height * 3, 0);
  auto put = [&](std::size_t x, std::size_t y, Rgb c) {
    if (x >= width || y >= height) return;
    std::copy(c.begin(), c.end(), image.begin() + static_cast<std::ptrdiff_t>((y * width + x) * 3));
  };

  std::size_t top = 0;
  for (std::size_t p = 0; p < panels.size(); ++p) {
    const auto& mel = panels[p];
    const std::size_t panel_h = mel.num_mels() * static_cast<std::size_t>(band_px);
    for (std::size_t f = 0; f < mel.num_frames(); ++f) {
      for (std::size_t m = 0; m < mel.num_mels(); ++m) {
        const auto c = colour((mel.at(f, m) - lo) / range);
        const std::size_t y0 = top + (mel.num_mels() - 1 - m) * band_px;
        for (int dy = 0; dy < band_px; ++dy) {
          for (int dx = 0; dx < frame_px; ++dx) put(f * frame_px + dx, y0 + dy, c);
        }
      }
    }
    if (p < masks.size()) {
      for (const auto& r : masks[p].regions) {
        const std::size_t x0 = r.start_frame * frame_px;
        const std::size_t x1 = r.end_frame * frame_px - 1;
        for (std::size_t x = x0; x <= x1; ++x) {
          put(x, top, kOutline);
          put(x, top + panel_h - 1, kOutline);
        }
        for (std::size_t y = top; y < top + panel_h; ++y) {
          put(x0, y, kOutline);
          put(x1, y, kOutline);
        }
      }
    }
    top += panel_h;
    if (p + 1 < panels.size()) {
      for (int g = 0; g < kGap; ++g) {
        for (std::size_t x = 0; x < width; ++x) put(x, top + g, kSeparator);
      }
      top += kGap;
    }
  }

  FILE* file = std::fopen(path.c_str(), "wb");
  if (!file) throw IoError("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(file);
    throw IoError("libpng failed writing " + path.string());
  }
  png_init_io(png, file);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t y = 0; y < height; ++y) png_write_row(png, image.data() + y * width * 3);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(file);
}

}  // namespace seamless
