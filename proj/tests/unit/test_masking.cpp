#include <cstring>

#include "doctest.h"
#include "seamless/error.hpp"
#include "seamless/masking.hpp"

using namespace seamless;

namespace {

AlignedUtterance toy_utterance(std::vector<int> durations, std::size_t num_mels = 8) {
  AlignedUtterance u;
  u.utterance.id = "toy";
  std::size_t frames = 0;
  for (int d : durations) frames += static_cast<std::size_t>(d);
  u.durations = std::move(durations);
  for (std::size_t k = 0; k < u.durations.size(); ++k) u.phonemes.push_back("AA");
  u.mel = MelSpectrogram(frames, num_mels);
  for (std::size_t i = 0; i < u.mel.values().size(); ++i) u.mel.values()[i] = std::sin(0.37f * i);
  u.pitch.assign(frames, 0.0f);
  return u;
}

bool frames_equal(const MelSpectrogram& a, const MelSpectrogram& b, std::size_t f) {
  return std::memcmp(a.frame(f).data(), b.frame(f).data(), a.num_mels() * sizeof(float)) == 0;
}

}  // namespace

TEST_CASE("sample_mask_spans: degenerate rates") {
  const auto u = toy_utterance({5, 10, 3, 12, 7});
  Rng rng(1);
  CHECK(sample_mask_spans(u, 0.0, rng).regions.empty());
  const auto full = sample_mask_spans(u, 1.0, rng);
  REQUIRE(full.regions.size() == 1);
  CHECK(full.regions[0] == MaskRegion{0, 37, 0, 4});
  CHECK_THROWS_AS(sample_mask_spans(u, 1.5, rng), InvalidArgument);
  CHECK_THROWS_AS(sample_mask_spans(u, -0.1, rng), InvalidArgument);
}

TEST_CASE("sample_mask_spans: masked fraction, alignment and determinism") {
  // 100 frames over 14 phonemes of uneven length.
  const auto u = toy_utterance({3, 9, 4, 12, 6, 2, 10, 8, 5, 11, 7, 4, 13, 6});
  const auto offsets = u.phone_offsets();
  REQUIRE(offsets.back() == 100);
  Rng rng(2024);
  double fraction_sum = 0.0;
  std::size_t regions_seen = 0, aligned = 0;
  for (int draw = 0; draw < 1000; ++draw) {
    const auto spec = sample_mask_spans(u, 0.8, rng);
    CHECK_NOTHROW(spec.validate(100));
    fraction_sum += static_cast<double>(spec.masked_frames()) / 100.0;
    for (const auto& r : spec.regions) {
      ++regions_seen;
      aligned += offsets[r.first_phone] == r.start_frame && offsets[r.last_phone + 1] == r.end_frame;
    }
  }
  const double mean = fraction_sum / 1000.0;
  CHECK(mean >= 0.78);
  CHECK(mean <= 0.82);
  CHECK(aligned == regions_seen);

  Rng a(9), b(9);
  for (int i = 0; i < 20; ++i) CHECK(sample_mask_spans(u, 0.5, a) == sample_mask_spans(u, 0.5, b));
}

TEST_CASE("regions_from_phone_flags: merging and zero durations") {
  const auto spec = regions_from_phone_flags({2, 3, 0, 4, 1}, {true, true, false, true, false}, 0.5);
  REQUIRE(spec.regions.size() == 1);
  CHECK(spec.regions[0] == MaskRegion{0, 9, 0, 3});
  const auto split = regions_from_phone_flags({2, 3, 4, 1}, {true, false, true, true}, 0.5);
  REQUIRE(split.regions.size() == 2);
  CHECK(split.regions[0] == MaskRegion{0, 2, 0, 0});
  CHECK(split.regions[1] == MaskRegion{5, 10, 2, 3});
  CHECK(regions_from_phone_flags({0, 3}, {true, false}, 0.5).regions.empty());
}

TEST_CASE("apply_mask: locality and bit preservation") {
  const auto u = toy_utterance(std::vector<int>(10, 10));
  Rng rng(5);
  CHECK(apply_mask(u.mel, MaskSpec{}, rng).bit_equal(u.mel));

  MaskSpec one{{MaskRegion{10, 20, 1, 1}}, 0.1};
  const auto masked = apply_mask(u.mel, one, rng);
  for (std::size_t f = 0; f < 100; ++f) {
    if (f >= 10 && f < 20) {
      CHECK_FALSE(frames_equal(masked, u.mel, f));
    } else {
      CHECK(frames_equal(masked, u.mel, f));
    }
  }

  MaskSpec full{{MaskRegion{0, 100, 0, 9}}, 1.0};
  const auto noise = apply_mask(u.mel, full, rng);
  double sum = 0.0, sq = 0.0;
  for (std::size_t f = 0; f < 100; ++f) {
    CHECK_FALSE(frames_equal(noise, u.mel, f));
    for (float v : noise.frame(f)) {
      sum += v;
      sq += v * v;
    }
  }
  const double n = 800.0;
  CHECK(std::abs(sum / n) < 0.15);
  CHECK(std::abs(sq / n - (sum / n) * (sum / n) - 1.0) < 0.15);

  CHECK_THROWS_AS(apply_mask(u.mel, MaskSpec{{MaskRegion{90, 110, 9, 9}}, 0.1}, rng), InvalidArgument);
}

TEST_CASE("apply_mask: random specs never touch context frames") {
  Rng rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> durations;
    for (int k = 0; k < 12; ++k) durations.push_back(static_cast<int>(rng.index(6)));
    durations[0] += 1;
    const auto u = toy_utterance(durations);
    const auto spec = sample_mask_spans(u, rng.uniform(), rng);
    const auto masked = apply_mask(u.mel, spec, rng);
    const auto flags = spec.frame_flags(u.mel.num_frames());
    for (std::size_t f = 0; f < flags.size(); ++f) {
      if (!flags[f]) CHECK(frames_equal(masked, u.mel, f));
    }
  }
}

TEST_CASE("region_boundary_frames: index arithmetic") {
  const auto mid = boundary_frames(MaskRegion{10, 20, 0, 0}, 100);
  CHECK(mid.left_prev == std::optional<std::size_t>(9));
  CHECK(mid.left_first == 10);
  CHECK(mid.right_last == 19);
  CHECK(mid.right_next == std::optional<std::size_t>(20));
  CHECK_FALSE(boundary_frames(MaskRegion{0, 20, 0, 0}, 100).left_prev.has_value());
  CHECK_FALSE(boundary_frames(MaskRegion{80, 100, 0, 0}, 100).right_next.has_value());
  const auto both = region_boundary_frames(MaskSpec{{{0, 5, 0, 0}, {7, 9, 2, 2}}, 0.5}, 9);
  REQUIRE(both.size() == 2);
  CHECK(both[1].left_prev == std::optional<std::size_t>(6));
}

TEST_CASE("MaskSpec: validation and JSON round trip") {
  MaskSpec spec{{{2, 5, 1, 1}, {8, 12, 3, 4}}, 0.8};
  CHECK_NOTHROW(spec.validate(12));
  CHECK_THROWS_AS(spec.validate(11), InvalidArgument);
  CHECK_THROWS_AS((MaskSpec{{{4, 6, 0, 0}, {5, 7, 1, 1}}, 0.5}.validate(10)), InvalidArgument);
  CHECK_THROWS_AS((MaskSpec{{{4, 4, 0, 0}}, 0.5}.validate(10)), InvalidArgument);
  CHECK(mask_spec_from_json(to_json(spec)) == spec);
  CHECK(mask_spec_from_json(nlohmann::json::parse(to_json(spec).dump())) == spec);
  CHECK_THROWS_AS(mask_spec_from_json(nlohmann::json{{"regions", 3}}), FormatError);
}
