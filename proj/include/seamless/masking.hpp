#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "seamless/corpus.hpp"
#include "seamless/mel.hpp"
#include "seamless/rng.hpp"

namespace seamless {

// Frames [start_frame, end_frame) covering phonemes [first_phone, last_phone].
struct MaskRegion {
  std::size_t start_frame = 0;
  std::size_t end_frame = 0;
  std::size_t first_phone = 0;
  std::size_t last_phone = 0;

  std::size_t length() const { return end_frame - start_frame; }
  bool operator==(const MaskRegion&) const = default;
};

struct MaskSpec {
  std::vector<MaskRegion> regions;  // sorted, pairwise disjoint
  double mask_rate = 0.0;

  std::size_t masked_frames() const;
  // 1 for frames inside a region.
  std::vector<std::uint8_t> frame_flags(std::size_t num_frames) const;
  // Throws InvalidArgument if regions are empty, unsorted, overlapping, or out of bounds.
  void validate(std::size_t num_frames) const;
  bool operator==(const MaskSpec&) const = default;
};

// Each phoneme is masked independently with probability `rate`, so the
// expected masked-frame fraction equals `rate`. Runs of consecutive masked
// phonemes merge into one region.
MaskSpec sample_mask_spans(const AlignedUtterance& utterance, double rate, Rng& rng);

// Builds regions from per-phoneme flags; zero-duration phonemes never start a region.
MaskSpec regions_from_phone_flags(const std::vector<int>& durations,
                                  const std::vector<bool>& masked, double rate);

// Replaces frames inside regions with unit-Gaussian vectors; other frames are
// copied bit-for-bit.
MelSpectrogram apply_mask(const MelSpectrogram& mel, const MaskSpec& spec, Rng& rng);

struct BoundaryFrames {
  std::optional<std::size_t> left_prev;  // start - 1
  std::size_t left_first = 0;            // start
  std::size_t right_last = 0;            // end - 1
  std::optional<std::size_t> right_next; // end
};

std::vector<BoundaryFrames> region_boundary_frames(const MaskSpec& spec, std::size_t mel_len);
BoundaryFrames boundary_frames(const MaskRegion& region, std::size_t mel_len);

nlohmann::json to_json(const MaskSpec& spec);
MaskSpec mask_spec_from_json(const nlohmann::json& json);

}  // namespace seamless
