#include "seamless/masking.hpp"

#include <string>

#include "seamless/error.hpp"

namespace seamless {

std::size_t MaskSpec::masked_frames() const {
  std::size_t total = 0;
  for (const auto& r : regions) total += r.length();
  return total;
}

std::vector<std::uint8_t> MaskSpec::frame_flags(std::size_t num_frames) const {
  std::vector<std::uint8_t> flags(num_frames, 0);
  for (const auto& r : regions) {
    for (std::size_t f = r.start_frame; f < r.end_frame && f < num_frames; ++f) flags[f] = 1;
  }
  return flags;
}

void MaskSpec::validate(std::size_t num_frames) const {
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < regions.size(); ++i) {
    const auto& r = regions[i];
    if (r.start_frame >= r.end_frame) {
      throw InvalidArgument("mask region " + std::to_string(i) + " is empty");
    }
    if (r.end_frame > num_frames) {
      throw InvalidArgument("mask region " + std::to_string(i) + " [" + std::to_string(r.start_frame) +
                            ", " + std::to_string(r.end_frame) + ") exceeds " +
                            std::to_string(num_frames) + " frames");
    }
    if (i > 0 && r.start_frame < cursor) {
      throw InvalidArgument("mask regions are unsorted or overlapping at region " + std::to_string(i));
    }
    if (r.last_phone < r.first_phone) throw InvalidArgument("mask region phoneme span reversed");
    cursor = r.end_frame;
  }
}

MaskSpec regions_from_phone_flags(const std::vector<int>& durations, const std::vector<bool>& masked,
                                  double rate) {
  if (durations.size() != masked.size()) throw ShapeError("regions_from_phone_flags: size mismatch");
  MaskSpec spec;
  spec.mask_rate = rate;
  std::size_t frame = 0;
  bool open = false;
  MaskRegion current;
  for (std::size_t k = 0; k < durations.size(); ++k) {
    const auto d = static_cast<std::size_t>(durations[k]);
    if (masked[k] && d > 0) {
      if (!open) {
        current = MaskRegion{frame, frame, k, k};
        open = true;
      }
      current.end_frame = frame + d;
      current.last_phone = k;
    } else if (!masked[k] && d > 0 && open) {
      spec.regions.push_back(current);
      open = false;
    }
    // A zero-length unmasked phoneme between masked ones does not split the region.
    frame += d;
  }
  if (open) spec.regions.push_back(current);
  return spec;
}

MaskSpec sample_mask_spans(const AlignedUtterance& utterance, double rate, Rng& rng) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw InvalidArgument("sample_mask_spans: rate must be in [0, 1]");
  std::vector<bool> masked(utterance.durations.size());
  for (std::size_t k = 0; k < masked.size(); ++k) masked[k] = rng.bernoulli(rate);
  return regions_from_phone_flags(utterance.durations, masked, rate);
}

MelSpectrogram apply_mask(const MelSpectrogram& mel, const MaskSpec& spec, Rng& rng) {
  spec.validate(mel.num_frames());
  MelSpectrogram out = mel;
  for (const auto& r : spec.regions) {
    for (std::size_t f = r.start_frame; f < r.end_frame; ++f) rng.fill_normal(out.frame(f));
  }
  return out;
}

BoundaryFrames boundary_frames(const MaskRegion& region, std::size_t mel_len) {
  BoundaryFrames b;
  if (region.start_frame > 0) b.left_prev = region.start_frame - 1;
  b.left_first = region.start_frame;
  b.right_last = region.end_frame - 1;
  if (region.end_frame < mel_len) b.right_next = region.end_frame;
  return b;
}

std::vector<BoundaryFrames> region_boundary_frames(const MaskSpec& spec, std::size_t mel_len) {
  std::vector<BoundaryFrames> out;
  out.reserve(spec.regions.size());
  for (const auto& r : spec.regions) out.push_back(boundary_frames(r, mel_len));
  return out;
}

nlohmann::json to_json(const MaskSpec& spec) {
  nlohmann::json regions = nlohmann::json::array();
  for (const auto& r : spec.regions) {
    regions.push_back({{"start_frame", r.start_frame},
                       {"end_frame", r.end_frame},
                       {"first_phone", r.first_phone},
                       {"last_phone", r.last_phone}});
  }
  return {{"mask_rate", spec.mask_rate}, {"regions", regions}};
}

MaskSpec mask_spec_from_json(const nlohmann::json& json) {
  MaskSpec spec;
  try {
    spec.mask_rate = json.at("mask_rate").get<double>();
    for (const auto& r : json.at("regions")) {
      spec.regions.push_back({r.at("start_frame").get<std::size_t>(), r.at("end_frame").get<std::size_t>(),
                              r.at("first_phone").get<std::size_t>(), r.at("last_phone").get<std::size_t>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("MaskSpec JSON: ") + e.what());
  }
  return spec;
}

}  // namespace seamless
