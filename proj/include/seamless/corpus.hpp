#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "seamless/features.hpp"
#include "seamless/json_io.hpp"
#include "seamless/mel.hpp"

namespace seamless {

struct Utterance {
  std::string id;
  std::string speaker_id;
  std::string text;
  std::string audio_path;
  int sample_rate = 22050;
};

// A word of the transcript covering phonemes [first_phone, end_phone).
struct WordSpan {
  std::string text;
  std::size_t first_phone = 0;
  std::size_t end_phone = 0;
};

struct AlignedUtterance {
  Utterance utterance;
  MelSpectrogram mel;
  std::vector<std::string> phonemes;
  std::vector<int> durations;  // frames per phoneme
  std::vector<float> pitch;    // Hz per frame, 0 = unvoiced
  int speaker_index = 0;
  std::vector<WordSpan> words;

  // Frame index at which each phoneme starts; size phonemes+1, back() == num_frames.
  std::vector<std::size_t> phone_offsets() const;
  // Throws InvalidArgument if any structural invariant is broken.
  void validate() const;
};

// A labelled time interval from an aligner.
struct TimedLabel {
  std::string label;
  double start_s = 0.0;
  double end_s = 0.0;
};

struct Alignment {
  std::vector<std::string> phonemes;
  std::vector<int> durations;
  std::vector<WordSpan> words;
};

// Converts phone intervals to frame durations that sum to num_frames exactly
// using largest-remainder rounding. Gaps between intervals become "sil".
// Throws FormatError on overlap, empty input, or a > 2-frame discrepancy.
Alignment intervals_to_durations(const std::vector<TimedLabel>& phones,
                                 const std::vector<TimedLabel>& words, int hop_length,
                                 int sample_rate, std::size_t num_frames);

// Reads an MFA TextGrid ("phones"/"words" tiers) or the JSON sidecar format
// {"phones": [{"symbol", "start_s", "end_s"}], "words": [...]}.
Alignment parse_alignment(const std::filesystem::path& path, int hop_length, int sample_rate,
                          std::size_t num_frames);

enum class Split { Train, Valid, Test };
const char* to_string(Split split);
Split split_from_string(const std::string& name);
inline std::ostream& operator<<(std::ostream& os, Split split) { return os << to_string(split); }

struct SplitRatios {
  double train = 0.98;
  double valid = 0.01;
  double test = 0.01;
};

struct CorpusManifest {
  FeatureConfig feature_config;
  std::vector<AlignedUtterance> entries;
  std::vector<Split> splits;  // parallel to entries
  std::vector<std::string> speakers;  // speaker_index -> speaker id

  std::vector<const AlignedUtterance*> subset(Split split) const;
  std::size_t count(Split split) const;
};

// Ingests every *.wav under corpus_dir that has an alignment sidecar
// (<stem>.json or <stem>.TextGrid). Unreadable entries are skipped and counted.
struct BuildStats {
  std::size_t ingested = 0;
  std::size_t skipped = 0;
};
CorpusManifest build_manifest(const std::filesystem::path& corpus_dir, const FeatureConfig& config,
                              BuildStats* stats = nullptr);

// Seeded random partition. Sizes use largest-remainder rounding of n * ratio.
CorpusManifest split_corpus(CorpusManifest manifest, const SplitRatios& ratios, std::uint64_t seed);

// Persistence: <dir>/manifest.jsonl (one record per line), <dir>/manifest.meta.json,
// and <dir>/features/<id>.{mel,f0}.bin sidecars.
void write_manifest(const CorpusManifest& manifest, const std::filesystem::path& dir);
CorpusManifest read_manifest(const std::filesystem::path& dir);

// Little-endian float32 array with a shape header.
void write_float_array(const std::filesystem::path& path, const std::vector<std::size_t>& shape,
                       std::span<const float> values);
std::vector<float> read_float_array(const std::filesystem::path& path,
                                    std::vector<std::size_t>* shape = nullptr);

// Deterministic pseudo-speech corpus: formant-filtered pulse trains for a
// small synthetic phone set, four speakers with distinct pitch registers.
// When out_dir is given, WAVs, JSON alignments, and lexicon.txt are written
// there and audio_path points at them.
CorpusManifest synth_corpus(std::size_t n, std::uint64_t seed, const FeatureConfig& config,
                            const std::optional<std::filesystem::path>& out_dir = std::nullopt);

nlohmann::json to_json(const FeatureConfig& config);
// Reads the keys present in `reader`, leaving defaults for absent ones.
void read_feature_config(JsonReader& reader, FeatureConfig& config);

// Word -> phoneme list entries for every word synth_corpus can emit.
std::vector<std::pair<std::string, std::vector<std::string>>> synthetic_lexicon();

}  // namespace seamless
