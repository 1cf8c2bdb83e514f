#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "seamless/corpus.hpp"
#include "seamless/diffusion.hpp"
#include "seamless/features.hpp"
#include "seamless/masking.hpp"
#include "seamless/model.hpp"
#include "seamless/training.hpp"

namespace seamless {

// Plain-text pronunciation lexicon: one "WORD PH1 PH2 ..." entry per line,
// '#' starts a comment. Words are matched case-insensitively.
class Lexicon {
 public:
  Lexicon() = default;
  explicit Lexicon(const std::vector<std::pair<std::string, std::vector<std::string>>>& entries);
  static Lexicon load(const std::filesystem::path& path);

  // Throws VocabularyError naming the word when it has no entry.
  const std::vector<std::string>& pronounce(const std::string& word) const;
  bool contains(const std::string& word) const;
  std::vector<std::string> phoneme_symbols() const;

 private:
  std::map<std::string, std::vector<std::string>> entries_;
};

enum class EditKind { Insert, Replace, Delete };

// Word indices refer to the original transcript. `span` is half-open
// [first, end); `at` is the word index the insertion goes before (== word
// count appends after the last word).
struct EditOp {
  EditKind kind = EditKind::Insert;
  std::size_t at = 0;
  std::size_t span_first = 0;
  std::size_t span_end = 0;
  std::string text;
};

struct EditScript {
  std::vector<EditOp> ops;
};

EditScript edit_script_from_json(const nlohmann::json& json);
EditScript load_edit_script(const std::filesystem::path& path);
nlohmann::json to_json(const EditScript& script);

// Throws InvalidArgument for spans outside the transcript or overlapping operations.
void validate_edit_script(const EditScript& script, std::size_t word_count);

// Frame counts for new phonemes.
using DurationProvider = std::function<std::vector<int>(const std::vector<std::string>& phonemes, int speaker_index)>;
DurationProvider model_duration_provider(EditorModel model);
// Corpus-mean duration per phoneme, falling back to the global mean.
DurationProvider mean_duration_provider(const ModelStats& stats);

struct EditPlan {
  // Edited timeline: phonemes, durations, words and pitch. Context frames hold
  // the source frames; frames inside regions are zero until generated.
  AlignedUtterance edited;
  MaskSpec regions;
  // Source frame for each edited frame; empty optional inside regions.
  std::vector<std::optional<std::size_t>> source_frame;

  std::size_t num_frames() const { return edited.mel.num_frames(); }
};

EditPlan resolve_edit(const AlignedUtterance& original, const EditScript& script, const Lexicon& lexicon,
                      const DurationProvider& durations);

struct EditResult {
  EditPlan plan;
  MelSpectrogram mel;
  std::vector<float> pitch;
};

// Generates every region of the plan with the reverse chain and splices it
// into the kept context. Uses the model's duration predictor for new phonemes.
EditResult edit_utterance(EditorModel& model, const AlignedUtterance& original, const EditScript& script,
                          const Lexicon& lexicon, const NoiseSchedule& schedule, Rng& rng);

struct GriffinLimConfig {
  int iterations = 32;
  double momentum = 0.99;
  std::uint64_t phase_seed = 0;
};

class Vocoder {
 public:
  virtual ~Vocoder() = default;
  virtual std::vector<float> vocode(const MelSpectrogram& mel) = 0;
  virtual std::string name() const = 0;
};

// Iterative phase reconstruction from the pseudo-inverse of the mel filterbank.
// Output has (num_frames - 1) * hop samples.
class GriffinLimVocoder : public Vocoder {
 public:
  GriffinLimVocoder(FeatureConfig features, GriffinLimConfig config);
  std::vector<float> vocode(const MelSpectrogram& mel) override;
  std::string name() const override { return "griffin-lim"; }

 private:
  FeatureConfig features_;
  GriffinLimConfig config_;
  std::vector<float> inverse_basis_;  // [bins x mels]
};

// Runs `command <mel.bin> <out.wav>` where mel.bin is a float array file
// ([frames, mels]); the WAV is read back at the feature sample rate.
class ExternalVocoder : public Vocoder {
 public:
  ExternalVocoder(std::string command, FeatureConfig features);
  std::vector<float> vocode(const MelSpectrogram& mel) override;
  std::string name() const override { return "external"; }

 private:
  std::string command_;
  FeatureConfig features_;
};

std::vector<float> vocode(const MelSpectrogram& mel, const FeatureConfig& features, const GriffinLimConfig& config = {});

}  // namespace seamless
