#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "seamless/corpus.hpp"
#include "seamless/diffusion.hpp"
#include "seamless/editor.hpp"
#include "seamless/masking.hpp"
#include "seamless/mel.hpp"
#include "seamless/model.hpp"
#include "seamless/training.hpp"

namespace seamless {

// Orthonormal DCT-II of one log-mel frame, coefficients 1..order
// (order is clamped to num_mels - 1).
std::vector<double> mel_cepstrum(std::span<const float> log_mel, int order = 13);

// (10 / ln 10) * sqrt(2 * sum_k (c_k - c'_k)^2), averaged over frames.
double mcd_cepstra(const std::vector<std::vector<double>>& ref, const std::vector<std::vector<double>>& test);
// Frame-aligned MCD between two log-mel spectrograms. Throws ShapeError on mismatch.
double mcd(const MelSpectrogram& ref, const MelSpectrogram& test, int order = 13);
// MCD over the frames inside `spec` only.
double masked_mcd(const MelSpectrogram& ref, const MelSpectrogram& test, const MaskSpec& spec, int order = 13);

// Short-time objective intelligibility between a clean reference and a
// processed signal at `sample_rate`. Throws InvalidArgument on length
// mismatch, a silent reference, or fewer than one 30-frame analysis segment.
double stoi(std::span<const float> ref, std::span<const float> test, int sample_rate);

// Out-of-process PESQ scorer: `command <ref.wav> <deg.wav>` with 16 kHz WAVs;
// the last number printed on stdout is the score.
class PesqAdapter {
 public:
  PesqAdapter() = default;
  explicit PesqAdapter(std::string command) : command_(std::move(command)) {}
  // Reads the command from SEAMLESS_PESQ; unset or empty means unavailable.
  static PesqAdapter from_environment();

  bool available() const { return !command_.empty(); }
  const std::string& command() const { return command_; }
  // nullopt when unavailable or when the tool fails on this pair.
  std::optional<double> score(std::span<const float> ref, std::span<const float> test, int sample_rate) const;

 private:
  std::string command_;
};

// Produces a mel whose region frames are regenerated and context frames copied.
class RegionGenerator {
 public:
  virtual ~RegionGenerator() = default;
  virtual MelSpectrogram generate(const AlignedUtterance& utterance, const MaskSpec& spec, Rng& rng) = 0;
  virtual std::string name() const = 0;
};

class DiffusionGenerator : public RegionGenerator {
 public:
  DiffusionGenerator(EditorModel model, NoiseSchedule schedule, ReconstructOptions options = {});
  MelSpectrogram generate(const AlignedUtterance& utterance, const MaskSpec& spec, Rng& rng) override;
  std::string name() const override { return "diffusion"; }

 private:
  EditorModel model_;
  NoiseSchedule schedule_;
  ReconstructOptions options_;
};

// Returns the ground-truth mel unchanged.
class OracleGenerator : public RegionGenerator {
 public:
  MelSpectrogram generate(const AlignedUtterance& utterance, const MaskSpec& spec, Rng& rng) override;
  std::string name() const override { return "oracle"; }
};

struct EvalConfig {
  std::uint64_t seed = 0;
  double mask_rate = 0.8;
  int cepstral_order = 13;
  bool score_audio = true;
  GriffinLimConfig vocoder;
  // Identifies the run and the evaluation protocol; reports with different
  // protocol hashes refuse to combine.
  std::string config_hash;
  std::string protocol_hash;
};

struct UtteranceScore {
  std::string id;
  std::size_t frames = 0;
  std::size_t masked_frames = 0;
  std::size_t regions = 0;
  double mcd = 0.0;
  // Copy-synthesis: vocoded ground-truth mel vs vocoded reconstruction.
  std::optional<double> stoi_copy;
  // Recorded audio vs vocoded reconstruction, when the source WAV is readable.
  std::optional<double> stoi_real;
  std::optional<double> pesq_copy;
  std::optional<double> pesq_real;
};

struct MetricSummary {
  std::optional<double> mean;
  std::size_t count = 0;
};

struct EvalReport {
  std::string label;
  std::string generator;
  std::string config_hash;
  std::string protocol_hash;
  std::uint64_t seed = 0;
  double mask_rate = 0.0;
  bool pesq_available = false;
  std::vector<UtteranceScore> utterances;

  MetricSummary mcd() const;
  MetricSummary stoi_copy() const;
  MetricSummary stoi_real() const;
  MetricSummary pesq_copy() const;
  MetricSummary pesq_real() const;

  nlohmann::json to_json() const;
  std::string table() const;
};

EvalReport report_from_json(const nlohmann::json& json);

// Samples a seeded MaskSpec per utterance (at least one region), regenerates
// it, and scores the masked frames. Throws InvalidArgument for an empty list.
EvalReport evaluate_corpus(const std::vector<const AlignedUtterance*>& items, RegionGenerator& generator,
                           const FeatureConfig& features, const EvalConfig& config,
                           const PesqAdapter& pesq = PesqAdapter::from_environment());

// Rows in order, e.g. "full", "w/o L_AC", "w/o L_PC". Throws InvalidArgument
// when protocol hashes differ.
struct AblationTable {
  std::vector<EvalReport> rows;
  nlohmann::json to_json() const;
  std::string table() const;
};
AblationTable combine_reports(std::vector<EvalReport> rows);

}  // namespace seamless
