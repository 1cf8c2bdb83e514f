#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <string>

#include <nlohmann/json.hpp>

#include "seamless/audio.hpp"
#include "seamless/corpus.hpp"
#include "seamless/error.hpp"
#include "seamless/rng.hpp"

namespace seamless {
namespace {

enum class Source { Voiced, Noise, Silence };

struct PhoneSpec {
  const char* symbol;
  Source source;
  std::array<double, 3> formants;
  std::array<double, 3> bandwidths;
  double gain;
  int min_frames;
  int max_frames;
};

// Formant targets loosely follow adult vowel/consonant averages.
const std::array<PhoneSpec, 15>& phone_table() {
  static const std::array<PhoneSpec, 15> table{{
      {"AA", Source::Voiced, {730, 1090, 2440}, {90, 110, 160}, 1.00, 6, 11},
      {"IY", Source::Voiced, {270, 2290, 3010}, {60, 100, 150}, 0.85, 6, 11},
      {"UW", Source::Voiced, {300, 870, 2240}, {60, 100, 150}, 0.85, 6, 11},
      {"EH", Source::Voiced, {530, 1840, 2480}, {80, 110, 160}, 0.95, 6, 11},
      {"OW", Source::Voiced, {570, 840, 2410}, {80, 100, 160}, 0.95, 6, 11},
      {"AE", Source::Voiced, {660, 1720, 2410}, {90, 110, 160}, 1.00, 6, 11},
      {"ER", Source::Voiced, {490, 1350, 1690}, {80, 100, 140}, 0.90, 6, 10},
      {"M", Source::Voiced, {280, 900, 2200}, {100, 200, 300}, 0.35, 4, 7},
      {"N", Source::Voiced, {280, 1700, 2600}, {100, 200, 300}, 0.35, 4, 7},
      {"L", Source::Voiced, {360, 1300, 2700}, {80, 150, 200}, 0.55, 4, 7},
      {"R", Source::Voiced, {420, 1300, 1600}, {80, 120, 150}, 0.55, 4, 7},
      {"S", Source::Noise, {5500, 6500, 7500}, {1200, 1500, 1500}, 0.25, 5, 8},
      {"SH", Source::Noise, {2800, 3500, 4500}, {700, 900, 1200}, 0.30, 5, 8},
      {"F", Source::Noise, {1500, 4000, 7000}, {2500, 3000, 3000}, 0.12, 5, 8},
      {"sil", Source::Silence, {500, 1500, 2500}, {500, 500, 500}, 0.0, 4, 7},
  }};
  return table;
}

const PhoneSpec& lookup(const std::string& symbol) {
  for (const auto& p : phone_table()) {
    if (symbol == p.symbol) return p;
  }
  throw VocabularyError("synthetic phone set", symbol);
}

struct SpeakerSpec {
  const char* id;
  double f0;
  double formant_scale;
};

constexpr std::array<SpeakerSpec, 4> kSpeakers{{
    {"s1", 100.0, 0.92},
    {"s2", 125.0, 0.97},
    {"s3", 200.0, 1.08},
    {"s4", 235.0, 1.15},
}};

// Klatt two-pole resonator, unity gain at DC.
class Resonator {
 public:
  void tune(double freq, double bandwidth, double rate) {
    const double t = 1.0 / rate;
    c_ = -std::exp(-2.0 * std::numbers::pi * bandwidth * t);
    b_ = 2.0 * std::exp(-std::numbers::pi * bandwidth * t) * std::cos(2.0 * std::numbers::pi * freq * t);
    a_ = 1.0 - b_ - c_;
  }
  double operator()(double x) {
    const double y = a_ * x + b_ * y1_ + c_ * y2_;
    y2_ = y1_;
    y1_ = y;
    return y;
  }

 private:
  double a_ = 1.0, b_ = 0.0, c_ = 0.0, y1_ = 0.0, y2_ = 0.0;
};

}  // namespace

std::vector<std::pair<std::string, std::vector<std::string>>> synthetic_lexicon() {
  return {
      {"mama", {"M", "AA", "M", "AA"}}, {"noon", {"N", "UW", "N"}},
      {"sea", {"S", "IY"}},             {"fee", {"F", "IY"}},
      {"shoe", {"SH", "UW"}},           {"low", {"L", "OW"}},
      {"row", {"R", "OW"}},             {"moon", {"M", "UW", "N"}},
      {"mean", {"M", "IY", "N"}},       {"lemon", {"L", "EH", "M", "ER", "N"}},
      {"fast", {"F", "AE", "S"}},       {"shell", {"SH", "EH", "L"}},
      {"arrow", {"AE", "R", "OW"}},     {"ear", {"IY", "ER"}},
      {"fame", {"F", "EH", "M"}},       {"snow", {"S", "N", "OW"}},
      {"summer", {"S", "AA", "M", "ER"}}, {"memo", {"M", "EH", "M", "OW"}},
  };
}

CorpusManifest synth_corpus(std::size_t n, std::uint64_t seed, const FeatureConfig& config,
                            const std::optional<std::filesystem::path>& out_dir) {
  if (n < 1) throw InvalidArgument("synth_corpus: n must be >= 1");
  const auto lexicon = synthetic_lexicon();
  const double rate = config.sample_rate;
  const int hop = config.hop_length;

  CorpusManifest manifest;
  manifest.feature_config = config;
  for (const auto& s : kSpeakers) manifest.speakers.emplace_back(s.id);

  if (out_dir) {
    std::filesystem::create_directories(*out_dir);
    std::ofstream lex(*out_dir / "lexicon.txt");
    for (const auto& [word, phones] : lexicon) {
      lex << word;
      for (const auto& p : phones) lex << ' ' << p;
      lex << '\n';
    }
  }

  Rng master(seed);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = master.fork();
    const std::size_t speaker = i % kSpeakers.size();
    const SpeakerSpec& spk = kSpeakers[speaker];

    AlignedUtterance u;
    char id[32];
    std::snprintf(id, sizeof id, "synth_%04zu", i);
    u.utterance.id = id;
    u.utterance.speaker_id = spk.id;
    u.utterance.sample_rate = config.sample_rate;
    u.speaker_index = static_cast<int>(speaker);

    auto push_phone = [&](const std::string& symbol) {
      const PhoneSpec& p = lookup(symbol);
      u.phonemes.push_back(symbol);
      u.durations.push_back(p.min_frames + static_cast<int>(rng.index(static_cast<std::size_t>(p.max_frames - p.min_frames + 1))));
    };
    push_phone("sil");
    const std::size_t num_words = 3 + rng.index(3);
    std::vector<int> word_accent;
    for (std::size_t w = 0; w < num_words; ++w) {
      const auto& [word, phones] = lexicon[rng.index(lexicon.size())];
      WordSpan span{word, u.phonemes.size(), 0};
      for (const auto& p : phones) push_phone(p);
      span.end_phone = u.phonemes.size();
      u.words.push_back(span);
      u.utterance.text += (w ? " " : "") + word;
    }
    push_phone("sil");

    const auto offsets = u.phone_offsets();
    const std::size_t frames = offsets.back();
    std::vector<std::size_t> frame_phone(frames);
    std::vector<int> frame_word(frames, -1);
    for (std::size_t k = 0; k + 1 < offsets.size(); ++k) {
      for (std::size_t f = offsets[k]; f < offsets[k + 1]; ++f) frame_phone[f] = k;
    }
    for (std::size_t w = 0; w < u.words.size(); ++w) {
      for (std::size_t f = offsets[u.words[w].first_phone]; f < offsets[u.words[w].end_phone]; ++f) {
        frame_word[f] = static_cast<int>(w);
      }
    }

    // Declining contour with alternating word accents; unvoiced frames carry 0.
    const double register_shift = 1.0 + 0.04 * (rng.uniform() - 0.5);
    u.pitch.assign(frames, 0.0f);
    for (std::size_t f = 0; f < frames; ++f) {
      if (lookup(u.phonemes[frame_phone[f]]).source != Source::Voiced) continue;
      const double accent = frame_word[f] >= 0 && frame_word[f] % 2 == 0 ? 1.06 : 0.97;
      const double decline = 1.0 - 0.12 * static_cast<double>(f) / static_cast<double>(frames);
      u.pitch[f] = static_cast<float>(spk.f0 * register_shift * accent * decline);
    }

    const std::size_t num_samples = frames * static_cast<std::size_t>(hop) - 1;
    std::vector<float> samples(num_samples);
    std::array<Resonator, 3> cascade;
    Resonator noise_filter;
    double phase = 0.0;
    double glottal = 0.0;
    std::size_t tuned_phone = static_cast<std::size_t>(-1);
    constexpr double kOutputGain = 0.07;
    for (std::size_t s = 0; s < num_samples; ++s) {
      const std::size_t f = std::min(frames - 1, (s + static_cast<std::size_t>(hop) / 2) / static_cast<std::size_t>(hop));
      const std::size_t k = frame_phone[f];
      const PhoneSpec& p = lookup(u.phonemes[k]);
      if (k != tuned_phone) {
        for (int j = 0; j < 3; ++j) {
          const double scale = p.source == Source::Voiced ? spk.formant_scale : 1.0;
          cascade[j].tune(std::min(p.formants[j] * scale, 0.45 * rate), p.bandwidths[j], rate);
        }
        noise_filter.tune(std::min(p.formants[0], 0.45 * rate), p.bandwidths[0], rate);
        tuned_phone = k;
      }
      double excitation = 0.0;
      if (p.source == Source::Voiced && u.pitch[f] > 0.0f) {
        phase += u.pitch[f] / rate;
        const double pulse = phase >= 1.0 ? 1.0 : 0.0;
        if (phase >= 1.0) phase -= 1.0;
        glottal = 0.7 * glottal + pulse;  // crude spectral tilt
        excitation = glottal * p.gain * 6.0;
      } else if (p.source == Source::Noise) {
        excitation = noise_filter(rng.normal()) * p.gain * 4.0;
      }
      double y = excitation;
      if (p.source == Source::Voiced) {
        for (auto& r : cascade) y = r(y);
      }
      y += 0.002 * rng.normal();
      samples[s] = static_cast<float>(std::clamp(y * kOutputGain, -0.99, 0.99));
    }
    // Store exactly what a 16-bit WAV round trip yields.
    for (auto& s : samples) s = static_cast<float>(std::clamp(std::lrint(s * 32768.0f), -32768L, 32767L)) / 32768.0f;

    u.mel = compute_mel(samples, config);
    if (u.mel.num_frames() != frames) {
      throw Error("synth_corpus: frame count mismatch (" + std::to_string(u.mel.num_frames()) +
                  " vs " + std::to_string(frames) + ")");
    }

    if (out_dir) {
      const auto wav_dir = *out_dir / "wavs" / spk.id;
      std::filesystem::create_directories(wav_dir);
      const auto wav_path = wav_dir / (u.utterance.id + ".wav");
      write_wav(wav_path, samples, config.sample_rate);
      u.utterance.audio_path = wav_path.string();

      const double sec_per_frame = static_cast<double>(hop) / rate;
      nlohmann::json phones = nlohmann::json::array();
      for (std::size_t k = 0; k < u.phonemes.size(); ++k) {
        phones.push_back({{"symbol", u.phonemes[k]},
                          {"start_s", offsets[k] * sec_per_frame},
                          {"end_s", offsets[k + 1] * sec_per_frame}});
      }
      nlohmann::json words = nlohmann::json::array();
      for (const auto& w : u.words) {
        words.push_back({{"text", w.text},
                         {"start_s", offsets[w.first_phone] * sec_per_frame},
                         {"end_s", offsets[w.end_phone] * sec_per_frame}});
      }
      nlohmann::json sidecar = {{"phones", phones}, {"words", words}, {"speaker", spk.id},
                                {"text", u.utterance.text}};
      std::ofstream out(wav_dir / (u.utterance.id + ".json"));
      out << sidecar.dump(1) << '\n';
    }
    u.validate();
    manifest.entries.push_back(std::move(u));
  }
  manifest.splits.assign(manifest.entries.size(), Split::Train);
  return manifest;
}

}  // namespace seamless
