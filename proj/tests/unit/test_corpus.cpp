#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "seamless/audio.hpp"
#include "seamless/corpus.hpp"
#include "seamless/error.hpp"
#include "seamless/features.hpp"
#include "seamless/rng.hpp"
#include "test_helpers.hpp"

using namespace seamless;
using seamless::testing::scratch_dir;
using seamless::testing::tone;
using seamless::testing::white_noise;

namespace {

void write_raw_wav(const std::filesystem::path& path, int rate, int channels, int bits, int format,
                   const std::vector<std::int16_t>& data) {
  std::ofstream out(path, std::ios::binary);
  auto u32 = [&](std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
  auto u16 = [&](std::uint16_t v) { out.write(reinterpret_cast<const char*>(&v), 2); };
  const auto bytes = static_cast<std::uint32_t>(data.size() * 2);
  out.write("RIFF", 4);
  u32(36 + bytes);
  out.write("WAVEfmt ", 8);
  u32(16);
  u16(static_cast<std::uint16_t>(format));
  u16(static_cast<std::uint16_t>(channels));
  u32(static_cast<std::uint32_t>(rate));
  u32(static_cast<std::uint32_t>(rate * channels * bits / 8));
  u16(static_cast<std::uint16_t>(channels * bits / 8));
  u16(static_cast<std::uint16_t>(bits));
  out.write("data", 4);
  u32(bytes);
  out.write(reinterpret_cast<const char*>(data.data()), bytes);
}

// Independent evaluation of the Slaney triangle weights at one frequency.
std::vector<double> filter_response_at(double hz, const FeatureConfig& c) {
  auto to_mel = [](double f) {
    return f < 1000.0 ? f * 3.0 / 200.0 : 15.0 + std::log(f / 1000.0) * 27.0 / std::log(6.4);
  };
  auto to_hz = [](double m) {
    return m < 15.0 ? m * 200.0 / 3.0 : 1000.0 * std::exp((m - 15.0) * std::log(6.4) / 27.0);
  };
  std::vector<double> out;
  const double lo = to_mel(c.fmin), hi = to_mel(c.fmax);
  for (int m = 0; m < c.num_mels; ++m) {
    const double l = to_hz(lo + (hi - lo) * m / (c.num_mels + 1.0));
    const double ce = to_hz(lo + (hi - lo) * (m + 1) / (c.num_mels + 1.0));
    const double u = to_hz(lo + (hi - lo) * (m + 2) / (c.num_mels + 1.0));
    double w = hz <= ce ? (hz - l) / (ce - l) : (u - hz) / (u - ce);
    out.push_back(std::max(0.0, w) * 2.0 / (u - l));
  }
  return out;
}

}  // namespace

TEST_CASE("load_audio: length, resampling and downmix") {
  const auto dir = scratch_dir("audio");
  const auto one_second = tone(440.0, 1.0, 22050);
  write_wav(dir / "a.wav", one_second, 22050);
  CHECK(load_audio(dir / "a.wav", 22050).size() == 22050);

  const auto hi_rate = tone(440.0, 1.0, 44100);
  write_wav(dir / "b.wav", hi_rate, 44100);
  const auto halved = load_audio(dir / "b.wav", 22050);
  CHECK(std::abs(static_cast<long>(halved.size()) - 22050) <= 1);

  // The tone frequency survives resampling: count upward zero crossings.
  int crossings = 0;
  for (std::size_t i = 1000; i + 1 < 21000; ++i) crossings += halved[i] <= 0 && halved[i + 1] > 0;
  CHECK(std::abs(crossings - static_cast<int>(440.0 * 20000 / 22050)) <= 2);

  std::vector<std::int16_t> stereo;
  for (int i = 0; i < 4000; ++i) {
    stereo.push_back(32767);
    stereo.push_back(i % 2 ? -32768 : 32767);
  }
  write_raw_wav(dir / "stereo.wav", 22050, 2, 16, 1, stereo);
  const auto mono = load_audio(dir / "stereo.wav", 22050);
  REQUIRE(mono.size() == 4000);
  float peak = 0.0f;
  for (float v : mono) peak = std::max(peak, std::abs(v));
  CHECK(peak <= 1.0f);
  CHECK(mono[0] == doctest::Approx(32767.0 / 32768.0).epsilon(1e-6));
  CHECK(mono[1] == doctest::Approx((32767.0 - 32768.0) / 2.0 / 32768.0).epsilon(1e-3));
}

TEST_CASE("load_audio: error paths") {
  const auto dir = scratch_dir("audio_errors");
  CHECK_THROWS_AS(load_audio(dir / "missing.wav", 22050), IoError);
  write_raw_wav(dir / "float.wav", 22050, 1, 32, 3, std::vector<std::int16_t>(64, 0));
  CHECK_THROWS_AS(load_audio(dir / "float.wav", 22050), FormatError);
  write_raw_wav(dir / "empty.wav", 22050, 1, 16, 1, {});
  CHECK_THROWS_AS(load_audio(dir / "empty.wav", 22050), InvalidArgument);
}

TEST_CASE("compute_mel: frame count, silence floor and tone band") {
  FeatureConfig config;
  const std::vector<float> silence(22050, 0.0f);
  const auto mel = compute_mel(silence, config);
  CHECK(mel.num_frames() == 87);
  CHECK(mel.num_mels() == 80);
  const float floor_value = static_cast<float>(std::log(config.log_floor));
  CHECK(std::all_of(mel.values().begin(), mel.values().end(), [&](float v) { return v == floor_value; }));

  const auto t = tone(440.0, 1.0, 22050);
  const auto tone_mel = compute_mel(t, config);
  std::vector<double> band_mean(80, 0.0);
  for (std::size_t f = 0; f < tone_mel.num_frames(); ++f) {
    for (std::size_t m = 0; m < 80; ++m) band_mean[m] += tone_mel.at(f, m);
  }
  const auto response = filter_response_at(440.0, config);
  const auto expected = std::max_element(response.begin(), response.end()) - response.begin();
  const auto observed = std::max_element(band_mean.begin(), band_mean.end()) - band_mean.begin();
  CHECK(observed == expected);

  CHECK(compute_mel(t, config).bit_equal(tone_mel));
  CHECK_THROWS_AS(compute_mel(std::vector<float>(1000, 0.1f), config), InvalidArgument);
}

TEST_CASE("compute_mel: frame-count formula over random lengths") {
  FeatureConfig config;
  config.num_mels = 8;
  Rng rng(11);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t n = 1024 + rng.index(20000);
    const auto mel = compute_mel(white_noise(n, trial, 0.1), config);
    const std::size_t expected = (n + 1024 - 1024) / 256 + 1;
    CHECK(mel.num_frames() == expected);
    CHECK(expected_frame_count(n, config) == expected);
  }
  FeatureConfig uncentred = config;
  uncentred.center = false;
  CHECK(expected_frame_count(22050, uncentred) == (22050 - 1024) / 256 + 1);
}

TEST_CASE("extract_pitch: sawtooth, noise and silence") {
  FeatureConfig config;
  std::vector<float> saw(22050);
  for (std::size_t i = 0; i < saw.size(); ++i) {
    const double phase = std::fmod(220.0 * i / 22050.0, 1.0);
    saw[i] = static_cast<float>(0.5 * (2.0 * phase - 1.0));
  }
  auto f0 = extract_pitch(saw, config);
  CHECK(f0.size() == expected_frame_count(saw.size(), config));
  std::vector<float> voiced;
  for (float v : f0) {
    if (v > 0.0f) voiced.push_back(v);
  }
  REQUIRE(voiced.size() > f0.size() / 2);
  std::nth_element(voiced.begin(), voiced.begin() + voiced.size() / 2, voiced.end());
  CHECK(std::abs(voiced[voiced.size() / 2] - 220.0f) <= 5.0f);

  const auto noise_f0 = extract_pitch(white_noise(22050, 5), config);
  const auto unvoiced = std::count(noise_f0.begin(), noise_f0.end(), 0.0f);
  CHECK(static_cast<double>(unvoiced) >= 0.8 * noise_f0.size());

  const auto quiet = extract_pitch(std::vector<float>(22050, 0.0f), config);
  CHECK(std::all_of(quiet.begin(), quiet.end(), [](float v) { return v == 0.0f; }));
}

TEST_CASE("parse_alignment: largest-remainder durations") {
  const auto dir = scratch_dir("alignment");
  {
    std::ofstream out(dir / "two.json");
    out << R"({"phones": [{"symbol": "AA", "start_s": 0.0, "end_s": 0.5},
                          {"symbol": "B", "start_s": 0.5, "end_s": 1.0}]})";
  }
  const auto two = parse_alignment(dir / "two.json", 256, 22050, 87);
  REQUIRE(two.durations.size() == 2);
  // 0.5 s = 43.07 raw frames each; scaled to 43.5 + 43.5, the tie goes to the first phone.
  CHECK(two.durations[0] == 44);
  CHECK(two.durations[1] == 43);

  {
    std::ofstream out(dir / "one.json");
    out << R"({"phones": [{"symbol": "AA", "start_s": 0.0, "end_s": 1.0}]})";
  }
  CHECK(parse_alignment(dir / "one.json", 256, 22050, 87).durations == std::vector<int>{87});

  {
    std::ofstream out(dir / "overlap.json");
    out << R"({"phones": [{"symbol": "A", "start_s": 0.0, "end_s": 0.5},
                          {"symbol": "B", "start_s": 0.4, "end_s": 1.0}]})";
  }
  CHECK_THROWS_AS(parse_alignment(dir / "overlap.json", 256, 22050, 87), FormatError);
  CHECK_THROWS_AS(intervals_to_durations({}, {}, 256, 22050, 87), FormatError);
  CHECK_THROWS_AS(intervals_to_durations({{"A", 0.0, 1.0}}, {}, 256, 22050, 95), FormatError);
}

TEST_CASE("parse_alignment: MFA TextGrid with gaps and words") {
  const auto dir = scratch_dir("textgrid");
  std::ofstream(dir / "u.TextGrid") << R"(File type = "ooTextFile"
Object class = "TextGrid"

xmin = 0
xmax = 1.0
tiers? <exists>
size = 2
item []:
    item [1]:
        class = "IntervalTier"
        name = "words"
        xmin = 0
        xmax = 1.0
        intervals: size = 2
        intervals [1]:
            xmin = 0
            xmax = 0.2
            text = ""
        intervals [2]:
            xmin = 0.2
            xmax = 1.0
            text = "moon"
    item [2]:
        class = "IntervalTier"
        name = "phones"
        xmin = 0
        xmax = 1.0
        intervals: size = 3
        intervals [1]:
            xmin = 0.2
            xmax = 0.5
            text = "M"
        intervals [2]:
            xmin = 0.5
            xmax = 0.8
            text = "UW"
        intervals [3]:
            xmin = 0.8
            xmax = 1.0
            text = "N"
)";
  const auto a = parse_alignment(dir / "u.TextGrid", 256, 22050, 87);
  CHECK(a.phonemes == std::vector<std::string>{"sil", "M", "UW", "N"});
  int sum = 0;
  for (int d : a.durations) sum += d;
  CHECK(sum == 87);
  REQUIRE(a.words.size() == 1);
  CHECK(a.words[0].text == "moon");
  CHECK(a.words[0].first_phone == 1);
  CHECK(a.words[0].end_phone == 4);
}

TEST_CASE("split_corpus: proportions, determinism and validation") {
  CorpusManifest m;
  for (int i = 0; i < 100; ++i) {
    AlignedUtterance u;
    u.utterance.id = "u" + std::to_string(i);
    m.entries.push_back(u);
  }
  m.splits.assign(100, Split::Train);
  const auto a = split_corpus(m, {0.98, 0.01, 0.01}, 3);
  CHECK(a.count(Split::Train) == 98);
  CHECK(a.count(Split::Valid) == 1);
  CHECK(a.count(Split::Test) == 1);
  const auto b = split_corpus(m, {0.98, 0.01, 0.01}, 3);
  CHECK(a.splits == b.splits);
  const auto c = split_corpus(m, {0.98, 0.01, 0.01}, 4);
  CHECK(c.count(Split::Train) == 98);
  CHECK_THROWS_AS(split_corpus(m, {0.5, 0.5, 0.1}, 3), InvalidArgument);
}

TEST_CASE("synth_corpus: determinism and invariants") {
  FeatureConfig config;
  config.num_mels = 8;
  const auto dir = scratch_dir("synth");
  const auto first = synth_corpus(10, 7, config, dir / "corpus");
  write_manifest(first, dir / "m1");
  const auto second = synth_corpus(10, 7, config, dir / "corpus");
  write_manifest(second, dir / "m2");
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  CHECK(slurp(dir / "m1" / "manifest.jsonl") == slurp(dir / "m2" / "manifest.jsonl"));
  for (const auto& e : first.entries) {
    CHECK(slurp(dir / "m1" / "features" / (e.utterance.id + ".mel.bin")) ==
          slurp(dir / "m2" / "features" / (e.utterance.id + ".mel.bin")));
    long sum = 0;
    for (int d : e.durations) sum += d;
    CHECK(static_cast<std::size_t>(sum) == e.mel.num_frames());
    CHECK_NOTHROW(e.validate());
    CHECK(!e.words.empty());
  }
  const auto single = synth_corpus(1, 7, config);
  CHECK(single.entries.size() == 1);
  CHECK_NOTHROW(single.entries[0].validate());
}

TEST_CASE("manifest: round trip and ingestion with skipped entries") {
  FeatureConfig config;
  config.num_mels = 8;
  const auto dir = scratch_dir("manifest");
  const auto corpus = synth_corpus(6, 3, config, dir / "corpus");
  write_manifest(corpus, dir / "out");
  const auto back = read_manifest(dir / "out");
  REQUIRE(back.entries.size() == corpus.entries.size());
  CHECK(back.feature_config == corpus.feature_config);
  CHECK(back.speakers == corpus.speakers);
  for (std::size_t i = 0; i < back.entries.size(); ++i) {
    const auto& a = corpus.entries[i];
    const auto& b = back.entries[i];
    CHECK(a.mel.bit_equal(b.mel));
    CHECK(a.pitch == b.pitch);
    CHECK(a.phonemes == b.phonemes);
    CHECK(a.durations == b.durations);
    CHECK(a.utterance.text == b.utterance.text);
    CHECK(a.words.size() == b.words.size());
  }

  // Re-ingest the synthetic WAVs through the standard path, plus one broken file.
  std::ofstream(dir / "corpus" / "wavs" / "s1" / "broken.wav") << "not a wav";
  BuildStats stats;
  const auto ingested = build_manifest(dir / "corpus", config, &stats);
  CHECK(stats.ingested == 6);
  CHECK(stats.skipped == 1);
  REQUIRE(ingested.entries.size() == corpus.entries.size());
  for (const auto& src : corpus.entries) {
    const auto it = std::find_if(ingested.entries.begin(), ingested.entries.end(),
                                 [&](const AlignedUtterance& u) { return u.utterance.id == src.utterance.id; });
    REQUIRE(it != ingested.entries.end());
    const auto& e = *it;
    CHECK(e.durations == src.durations);
    CHECK(e.mel.bit_equal(src.mel));
    CHECK(e.speaker_index == src.speaker_index);
  }
  CHECK_THROWS_AS(build_manifest(scratch_dir("empty_corpus"), config), InvalidArgument);
}
