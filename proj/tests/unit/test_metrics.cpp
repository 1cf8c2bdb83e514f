#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>

#include "doctest.h"
#include "model_fixtures.hpp"
#include "seamless/audio.hpp"
#include "seamless/error.hpp"
#include "seamless/metrics.hpp"
#include "test_helpers.hpp"

using namespace seamless;
using namespace seamless::testing;

namespace {

constexpr double kMcdConstant = 10.0 * 1.4142135623730950488 / 2.3025850929940456840;

MelSpectrogram random_mel(std::size_t frames, std::size_t mels, unsigned seed) {
  const auto v = white_noise(frames * mels, seed, 2.0);
  return MelSpectrogram(frames, mels, v);
}

// Speech-like reference: concatenated synthetic utterances written as WAVs.
const std::vector<float>& speech() {
  static const std::vector<float> s = [] {
    const auto dir = scratch_dir("metrics_speech");
    const auto m = synth_corpus(4, 3, FeatureConfig{}, dir);
    std::vector<float> out;
    for (const auto& e : m.entries) {
      const auto a = load_audio(e.utterance.audio_path, 22050);
      out.insert(out.end(), a.begin(), a.end());
    }
    return out;
  }();
  return s;
}

std::vector<float> with_noise(const std::vector<float>& x, double snr_db, unsigned seed) {
  double power = 0.0;
  for (float v : x) power += static_cast<double>(v) * v;
  power /= static_cast<double>(x.size());
  const double stddev = std::sqrt(power / std::pow(10.0, snr_db / 10.0));
  const auto n = white_noise(x.size(), seed, stddev);
  std::vector<float> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + n[i];
  return out;
}

}  // namespace

TEST_CASE("mel_cepstrum is an orthonormal DCT (Parseval)") {
  const auto mel = random_mel(1, 16, 4);
  const auto frame = mel.frame(0);
  const auto c = mel_cepstrum(frame, 100);
  REQUIRE(c.size() == 15);
  const double mean = std::accumulate(frame.begin(), frame.end(), 0.0) / 16.0;
  double energy = 16.0 * mean * mean;  // c0^2
  for (double v : c) energy += v * v;
  double direct = 0.0;
  for (float v : frame) direct += static_cast<double>(v) * v;
  CHECK(energy == doctest::Approx(direct).epsilon(1e-9));
  CHECK(mel_cepstrum(frame).size() == 13);
}

TEST_CASE("mcd: identity, closed form, symmetry and triangle inequality") {
  const auto a = random_mel(20, 80, 1);
  CHECK(mcd(a, a) == 0.0);

  std::vector<std::vector<double>> ref(7, std::vector<double>(13, 0.0)), test = ref;
  for (std::size_t f = 0; f < ref.size(); ++f) {
    for (std::size_t k = 0; k < 13; ++k) ref[f][k] = 0.1 * static_cast<double>(f + k);
    test[f] = ref[f];
    test[f][4] += 0.37;
  }
  CHECK(std::abs(mcd_cepstra(ref, test) - kMcdConstant * 0.37) < 1e-9);

  // The same offset injected through the mel domain along DCT basis vector k = 3.
  MelSpectrogram shifted = a;
  for (std::size_t f = 0; f < a.num_frames(); ++f) {
    for (std::size_t m = 0; m < 80; ++m) {
      shifted.at(f, m) += static_cast<float>(0.25 * std::sqrt(2.0 / 80) * std::cos(M_PI * 3 * (2.0 * m + 1) / 160.0));
    }
  }
  CHECK(mcd(a, shifted) == doctest::Approx(kMcdConstant * 0.25).epsilon(1e-4));

  for (unsigned s = 0; s < 10; ++s) {
    const auto x = random_mel(12, 16, 10 + s), y = random_mel(12, 16, 40 + s), z = random_mel(12, 16, 70 + s);
    CHECK(mcd(x, y) == doctest::Approx(mcd(y, x)).epsilon(1e-12));
    CHECK(mcd(x, z) <= mcd(x, y) + mcd(y, z) + 1e-9);
    CHECK(mcd(x, y) > 0.0);
  }
  CHECK_THROWS_AS(mcd(a, random_mel(19, 80, 2)), ShapeError);
}

TEST_CASE("masked_mcd only looks at region frames") {
  const auto a = random_mel(30, 8, 5);
  auto b = a;
  for (std::size_t f = 0; f < 10; ++f) b.at(f, 2) += 3.0f;
  MaskSpec spec;
  spec.regions = {{12, 20, 0, 0}};
  CHECK(masked_mcd(a, b, spec) == 0.0);
  spec.regions = {{5, 15, 0, 0}};
  CHECK(masked_mcd(a, b, spec) > 0.0);
}

TEST_CASE("stoi: self-similarity, noise, monotonicity and error contract") {
  const auto& x = speech();
  REQUIRE(x.size() > 22050);
  CHECK(stoi(x, x, 22050) >= 0.999);
  CHECK(stoi(x, with_noise(x, -10.0, 9), 22050) < 0.6);

  double previous = 2.0;
  for (double snr : {20.0, 10.0, 0.0, -5.0, -10.0}) {
    const double d = stoi(x, with_noise(x, snr, 17), 22050);
    CHECK(d < previous);
    CHECK(d >= -1.0);
    CHECK(d <= 1.0);
    previous = d;
  }

  const std::vector<float> silence(44100, 0.0f);
  CHECK_THROWS_AS(stoi(silence, silence, 22050), InvalidArgument);
  const std::vector<float> short_ref(x.begin(), x.begin() + 2000);
  CHECK_THROWS_AS(stoi(short_ref, short_ref, 22050), InvalidArgument);
  CHECK_THROWS_AS(stoi(x, short_ref, 22050), InvalidArgument);
}

TEST_CASE("PesqAdapter: unavailable, pass-through and failure") {
  const auto& x = speech();
  const std::vector<float> clip(x.begin(), x.begin() + 22050);
  PesqAdapter none;
  CHECK_FALSE(none.available());
  CHECK_FALSE(none.score(clip, clip, 22050).has_value());

  const auto dir = scratch_dir("pesq");
  const auto ok = dir / "ok.sh";
  {
    std::ofstream out(ok);
    out << "#!/bin/sh\n[ -f \"$1\" ] && [ -f \"$2\" ] || exit 3\necho \"MOS-LQO: 4.5\"\n";
  }
  const auto bad = dir / "bad.sh";
  {
    std::ofstream out(bad);
    out << "#!/bin/sh\necho boom >&2\nexit 1\n";
  }
  std::filesystem::permissions(ok, std::filesystem::perms::owner_all);
  std::filesystem::permissions(bad, std::filesystem::perms::owner_all);
  CHECK(PesqAdapter(ok.string()).score(clip, clip, 22050) == 4.5);
  CHECK_FALSE(PesqAdapter(bad.string()).score(clip, clip, 22050).has_value());
}

TEST_CASE("evaluate_corpus: oracle identity, determinism and PESQ columns") {
  const auto m = synth_corpus(3, 8, small_features());
  std::vector<const AlignedUtterance*> items;
  for (const auto& e : m.entries) items.push_back(&e);
  OracleGenerator oracle;
  EvalConfig config;
  config.seed = 7;
  config.vocoder.iterations = 2;
  config.protocol_hash = "p1";

  const auto report = evaluate_corpus(items, oracle, small_features(), config, PesqAdapter());
  REQUIRE(report.utterances.size() == 3);
  CHECK(report.mcd().mean == 0.0);
  CHECK(report.mcd().count == 3);
  for (const auto& u : report.utterances) {
    CHECK(u.mcd == 0.0);
    CHECK(u.masked_frames > 0);
    if (u.stoi_copy) CHECK(*u.stoi_copy >= 0.999);
    CHECK_FALSE(u.stoi_real.has_value());
  }
  CHECK(report.table().find("unavailable") != std::string::npos);
  CHECK(report.to_json().at("pesq") == "unavailable");

  const auto again = evaluate_corpus(items, oracle, small_features(), config, PesqAdapter());
  CHECK(again.to_json().dump() == report.to_json().dump());
  CHECK(report_from_json(report.to_json()).to_json() == report.to_json());

  // Mock scorer: 4.5 everywhere except the second call, which crashes.
  const auto dir = scratch_dir("pesq_eval");
  const auto script = dir / "flaky.sh";
  {
    std::ofstream out(script);
    out << "#!/bin/sh\nc=" << (dir / "count").string() << "\nn=$(cat $c 2>/dev/null || echo 0)\n"
        << "echo $((n+1)) > $c\n[ \"$n\" = 1 ] && exit 1\necho 4.5\n";
  }
  std::filesystem::permissions(script, std::filesystem::perms::owner_all);
  const auto scored = evaluate_corpus(items, oracle, small_features(), config, PesqAdapter(script.string()));
  CHECK(scored.pesq_available);
  CHECK(scored.pesq_copy().count == 2);
  CHECK(scored.pesq_copy().mean == 4.5);

  CHECK_THROWS_AS(evaluate_corpus({}, oracle, small_features(), config, PesqAdapter()), InvalidArgument);
}

TEST_CASE("combine_reports: three labelled rows, protocol mismatch refused") {
  EvalReport full, no_ac, no_pc;
  full.label = "full";
  no_ac.label = "w/o L_AC";
  no_pc.label = "w/o L_PC";
  for (auto* r : {&full, &no_ac, &no_pc}) {
    r->protocol_hash = "abc";
    r->utterances.push_back({"u1", 10, 5, 1, 1.5, 0.9, std::nullopt, std::nullopt, std::nullopt});
  }
  const auto table = combine_reports({full, no_ac, no_pc});
  REQUIRE(table.rows.size() == 3);
  const auto text = table.table();
  CHECK(text.find("full") != std::string::npos);
  CHECK(text.find("w/o L_AC") != std::string::npos);
  CHECK(text.find("w/o L_PC") != std::string::npos);
  CHECK(table.to_json().at("rows").size() == 3);

  no_pc.protocol_hash = "other";
  CHECK_THROWS_AS(combine_reports({full, no_ac, no_pc}), InvalidArgument);
}
