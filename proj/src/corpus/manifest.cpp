#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "seamless/audio.hpp"
#include "seamless/corpus.hpp"
#include "seamless/error.hpp"
#include "seamless/log.hpp"
#include "seamless/rng.hpp"

namespace seamless {

static_assert(std::endian::native == std::endian::little, "sidecar I/O assumes a little-endian host");

namespace {

constexpr char kArrayMagic[4] = {'S', 'M', 'L', 'A'};
constexpr std::uint32_t kArrayVersion = 1;
constexpr int kManifestVersion = 1;

std::string sidecar_stem(const std::string& id) {
  std::string out = id;
  for (auto& c : out) {
    if (c == '/' || c == '\\' || c == ' ') c = '_';
  }
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  std::string s = ss.str();
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
  return s;
}

}  // namespace

std::vector<std::size_t> AlignedUtterance::phone_offsets() const {
  std::vector<std::size_t> offsets(durations.size() + 1, 0);
  for (std::size_t i = 0; i < durations.size(); ++i) {
    offsets[i + 1] = offsets[i] + static_cast<std::size_t>(std::max(durations[i], 0));
  }
  return offsets;
}

void AlignedUtterance::validate() const {
  const std::string who = "utterance '" + utterance.id + "': ";
  mel.validate();
  if (phonemes.empty()) throw InvalidArgument(who + "no phonemes");
  if (durations.size() != phonemes.size()) {
    throw InvalidArgument(who + std::to_string(durations.size()) + " durations for " +
                          std::to_string(phonemes.size()) + " phonemes");
  }
  long sum = 0;
  for (int d : durations) {
    if (d < 0) throw InvalidArgument(who + "negative duration");
    sum += d;
  }
  if (static_cast<std::size_t>(sum) != mel.num_frames()) {
    throw InvalidArgument(who + "durations sum to " + std::to_string(sum) + " but mel has " +
                          std::to_string(mel.num_frames()) + " frames");
  }
  if (pitch.size() != mel.num_frames()) {
    throw InvalidArgument(who + "pitch length " + std::to_string(pitch.size()) + " != frame count");
  }
  for (float f : pitch) {
    if (!std::isfinite(f) || f < 0.0f) throw InvalidArgument(who + "invalid pitch value");
  }
  for (const auto& w : words) {
    if (w.first_phone >= w.end_phone || w.end_phone > phonemes.size()) {
      throw InvalidArgument(who + "word '" + w.text + "' has an invalid phoneme span");
    }
  }
  if (speaker_index < 0) throw InvalidArgument(who + "negative speaker index");
}

const char* to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Valid: return "valid";
    case Split::Test: return "test";
  }
  return "train";
}

Split split_from_string(const std::string& name) {
  if (name == "train") return Split::Train;
  if (name == "valid") return Split::Valid;
  if (name == "test") return Split::Test;
  throw FormatError("unknown split '" + name + "'");
}

std::vector<const AlignedUtterance*> CorpusManifest::subset(Split split) const {
  std::vector<const AlignedUtterance*> out;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (splits.at(i) == split) out.push_back(&entries[i]);
  }
  return out;
}

std::size_t CorpusManifest::count(Split split) const {
  return static_cast<std::size_t>(std::count(splits.begin(), splits.end(), split));
}

nlohmann::json to_json(const FeatureConfig& c) {
  return {{"sample_rate", c.sample_rate}, {"n_fft", c.n_fft},
          {"win_length", c.win_length},   {"hop_length", c.hop_length},
          {"num_mels", c.num_mels},       {"fmin", c.fmin},
          {"fmax", c.fmax},               {"log_floor", c.log_floor},
          {"center", c.center},           {"f0_min", c.f0_min},
          {"f0_max", c.f0_max},           {"voicing_threshold", c.voicing_threshold}};
}

void read_feature_config(JsonReader& r, FeatureConfig& c) {
  r.read("sample_rate", c.sample_rate);
  r.read("n_fft", c.n_fft);
  r.read("win_length", c.win_length);
  r.read("hop_length", c.hop_length);
  r.read("num_mels", c.num_mels);
  r.read("fmin", c.fmin);
  r.read("fmax", c.fmax);
  r.read("log_floor", c.log_floor);
  r.read("center", c.center);
  r.read("f0_min", c.f0_min);
  r.read("f0_max", c.f0_max);
  r.read("voicing_threshold", c.voicing_threshold);
  r.finish();
  if (c.sample_rate <= 0 || c.hop_length <= 0 || c.win_length <= 0 || c.n_fft < c.win_length ||
      c.num_mels < 1 || c.log_floor <= 0.0 || c.fmax <= c.fmin) {
    throw ConfigError(r.path("*"), "inconsistent feature parameters");
  }
}

void write_float_array(const std::filesystem::path& path, const std::vector<std::size_t>& shape,
                       std::span<const float> values) {
  const std::size_t expected =
      std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
  if (expected != values.size()) throw ShapeError("write_float_array: shape/product mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kArrayMagic, 4);
  const std::uint32_t version = kArrayVersion;
  const auto ndim = static_cast<std::uint32_t>(shape.size());
  out.write(reinterpret_cast<const char*>(&version), 4);
  out.write(reinterpret_cast<const char*>(&ndim), 4);
  for (std::size_t d : shape) {
    const auto dim = static_cast<std::uint64_t>(d);
    out.write(reinterpret_cast<const char*>(&dim), 8);
  }
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(float)));
  if (!out) throw IoError("short write to " + path.string());
}

std::vector<float> read_float_array(const std::filesystem::path& path,
                                    std::vector<std::size_t>* shape_out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[4];
  std::uint32_t version = 0, ndim = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), 4);
  in.read(reinterpret_cast<char*>(&ndim), 4);
  if (!in || std::memcmp(magic, kArrayMagic, 4) != 0 || version != kArrayVersion || ndim > 8) {
    throw FormatError(path.string() + ": not a float array sidecar");
  }
  std::vector<std::size_t> shape(ndim);
  std::size_t count = 1;
  for (auto& d : shape) {
    std::uint64_t dim = 0;
    in.read(reinterpret_cast<char*>(&dim), 8);
    d = static_cast<std::size_t>(dim);
    count *= d;
  }
  std::vector<float> values(count);
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(count * sizeof(float)));
  if (!in) throw FormatError(path.string() + ": truncated float array");
  if (shape_out) *shape_out = shape;
  return values;
}

CorpusManifest build_manifest(const std::filesystem::path& corpus_dir, const FeatureConfig& config,
                              BuildStats* stats) {
  if (!std::filesystem::is_directory(corpus_dir)) {
    throw IoError("corpus directory not found: " + corpus_dir.string());
  }
  std::vector<std::filesystem::path> wavs;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(corpus_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".wav") wavs.push_back(entry.path());
  }
  std::sort(wavs.begin(), wavs.end());

  CorpusManifest manifest;
  manifest.feature_config = config;
  BuildStats local;
  std::set<std::string> ids;
  for (const auto& wav : wavs) {
    try {
      AlignedUtterance u;
      u.utterance.id = wav.stem().string();
      if (ids.count(u.utterance.id)) throw FormatError("duplicate utterance id " + u.utterance.id);
      u.utterance.audio_path = wav.string();
      u.utterance.sample_rate = config.sample_rate;
      u.utterance.speaker_id = wav.parent_path().filename().string();

      const auto samples = load_audio(wav, config.sample_rate);
      u.mel = compute_mel(samples, config);
      u.pitch = extract_pitch(samples, config);

      auto sidecar = wav;
      sidecar.replace_extension(".json");
      if (!std::filesystem::exists(sidecar)) sidecar.replace_extension(".TextGrid");
      const Alignment alignment =
          parse_alignment(sidecar, config.hop_length, config.sample_rate, u.mel.num_frames());
      u.phonemes = alignment.phonemes;
      u.durations = alignment.durations;
      u.words = alignment.words;

      if (sidecar.extension() == ".json") {
        std::ifstream in(sidecar);
        const auto doc = nlohmann::json::parse(in);
        if (doc.contains("speaker")) u.utterance.speaker_id = doc["speaker"].get<std::string>();
        if (doc.contains("text")) u.utterance.text = doc["text"].get<std::string>();
      }
      auto transcript = wav;
      transcript.replace_extension(".txt");
      if (u.utterance.text.empty() && std::filesystem::exists(transcript)) {
        u.utterance.text = read_text_file(transcript);
      }
      if (u.utterance.text.empty()) {
        for (const auto& w : u.words) u.utterance.text += (u.utterance.text.empty() ? "" : " ") + w.text;
      }
      u.validate();
      ids.insert(u.utterance.id);
      manifest.entries.push_back(std::move(u));
      ++local.ingested;
    } catch (const std::exception& e) {
      log::debug("skipping ", wav.string(), ": ", e.what());
      ++local.skipped;
    }
  }
  if (local.skipped > 0) log::warn("build_manifest: skipped ", local.skipped, " unreadable entries");
  if (stats) *stats = local;
  if (manifest.entries.empty()) throw InvalidArgument("build_manifest: empty corpus in " + corpus_dir.string());

  std::set<std::string> speakers;
  for (const auto& e : manifest.entries) speakers.insert(e.utterance.speaker_id);
  manifest.speakers.assign(speakers.begin(), speakers.end());
  for (auto& e : manifest.entries) {
    e.speaker_index = static_cast<int>(
        std::lower_bound(manifest.speakers.begin(), manifest.speakers.end(), e.utterance.speaker_id) -
        manifest.speakers.begin());
  }
  manifest.splits.assign(manifest.entries.size(), Split::Train);
  return manifest;
}

CorpusManifest split_corpus(CorpusManifest manifest, const SplitRatios& ratios, std::uint64_t seed) {
  const double sum = ratios.train + ratios.valid + ratios.test;
  if (std::abs(sum - 1.0) > 1e-6 || ratios.train < 0 || ratios.valid < 0 || ratios.test < 0) {
    throw InvalidArgument("split_corpus: ratios must be non-negative and sum to 1 (got " +
                          std::to_string(sum) + ")");
  }
  const std::size_t n = manifest.entries.size();
  if (n == 0) throw InvalidArgument("split_corpus: empty corpus");

  const double shares[3] = {ratios.train * n, ratios.valid * n, ratios.test * n};
  std::size_t sizes[3];
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    sizes[i] = static_cast<std::size_t>(std::floor(shares[i] + 1e-9));
    assigned += sizes[i];
  }
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return shares[a] - std::floor(shares[a] + 1e-9) > shares[b] - std::floor(shares[b] + 1e-9);
  });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++sizes[order[k % 3]];

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.index(i + 1)]);

  manifest.splits.assign(n, Split::Train);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t idx = perm[k];
    manifest.splits[idx] = k < sizes[0] ? Split::Train : (k < sizes[0] + sizes[1] ? Split::Valid : Split::Test);
  }
  return manifest;
}

void write_manifest(const CorpusManifest& manifest, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "features");
  std::ofstream lines(dir / "manifest.jsonl", std::ios::binary);
  if (!lines) throw IoError("cannot write manifest in " + dir.string());
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const auto& e = manifest.entries[i];
    e.validate();
    if (!(manifest.feature_config.num_mels == static_cast<int>(e.mel.num_mels()))) {
      throw InvalidArgument("write_manifest: entry '" + e.utterance.id + "' has a different mel size");
    }
    const std::string stem = sidecar_stem(e.utterance.id);
    const std::string mel_rel = "features/" + stem + ".mel.bin";
    const std::string f0_rel = "features/" + stem + ".f0.bin";
    write_float_array(dir / mel_rel, {e.mel.num_frames(), e.mel.num_mels()}, e.mel.values());
    write_float_array(dir / f0_rel, {e.pitch.size()}, e.pitch);

    nlohmann::json words = nlohmann::json::array();
    for (const auto& w : e.words) {
      words.push_back({{"text", w.text}, {"first_phone", w.first_phone}, {"end_phone", w.end_phone}});
    }
    nlohmann::json record = {
        {"id", e.utterance.id},
        {"speaker_id", e.utterance.speaker_id},
        {"speaker_index", e.speaker_index},
        {"text", e.utterance.text},
        {"audio_path", e.utterance.audio_path},
        {"sample_rate", e.utterance.sample_rate},
        {"phonemes", e.phonemes},
        {"durations", e.durations},
        {"words", words},
        {"num_frames", e.mel.num_frames()},
        {"num_mels", e.mel.num_mels()},
        {"hop_length", e.mel.hop_length()},
        {"win_length", e.mel.win_length()},
        {"mel_path", mel_rel},
        {"pitch_path", f0_rel},
        {"split", to_string(manifest.splits.at(i))},
    };
    lines << record.dump() << '\n';
  }
  nlohmann::json meta = {{"format_version", kManifestVersion},
                         {"feature_config", to_json(manifest.feature_config)},
                         {"speakers", manifest.speakers},
                         {"num_entries", manifest.entries.size()}};
  std::ofstream meta_out(dir / "manifest.meta.json", std::ios::binary);
  meta_out << meta.dump(2) << '\n';
  if (!lines || !meta_out) throw IoError("short write in " + dir.string());
}

CorpusManifest read_manifest(const std::filesystem::path& dir) {
  std::ifstream meta_in(dir / "manifest.meta.json");
  if (!meta_in) throw IoError("no manifest.meta.json in " + dir.string());
  CorpusManifest manifest;
  try {
    const auto meta = nlohmann::json::parse(meta_in);
    if (meta.at("format_version").get<int>() != kManifestVersion) {
      throw FormatError("unsupported manifest version");
    }
    JsonReader fc(meta.at("feature_config"), "feature_config");
    read_feature_config(fc, manifest.feature_config);
    manifest.speakers = meta.at("speakers").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(dir.string() + "/manifest.meta.json: " + e.what());
  }

  std::ifstream lines(dir / "manifest.jsonl");
  if (!lines) throw IoError("no manifest.jsonl in " + dir.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto r = nlohmann::json::parse(line);
      AlignedUtterance e;
      e.utterance.id = r.at("id").get<std::string>();
      e.utterance.speaker_id = r.at("speaker_id").get<std::string>();
      e.utterance.text = r.at("text").get<std::string>();
      e.utterance.audio_path = r.at("audio_path").get<std::string>();
      e.utterance.sample_rate = r.at("sample_rate").get<int>();
      e.speaker_index = r.at("speaker_index").get<int>();
      e.phonemes = r.at("phonemes").get<std::vector<std::string>>();
      e.durations = r.at("durations").get<std::vector<int>>();
      for (const auto& w : r.at("words")) {
        e.words.push_back({w.at("text").get<std::string>(), w.at("first_phone").get<std::size_t>(),
                           w.at("end_phone").get<std::size_t>()});
      }
      std::vector<std::size_t> shape;
      auto mel_values = read_float_array(dir / r.at("mel_path").get<std::string>(), &shape);
      if (shape.size() != 2) throw FormatError("mel sidecar is not 2-D");
      e.mel = MelSpectrogram(shape[0], shape[1], std::move(mel_values), r.at("hop_length").get<int>(),
                             r.at("win_length").get<int>());
      e.pitch = read_float_array(dir / r.at("pitch_path").get<std::string>());
      e.validate();
      manifest.entries.push_back(std::move(e));
      manifest.splits.push_back(split_from_string(r.at("split").get<std::string>()));
    } catch (const nlohmann::json::exception& ex) {
      throw FormatError("manifest.jsonl line " + std::to_string(line_no) + ": " + ex.what());
    }
  }
  return manifest;
}

}  // namespace seamless
