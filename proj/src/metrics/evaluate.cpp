#include <cmath>
#include <filesystem>
#include <iomanip>
#include <sstream>

#include "seamless/audio.hpp"
#include "seamless/error.hpp"
#include "seamless/log.hpp"
#include "seamless/metrics.hpp"

namespace seamless {

DiffusionGenerator::DiffusionGenerator(EditorModel model, NoiseSchedule schedule, ReconstructOptions options)
    : model_(std::move(model)), schedule_(std::move(schedule)), options_(options) {}

MelSpectrogram DiffusionGenerator::generate(const AlignedUtterance& utterance, const MaskSpec& spec, Rng& rng) {
  return reconstruct(model_, utterance, spec, schedule_, rng, options_).mel;
}

MelSpectrogram OracleGenerator::generate(const AlignedUtterance& utterance, const MaskSpec&, Rng&) {
  return utterance.mel;
}

namespace {

std::vector<float> region_samples(const std::vector<float>& wave, const MaskSpec& spec, int hop) {
  std::vector<float> out;
  for (const auto& r : spec.regions) {
    const std::size_t begin = std::min(wave.size(), r.start_frame * static_cast<std::size_t>(hop));
    const std::size_t end = std::min(wave.size(), r.end_frame * static_cast<std::size_t>(hop));
    out.insert(out.end(), wave.begin() + static_cast<std::ptrdiff_t>(begin),
               wave.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

std::optional<double> try_stoi(const std::vector<float>& ref, const std::vector<float>& test, int rate,
                               const std::string& id) {
  try {
    return stoi(ref, test, rate);
  } catch (const InvalidArgument& e) {
    log::debug("stoi skipped for ", id, ": ", e.what());
    return std::nullopt;
  }
}

MetricSummary summarize(const std::vector<UtteranceScore>& scores,
                        std::optional<double> UtteranceScore::*field) {
  MetricSummary s;
  double total = 0.0;
  for (const auto& u : scores) {
    if (u.*field) {
      total += *(u.*field);
      ++s.count;
    }
  }
  if (s.count) s.mean = total / static_cast<double>(s.count);
  return s;
}

nlohmann::json opt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

std::optional<double> opt_from(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

nlohmann::json summary_json(const MetricSummary& s) { return {{"mean", opt(s.mean)}, {"count", s.count}}; }

std::string cell(const MetricSummary& s, int precision) {
  if (!s.mean) return "n/a";
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << *s.mean << " (" << s.count << ")";
  return os.str();
}

std::string pesq_cell(const EvalReport& r, const MetricSummary& s) {
  return r.pesq_available ? cell(s, 3) : "unavailable";
}

std::string render(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(rows.front().size(), 0);
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream os;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      os << (c ? "  " : "") << std::left << std::setw(static_cast<int>(width[c])) << rows[r][c];
    }
    os << '\n';
    if (r == 0) {
      std::size_t total = 0;
      for (auto w : width) total += w;
      os << std::string(total + 2 * (width.size() - 1), '-') << '\n';
    }
  }
  return os.str();
}

std::vector<std::string> header() {
  return {"system", "n", "MCD dB", "STOI copy-syn", "STOI real", "PESQ copy-syn", "PESQ real"};
}

std::vector<std::string> row(const EvalReport& r) {
  return {r.label,       std::to_string(r.utterances.size()), cell(r.mcd(), 3),
          cell(r.stoi_copy(), 3), cell(r.stoi_real(), 3), pesq_cell(r, r.pesq_copy()),
          pesq_cell(r, r.pesq_real())};
}

}  // namespace

MetricSummary EvalReport::mcd() const {
  MetricSummary s;
  double total = 0.0;
  for (const auto& u : utterances) total += u.mcd;
  s.count = utterances.size();
  if (s.count) s.mean = total / static_cast<double>(s.count);
  return s;
}
MetricSummary EvalReport::stoi_copy() const { return summarize(utterances, &UtteranceScore::stoi_copy); }
MetricSummary EvalReport::stoi_real() const { return summarize(utterances, &UtteranceScore::stoi_real); }
MetricSummary EvalReport::pesq_copy() const { return summarize(utterances, &UtteranceScore::pesq_copy); }
MetricSummary EvalReport::pesq_real() const { return summarize(utterances, &UtteranceScore::pesq_real); }

nlohmann::json EvalReport::to_json() const {
  auto items = nlohmann::json::array();
  for (const auto& u : utterances) {
    items.push_back({{"id", u.id},
                     {"frames", u.frames},
                     {"masked_frames", u.masked_frames},
                     {"regions", u.regions},
                     {"mcd", u.mcd},
                     {"stoi_copy", opt(u.stoi_copy)},
                     {"stoi_real", opt(u.stoi_real)},
                     {"pesq_copy", opt(u.pesq_copy)},
                     {"pesq_real", opt(u.pesq_real)}});
  }
  return {{"label", label},
          {"generator", generator},
          {"config_hash", config_hash},
          {"protocol_hash", protocol_hash},
          {"seed", seed},
          {"mask_rate", mask_rate},
          {"pesq", pesq_available ? "available" : "unavailable"},
          {"summary",
           {{"mcd", summary_json(mcd())},
            {"stoi_copy", summary_json(stoi_copy())},
            {"stoi_real", summary_json(stoi_real())},
            {"pesq_copy", summary_json(pesq_copy())},
            {"pesq_real", summary_json(pesq_real())}}},
          {"utterances", items}};
}

std::string EvalReport::table() const { return render({header(), row(*this)}); }

EvalReport report_from_json(const nlohmann::json& json) {
  try {
    EvalReport r;
    r.label = json.at("label").get<std::string>();
    r.generator = json.at("generator").get<std::string>();
    r.config_hash = json.at("config_hash").get<std::string>();
    r.protocol_hash = json.at("protocol_hash").get<std::string>();
    r.seed = json.at("seed").get<std::uint64_t>();
    r.mask_rate = json.at("mask_rate").get<double>();
    r.pesq_available = json.at("pesq").get<std::string>() == "available";
    for (const auto& u : json.at("utterances")) {
      UtteranceScore s;
      s.id = u.at("id").get<std::string>();
      s.frames = u.at("frames").get<std::size_t>();
      s.masked_frames = u.at("masked_frames").get<std::size_t>();
      s.regions = u.at("regions").get<std::size_t>();
      s.mcd = u.at("mcd").get<double>();
      s.stoi_copy = opt_from(u, "stoi_copy");
      s.stoi_real = opt_from(u, "stoi_real");
      s.pesq_copy = opt_from(u, "pesq_copy");
      s.pesq_real = opt_from(u, "pesq_real");
      r.utterances.push_back(std::move(s));
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("evaluation report: ") + e.what());
  }
}

EvalReport evaluate_corpus(const std::vector<const AlignedUtterance*>& items, RegionGenerator& generator,
                           const FeatureConfig& features, const EvalConfig& config, const PesqAdapter& pesq) {
  if (items.empty()) throw InvalidArgument("evaluate_corpus: no utterances to evaluate");
  EvalReport report;
  report.label = "full";
  report.generator = generator.name();
  report.config_hash = config.config_hash;
  report.protocol_hash = config.protocol_hash;
  report.seed = config.seed;
  report.mask_rate = config.mask_rate;
  report.pesq_available = pesq.available();

  std::unique_ptr<GriffinLimVocoder> vocoder;
  if (config.score_audio) vocoder = std::make_unique<GriffinLimVocoder>(features, config.vocoder);
  const int hop = features.hop_length;
  const int rate = features.sample_rate;

  Rng master(config.seed);
  for (const auto* item : items) {
    Rng mask_rng = master.fork();
    Rng gen_rng = master.fork();
    const auto spec = sample_training_mask(*item, config.mask_rate, mask_rng);
    const auto generated = generator.generate(*item, spec, gen_rng);

    UtteranceScore score;
    score.id = item->utterance.id;
    score.frames = item->mel.num_frames();
    score.masked_frames = spec.masked_frames();
    score.regions = spec.regions.size();
    score.mcd = masked_mcd(item->mel, generated, spec, config.cepstral_order);

    if (vocoder) {
      const auto test_wave = region_samples(vocoder->vocode(generated), spec, hop);
      const auto copy_wave = region_samples(vocoder->vocode(item->mel), spec, hop);
      score.stoi_copy = try_stoi(copy_wave, test_wave, rate, score.id);
      if (pesq.available()) score.pesq_copy = pesq.score(copy_wave, test_wave, rate);

      if (!item->utterance.audio_path.empty() && std::filesystem::exists(item->utterance.audio_path)) {
        try {
          auto real = load_audio(item->utterance.audio_path, rate);
          real.resize((item->mel.num_frames() - 1) * static_cast<std::size_t>(hop), 0.0f);
          const auto real_wave = region_samples(real, spec, hop);
          score.stoi_real = try_stoi(real_wave, test_wave, rate, score.id);
          if (pesq.available()) score.pesq_real = pesq.score(real_wave, test_wave, rate);
        } catch (const Error& e) {
          log::warn("evaluate: cannot score real audio for ", score.id, ": ", e.what());
        }
      }
    }
    report.utterances.push_back(std::move(score));
  }
  return report;
}

AblationTable combine_reports(std::vector<EvalReport> rows) {
  if (rows.empty()) throw InvalidArgument("combine_reports: no reports");
  for (const auto& r : rows) {
    if (r.protocol_hash != rows.front().protocol_hash) {
      throw InvalidArgument("combine_reports: '" + r.label + "' was evaluated under protocol " + r.protocol_hash +
                            " but '" + rows.front().label + "' under " + rows.front().protocol_hash);
    }
  }
  return AblationTable{std::move(rows)};
}

nlohmann::json AblationTable::to_json() const {
  auto out = nlohmann::json::array();
  for (const auto& r : rows) out.push_back(r.to_json());
  return {{"protocol_hash", rows.empty() ? "" : rows.front().protocol_hash}, {"rows", out}};
}

std::string AblationTable::table() const {
  std::vector<std::vector<std::string>> lines{header()};
  for (const auto& r : rows) lines.push_back(row(r));
  return render(lines);
}

}  // namespace seamless
