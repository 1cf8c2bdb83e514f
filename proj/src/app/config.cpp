#include <fstream>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

#include "seamless/app.hpp"
#include "seamless/error.hpp"

namespace seamless {

namespace {

nlohmann::json paths_json(const PathsConfig& p) {
  return {{"corpus_dir", p.corpus_dir}, {"manifest_dir", p.manifest_dir}, {"output_dir", p.output_dir},
          {"lexicon", p.lexicon}};
}

nlohmann::json synth_json(const RunConfig& c) {
  return {{"utterances", c.synth.utterances}, {"seed", c.synth.seed}};
}

nlohmann::json split_json(const RunConfig& c) {
  return {{"train", c.split.ratios.train},
          {"valid", c.split.ratios.valid},
          {"test", c.split.ratios.test},
          {"seed", c.split.seed}};
}

nlohmann::json schedule_json(const ScheduleConfig& s) {
  return {{"steps", s.steps}, {"beta_min", s.beta_min}, {"beta_max", s.beta_max}};
}

nlohmann::json eval_json(const EvalSection& e) {
  return {{"split", e.split},
          {"seed", e.seed},
          {"mask_rate", e.mask_rate},
          {"max_utterances", e.max_utterances},
          {"score_audio", e.score_audio},
          {"vocoder_iterations", e.vocoder_iterations},
          {"predicted_pitch", e.predicted_pitch}};
}

std::string hash_of(const nlohmann::json& j) { return sha256_hex(j.dump()); }

}  // namespace

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 failed");
  }
  std::ostringstream os;
  for (unsigned int i = 0; i < length; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return os.str();
}

nlohmann::json to_json(const RunConfig& c) {
  return {{"paths", paths_json(c.paths)},
          {"features", to_json(c.features)},
          {"synth", synth_json(c)},
          {"split", split_json(c)},
          {"model", to_json(c.model)},
          {"schedule", schedule_json(c.schedule)},
          {"train", to_json(c.train)},
          {"gst", to_json(c.gst)},
          {"gst_train", to_json(c.gst_train)},
          {"eval", eval_json(c.eval)}};
}

RunConfig run_config_from_json(const nlohmann::json& json) {
  RunConfig c;
  JsonReader root(json);
  if (root.has("paths")) {
    auto r = root.child("paths");
    r.read("corpus_dir", c.paths.corpus_dir);
    r.read("manifest_dir", c.paths.manifest_dir);
    r.read("output_dir", c.paths.output_dir);
    r.read("lexicon", c.paths.lexicon);
    r.finish();
  }
  if (root.has("features")) {
    auto r = root.child("features");
    read_feature_config(r, c.features);
    r.finish();
  }
  // Band counts follow the feature config unless stated explicitly.
  c.model.num_mels = c.features.num_mels;
  c.gst.num_mels = c.features.num_mels;
  if (root.has("synth")) {
    auto r = root.child("synth");
    r.read("utterances", c.synth.utterances);
    r.read("seed", c.synth.seed);
    r.finish();
  }
  if (root.has("split")) {
    auto r = root.child("split");
    r.read("train", c.split.ratios.train);
    r.read("valid", c.split.ratios.valid);
    r.read("test", c.split.ratios.test);
    r.read("seed", c.split.seed);
    r.finish();
  }
  if (root.has("model")) {
    auto r = root.child("model");
    read_model_config(r, c.model);
    r.finish();
  }
  if (root.has("schedule")) {
    auto r = root.child("schedule");
    r.read("steps", c.schedule.steps);
    r.read("beta_min", c.schedule.beta_min);
    r.read("beta_max", c.schedule.beta_max);
    r.finish();
  }
  if (root.has("train")) {
    auto r = root.child("train");
    read_train_config(r, c.train);
    r.finish();
  }
  if (root.has("gst")) {
    auto r = root.child("gst");
    read_gst_config(r, c.gst);
    r.finish();
  }
  if (root.has("gst_train")) {
    auto r = root.child("gst_train");
    read_gst_train_config(r, c.gst_train);
    r.finish();
  }
  if (root.has("eval")) {
    auto r = root.child("eval");
    r.read("split", c.eval.split);
    r.read("seed", c.eval.seed);
    r.read("mask_rate", c.eval.mask_rate);
    r.read("max_utterances", c.eval.max_utterances);
    r.read("score_audio", c.eval.score_audio);
    r.read("vocoder_iterations", c.eval.vocoder_iterations);
    r.read("predicted_pitch", c.eval.predicted_pitch);
    r.finish();
  }
  root.finish();

  if (c.model.num_mels != c.features.num_mels) {
    throw ConfigError("model.num_mels", "must equal features.num_mels (" + std::to_string(c.features.num_mels) + ")");
  }
  if (c.gst.num_mels != c.features.num_mels) {
    throw ConfigError("gst.num_mels", "must equal features.num_mels (" + std::to_string(c.features.num_mels) + ")");
  }
  if (c.schedule.steps != c.model.diffusion_steps) {
    throw ConfigError("schedule.steps", "must equal model.diffusion_steps (" +
                                            std::to_string(c.model.diffusion_steps) + ")");
  }
  if (c.schedule.steps < 1) throw ConfigError("schedule.steps", "must be positive");
  if (!(c.schedule.beta_min > 0.0 && c.schedule.beta_min <= c.schedule.beta_max && c.schedule.beta_max < 1.0)) {
    throw ConfigError("schedule.beta_max", "need 0 < beta_min <= beta_max < 1");
  }
  const double total = c.split.ratios.train + c.split.ratios.valid + c.split.ratios.test;
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("split", "ratios must sum to 1");
  if (!(c.eval.mask_rate > 0.0 && c.eval.mask_rate <= 1.0)) throw ConfigError("eval.mask_rate", "must be in (0, 1]");
  if (c.eval.vocoder_iterations < 0) throw ConfigError("eval.vocoder_iterations", "must be >= 0");
  try {
    (void)split_from_string(c.eval.split);
  } catch (const Error&) {
    throw ConfigError("eval.split", "expected train, valid or test");
  }
  if (c.synth.utterances == 0) throw ConfigError("synth.utterances", "must be positive");
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  nlohmann::json json;
  try {
    in >> json;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string(), std::string("invalid JSON: ") + e.what());
  }
  return run_config_from_json(json);
}

std::string config_hash(const RunConfig& c) {
  // Output locations and evaluation settings do not change the trained
  // artifacts, so neither invalidates a checkpoint.
  auto j = to_json(c);
  j.erase("paths");
  j.erase("eval");
  j["data"] = data_hash(c);
  return hash_of(j);
}

std::string data_hash(const RunConfig& c) {
  return hash_of({{"features", to_json(c.features)},
                  {"synth", synth_json(c)},
                  {"split", split_json(c)},
                  {"corpus_dir", c.paths.corpus_dir}});
}

std::string gst_hash(const RunConfig& c) {
  return hash_of({{"data", data_hash(c)}, {"gst", to_json(c.gst)}, {"gst_train", to_json(c.gst_train)}});
}

std::string protocol_hash(const RunConfig& c) {
  return hash_of({{"data", data_hash(c)}, {"schedule", schedule_json(c.schedule)}, {"eval", eval_json(c.eval)}});
}

NoiseSchedule make_schedule(const ScheduleConfig& config) {
  return make_schedule(config.steps, ScheduleKind::Linear, config.beta_min, config.beta_max);
}

}  // namespace seamless
