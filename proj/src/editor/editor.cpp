#include "seamless/editor.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "seamless/error.hpp"

namespace seamless {

namespace {

std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::vector<std::string> split_words(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> words;
  for (std::string w; in >> w;) words.push_back(w);
  return words;
}

const char* kind_name(EditKind kind) {
  switch (kind) {
    case EditKind::Insert: return "insert";
    case EditKind::Replace: return "replace";
    case EditKind::Delete: return "delete";
  }
  return "?";
}

EditKind kind_from_name(const std::string& name) {
  if (name == "insert") return EditKind::Insert;
  if (name == "replace") return EditKind::Replace;
  if (name == "delete") return EditKind::Delete;
  throw ConfigError("ops.kind", "unknown edit kind '" + name + "'");
}

// Phone index the operation anchors at in the original utterance.
std::size_t anchor_phone(const EditOp& op, const AlignedUtterance& original) {
  const auto& words = original.words;
  if (op.kind == EditKind::Insert) {
    return op.at < words.size() ? words[op.at].first_phone : words.back().end_phone;
  }
  return words[op.span_first].first_phone;
}

}  // namespace

Lexicon::Lexicon(const std::vector<std::pair<std::string, std::vector<std::string>>>& entries) {
  for (const auto& [word, phones] : entries) {
    if (phones.empty()) throw InvalidArgument("lexicon: word '" + word + "' has no phonemes");
    entries_[lowercase(word)] = phones;
  }
}

Lexicon Lexicon::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read lexicon " + path.string());
  std::vector<std::pair<std::string, std::vector<std::string>>> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    auto tokens = split_words(line);
    if (tokens.empty()) continue;
    if (tokens.size() < 2) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": word without phonemes");
    }
    entries.emplace_back(tokens[0], std::vector<std::string>(tokens.begin() + 1, tokens.end()));
  }
  return Lexicon(entries);
}

const std::vector<std::string>& Lexicon::pronounce(const std::string& word) const {
  const auto it = entries_.find(lowercase(word));
  if (it == entries_.end()) throw VocabularyError("lexicon", word);
  return it->second;
}

bool Lexicon::contains(const std::string& word) const { return entries_.count(lowercase(word)) != 0; }

std::vector<std::string> Lexicon::phoneme_symbols() const {
  std::vector<std::string> out;
  for (const auto& [word, phones] : entries_) out.insert(out.end(), phones.begin(), phones.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

EditScript edit_script_from_json(const nlohmann::json& json) {
  JsonReader root(json);
  EditScript script;
  const auto ops = root.require<nlohmann::json>("ops");
  root.finish();
  if (!ops.is_array()) throw ConfigError("ops", "expected an array");
  for (std::size_t i = 0; i < ops.size(); ++i) {
    JsonReader r(ops[i], "ops[" + std::to_string(i) + "]");
    EditOp op;
    op.kind = kind_from_name(r.require<std::string>("kind"));
    if (op.kind == EditKind::Insert) {
      op.at = r.require<std::size_t>("at");
    } else {
      const auto span = r.require<std::vector<std::size_t>>("span");
      if (span.size() != 2) throw ConfigError(r.path("span"), "expected [first, end)");
      op.span_first = span[0];
      op.span_end = span[1];
    }
    if (op.kind != EditKind::Delete) op.text = r.require<std::string>("text");
    // Tolerate fields that do not apply to the kind.
    std::size_t unused_at = 0;
    std::vector<std::size_t> unused_span;
    std::string unused_text;
    r.read("at", unused_at);
    r.read("span", unused_span);
    r.read("text", unused_text);
    r.finish();
    script.ops.push_back(op);
  }
  return script;
}

EditScript load_edit_script(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read edit script " + path.string());
  nlohmann::json json;
  try {
    in >> json;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return edit_script_from_json(json);
}

nlohmann::json to_json(const EditScript& script) {
  auto ops = nlohmann::json::array();
  for (const auto& op : script.ops) {
    nlohmann::json j{{"kind", kind_name(op.kind)}};
    if (op.kind == EditKind::Insert) {
      j["at"] = op.at;
    } else {
      j["span"] = {op.span_first, op.span_end};
    }
    if (op.kind != EditKind::Delete) j["text"] = op.text;
    ops.push_back(j);
  }
  return {{"ops", ops}};
}

void validate_edit_script(const EditScript& script, std::size_t word_count) {
  // Each op occupies a word interval; inserts are zero-width at `at`.
  struct Interval {
    std::size_t first, end;
    std::size_t index;
  };
  std::vector<Interval> intervals;
  for (std::size_t i = 0; i < script.ops.size(); ++i) {
    const auto& op = script.ops[i];
    const std::string who = "edit op " + std::to_string(i) + " (" + kind_name(op.kind) + ")";
    if (op.kind == EditKind::Insert) {
      if (op.at > word_count) {
        throw InvalidArgument(who + ": position " + std::to_string(op.at) + " beyond " +
                              std::to_string(word_count) + " words");
      }
      intervals.push_back({op.at, op.at, i});
    } else {
      if (op.span_first >= op.span_end || op.span_end > word_count) {
        throw InvalidArgument(who + ": span [" + std::to_string(op.span_first) + ", " +
                              std::to_string(op.span_end) + ") outside " + std::to_string(word_count) +
                              " words");
      }
      intervals.push_back({op.span_first, op.span_end, i});
    }
    if (op.kind != EditKind::Delete && split_words(op.text).empty()) {
      throw InvalidArgument(who + ": empty text");
    }
  }
  for (std::size_t a = 0; a < intervals.size(); ++a) {
    for (std::size_t b = a + 1; b < intervals.size(); ++b) {
      const auto& x = intervals[a];
      const auto& y = intervals[b];
      const bool x_point = x.first == x.end;
      const bool y_point = y.first == y.end;
      bool overlap;
      if (x_point && y_point) {
        overlap = x.first == y.first;
      } else if (x_point) {
        overlap = y.first < x.first && x.first < y.end;
      } else if (y_point) {
        overlap = x.first < y.first && y.first < x.end;
      } else {
        overlap = x.first < y.end && y.first < x.end;
      }
      if (overlap) {
        throw InvalidArgument("edit ops " + std::to_string(x.index) + " and " + std::to_string(y.index) +
                              " overlap");
      }
    }
  }
}

DurationProvider model_duration_provider(EditorModel model) {
  return [model](const std::vector<std::string>& phonemes, int speaker_index) mutable {
    return predict_durations(model, phonemes, speaker_index);
  };
}

DurationProvider mean_duration_provider(const ModelStats& stats) {
  return [stats](const std::vector<std::string>& phonemes, int) {
    std::vector<int> out;
    out.reserve(phonemes.size());
    for (const auto& p : phonemes) {
      const auto it = stats.mean_duration.find(p);
      const double mean = it != stats.mean_duration.end() ? it->second : stats.global_mean_duration;
      out.push_back(std::max(1, static_cast<int>(std::lround(mean))));
    }
    return out;
  };
}

EditPlan resolve_edit(const AlignedUtterance& original, const EditScript& script, const Lexicon& lexicon,
                      const DurationProvider& durations) {
  original.validate();
  validate_edit_script(script, original.words.size());
  if (!script.ops.empty() && original.words.empty()) {
    throw InvalidArgument("utterance '" + original.utterance.id + "' has no word alignment");
  }

  std::vector<std::size_t> order(script.ops.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  auto position = [&](const EditOp& op) { return op.kind == EditKind::Insert ? op.at : op.span_first; };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = script.ops[a];
    const auto& y = script.ops[b];
    if (position(x) != position(y)) return position(x) < position(y);
    // An insert before a span that starts at the same word goes first.
    return x.kind == EditKind::Insert && y.kind != EditKind::Insert;
  });

  const auto offsets = original.phone_offsets();
  const std::size_t num_mels = original.mel.num_mels();

  EditPlan plan;
  auto& edited = plan.edited;
  edited.utterance = original.utterance;
  edited.speaker_index = original.speaker_index;

  std::vector<std::optional<std::size_t>> phone_map(original.phonemes.size());
  std::vector<float> mel_values;
  std::vector<bool> new_phone;

  auto emit_original = [&](std::size_t first, std::size_t end) {
    for (std::size_t p = first; p < end; ++p) {
      phone_map[p] = edited.phonemes.size();
      edited.phonemes.push_back(original.phonemes[p]);
      edited.durations.push_back(original.durations[p]);
      new_phone.push_back(false);
      for (std::size_t f = offsets[p]; f < offsets[p + 1]; ++f) {
        plan.source_frame.emplace_back(f);
        const auto frame = original.mel.frame(f);
        mel_values.insert(mel_values.end(), frame.begin(), frame.end());
        edited.pitch.push_back(original.pitch[f]);
      }
    }
  };

  std::vector<WordSpan> new_words;
  auto emit_new = [&](const std::string& text) {
    std::vector<std::string> phones;
    std::vector<std::pair<std::string, std::size_t>> word_lengths;
    for (const auto& word : split_words(text)) {
      const auto& pron = lexicon.pronounce(word);
      phones.insert(phones.end(), pron.begin(), pron.end());
      word_lengths.emplace_back(word, pron.size());
    }
    const auto frames = durations(phones, original.speaker_index);
    if (frames.size() != phones.size()) throw ShapeError("duration provider returned the wrong length");
    std::size_t cursor = edited.phonemes.size();
    for (const auto& [word, length] : word_lengths) {
      new_words.push_back({word, cursor, cursor + length});
      cursor += length;
    }
    for (std::size_t i = 0; i < phones.size(); ++i) {
      if (frames[i] < 1) throw InvalidArgument("duration provider returned a non-positive duration");
      edited.phonemes.push_back(phones[i]);
      edited.durations.push_back(frames[i]);
      new_phone.push_back(true);
      for (int f = 0; f < frames[i]; ++f) {
        plan.source_frame.emplace_back(std::nullopt);
        mel_values.insert(mel_values.end(), num_mels, 0.0f);
        edited.pitch.push_back(0.0f);
      }
    }
  };

  std::size_t cursor = 0;
  for (const auto i : order) {
    const auto& op = script.ops[i];
    const std::size_t anchor = anchor_phone(op, original);
    emit_original(cursor, anchor);
    cursor = std::max(cursor, anchor);
    if (op.kind != EditKind::Delete) emit_new(op.text);
    if (op.kind != EditKind::Insert) cursor = original.words[op.span_end - 1].end_phone;
  }
  emit_original(cursor, original.phonemes.size());

  const std::size_t frames = plan.source_frame.size();
  if (frames == 0) throw InvalidArgument("edit removes every frame of '" + original.utterance.id + "'");
  edited.mel = MelSpectrogram(frames, num_mels, std::move(mel_values), original.mel.hop_length(),
                              original.mel.win_length());

  for (const auto& w : original.words) {
    if (phone_map[w.first_phone] && phone_map[w.end_phone - 1]) {
      edited.words.push_back({w.text, *phone_map[w.first_phone], *phone_map[w.end_phone - 1] + 1});
    }
  }
  edited.words.insert(edited.words.end(), new_words.begin(), new_words.end());
  std::sort(edited.words.begin(), edited.words.end(),
            [](const WordSpan& a, const WordSpan& b) { return a.first_phone < b.first_phone; });
  std::string text;
  for (const auto& w : edited.words) text += (text.empty() ? "" : " ") + w.text;
  edited.utterance.text = text;

  plan.regions = regions_from_phone_flags(edited.durations, new_phone, 0.0);
  plan.regions.mask_rate = static_cast<double>(plan.regions.masked_frames()) / static_cast<double>(frames);
  edited.validate();
  plan.regions.validate(frames);
  return plan;
}

EditResult edit_utterance(EditorModel& model, const AlignedUtterance& original, const EditScript& script,
                          const Lexicon& lexicon, const NoiseSchedule& schedule, Rng& rng) {
  EditResult result;
  result.plan = resolve_edit(original, script, lexicon, model_duration_provider(model));
  if (result.plan.regions.regions.empty()) {
    result.mel = result.plan.edited.mel;
    result.pitch = result.plan.edited.pitch;
    return result;
  }
  ReconstructOptions options;
  options.predicted_pitch = true;
  auto rec = reconstruct(model, result.plan.edited, result.plan.regions, schedule, rng, options);
  result.mel = std::move(rec.mel);
  result.pitch = std::move(rec.pitch);
  return result;
}

}  // namespace seamless
