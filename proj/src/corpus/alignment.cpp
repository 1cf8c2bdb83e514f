#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <regex>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "seamless/corpus.hpp"
#include "seamless/error.hpp"

namespace seamless {
namespace {

constexpr double kTimeEps = 1e-6;
constexpr double kMaxFrameDiscrepancy = 2.0;

std::string normalise_phone(std::string label) {
  label.erase(0, label.find_first_not_of(" \t"));
  label.erase(label.find_last_not_of(" \t") + 1);
  return label.empty() ? std::string("sil") : label;
}

struct Tiers {
  std::vector<TimedLabel> phones;
  std::vector<TimedLabel> words;
};

std::string unquote(const std::string& value) {
  auto first = value.find('"');
  auto last = value.rfind('"');
  if (first == std::string::npos || last == first) return value;
  std::string out = value.substr(first + 1, last - first - 1);
  // Praat escapes quotes by doubling them.
  std::string::size_type pos = 0;
  while ((pos = out.find("\"\"", pos)) != std::string::npos) out.erase(pos, 1), ++pos;
  return out;
}

Tiers read_textgrid(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open alignment " + path.string());
  static const std::regex kv(R"(^\s*([A-Za-z]+)\s*=\s*(.*?)\s*$)");
  static const std::regex interval_header(R"(^\s*intervals\s*\[\d+\]\s*:?\s*$)");
  static const std::regex item_header(R"(^\s*item\s*\[\d+\]\s*:?\s*$)");

  Tiers tiers;
  std::string tier_name;
  bool interval_tier = false;
  TimedLabel current;
  int fields = 0;
  auto flush = [&] {
    if (fields == 3 && interval_tier) {
      if (tier_name == "phones") tiers.phones.push_back(current);
      if (tier_name == "words") tiers.words.push_back(current);
    }
    fields = 0;
  };

  std::string line;
  std::smatch m;
  bool saw_header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find("ooTextFile") != std::string::npos) saw_header = true;
    if (std::regex_match(line, item_header)) {
      flush();
      tier_name.clear();
      interval_tier = false;
      continue;
    }
    if (std::regex_match(line, interval_header)) {
      flush();
      continue;
    }
    if (!std::regex_match(line, m, kv)) continue;
    const std::string key = m[1];
    const std::string value = m[2];
    if (key == "class") interval_tier = unquote(value) == "IntervalTier";
    else if (key == "name") tier_name = unquote(value);
    else if (key == "xmin" && interval_tier && !tier_name.empty()) current.start_s = std::stod(value), fields = 1;
    else if (key == "xmax" && fields == 1) current.end_s = std::stod(value), fields = 2;
    else if (key == "text" && fields == 2) current.label = unquote(value), fields = 3;
  }
  flush();
  if (!saw_header) throw FormatError(path.string() + ": not a Praat TextGrid (long format)");
  return tiers;
}

Tiers read_json_alignment(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open alignment " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  Tiers tiers;
  if (!doc.contains("phones") || !doc["phones"].is_array()) {
    throw FormatError(path.string() + ": missing \"phones\" array");
  }
  for (const auto& p : doc["phones"]) {
    tiers.phones.push_back({p.at("symbol").get<std::string>(), p.at("start_s").get<double>(),
                            p.at("end_s").get<double>()});
  }
  if (doc.contains("words")) {
    for (const auto& w : doc["words"]) {
      tiers.words.push_back({w.at("text").get<std::string>(), w.at("start_s").get<double>(),
                             w.at("end_s").get<double>()});
    }
  }
  return tiers;
}

}  // namespace

Alignment intervals_to_durations(const std::vector<TimedLabel>& phones_in,
                                 const std::vector<TimedLabel>& words, int hop_length,
                                 int sample_rate, std::size_t num_frames) {
  if (phones_in.empty()) throw FormatError("alignment: empty phone tier");
  std::vector<TimedLabel> sorted = phones_in;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const TimedLabel& a, const TimedLabel& b) { return a.start_s < b.start_s; });

  std::vector<TimedLabel> phones;
  double cursor = 0.0;
  for (const auto& p : sorted) {
    if (p.end_s < p.start_s) throw FormatError("alignment: interval ends before it starts");
    if (p.start_s < cursor - kTimeEps) {
      std::ostringstream os;
      os << "alignment: overlapping intervals at " << p.start_s << " s (previous ends at " << cursor
         << " s)";
      throw FormatError(os.str());
    }
    if (p.start_s > cursor + kTimeEps) phones.push_back({"sil", cursor, p.start_s});
    phones.push_back({normalise_phone(p.label), p.start_s, p.end_s});
    cursor = p.end_s;
  }

  const double frames_per_second = static_cast<double>(sample_rate) / hop_length;
  std::vector<double> raw(phones.size());
  for (std::size_t i = 0; i < phones.size(); ++i) {
    raw[i] = (phones[i].end_s - phones[i].start_s) * frames_per_second;
  }
  const double total = std::accumulate(raw.begin(), raw.end(), 0.0);
  if (std::abs(total - static_cast<double>(num_frames)) > kMaxFrameDiscrepancy || total <= 0.0) {
    std::ostringstream os;
    os << "alignment: phones span " << total << " frames but the utterance has " << num_frames;
    throw FormatError(os.str());
  }

  // Largest-remainder apportionment of num_frames in proportion to raw spans.
  Alignment out;
  out.durations.resize(phones.size());
  std::vector<double> remainder(phones.size());
  long assigned = 0;
  for (std::size_t i = 0; i < phones.size(); ++i) {
    const double share = raw[i] * static_cast<double>(num_frames) / total;
    out.durations[i] = static_cast<int>(std::floor(share));
    remainder[i] = share - out.durations[i];
    assigned += out.durations[i];
  }
  std::vector<std::size_t> order(phones.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (long left = static_cast<long>(num_frames) - assigned, k = 0; left > 0; --left, ++k) {
    ++out.durations[order[static_cast<std::size_t>(k) % order.size()]];
  }

  for (const auto& p : phones) out.phonemes.push_back(p.label);

  for (const auto& w : words) {
    std::string text = w.label;
    if (text.empty() || text == "sil" || text == "sp") continue;
    WordSpan span{text, phones.size(), 0};
    for (std::size_t i = 0; i < phones.size(); ++i) {
      const double mid = 0.5 * (phones[i].start_s + phones[i].end_s);
      if (mid >= w.start_s - kTimeEps && mid <= w.end_s + kTimeEps) {
        span.first_phone = std::min(span.first_phone, i);
        span.end_phone = std::max(span.end_phone, i + 1);
      }
    }
    if (span.end_phone > span.first_phone) out.words.push_back(span);
  }
  return out;
}

Alignment parse_alignment(const std::filesystem::path& path, int hop_length, int sample_rate,
                          std::size_t num_frames) {
  if (!std::filesystem::exists(path)) throw IoError("alignment file not found: " + path.string());
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  const Tiers tiers = ext == ".json" ? read_json_alignment(path) : read_textgrid(path);
  return intervals_to_durations(tiers.phones, tiers.words, hop_length, sample_rate, num_frames);
}

}  // namespace seamless
