#pragma once

#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "seamless/error.hpp"

namespace seamless {

// Strict reader over a JSON object: every key must be consumed, and type
// mismatches or leftovers raise ConfigError naming the dotted key path.
class JsonReader {
 public:
  JsonReader(const nlohmann::json& object, std::string prefix = {})
      : object_(object), prefix_(std::move(prefix)) {
    if (!object_.is_object()) throw ConfigError(prefix_.empty() ? "<root>" : prefix_, "expected an object");
  }

  bool has(const std::string& key) const { return object_.contains(key); }

  template <typename T>
  void read(const std::string& key, T& out) {
    if (!object_.contains(key)) return;
    seen_.insert(key);
    try {
      out = object_.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(path(key), std::string("wrong type: ") + e.what());
    }
  }

  template <typename T>
  T require(const std::string& key) {
    if (!object_.contains(key)) throw ConfigError(path(key), "missing required key");
    T out{};
    read(key, out);
    return out;
  }

  JsonReader child(const std::string& key) {
    seen_.insert(key);
    return JsonReader(object_.at(key), path(key));
  }

  // Throws ConfigError for the first key that was never read.
  void finish() const {
    for (const auto& [key, value] : object_.items()) {
      if (!seen_.count(key)) throw ConfigError(path(key), "unknown key");
    }
  }

  std::string path(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }

 private:
  const nlohmann::json& object_;
  std::string prefix_;
  std::set<std::string> seen_;
};

}  // namespace seamless
