#pragma once

#include <stdexcept>
#include <string>

namespace seamless {

// Root of every exception thrown by the library. The CLI maps the concrete
// subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller passed something that violates a documented precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Tensor/matrix dimensions disagree.
class ShapeError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

// File missing, unreadable, or unwritable.
class IoError : public Error {
 public:
  using Error::Error;
};

// File exists but its content is malformed or uses an unsupported encoding.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Phoneme, word, or speaker not known to a lookup table.
class VocabularyError : public InvalidArgument {
 public:
  VocabularyError(const std::string& what_table, const std::string& symbol)
      : InvalidArgument(what_table + ": unknown symbol '" + symbol + "'"), symbol_(symbol) {}
  const std::string& symbol() const noexcept { return symbol_; }

 private:
  std::string symbol_;
};

// Component used before it has been trained or loaded.
class UntrainedError : public Error {
 public:
  using Error::Error;
};

// Configuration file rejected; names the offending key.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& key, const std::string& message)
      : Error("config key '" + key + "': " + message), key_(key) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

// A phase was invoked before the artifact it depends on exists.
class PrerequisiteError : public Error {
 public:
  PrerequisiteError(const std::string& phase, const std::string& message)
      : Error(message + " (run '" + phase + "' first)"), phase_(phase) {}
  const std::string& phase() const noexcept { return phase_; }

 private:
  std::string phase_;
};

// Optimisation diverged (non-finite loss).
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace seamless
