#pragma once

#include <iostream>
#include <sstream>
#include <string_view>

namespace seamless::log {

enum class Level { Debug = 0, Info = 1, Warn = 2, Error = 3, Off = 4 };

Level threshold();
void set_threshold(Level level);

// Writes "[level] message" to stderr when level >= threshold().
template <typename... Args>
void write(Level level, const Args&... args) {
  if (level < threshold()) return;
  static constexpr std::string_view kNames[] = {"debug", "info", "warn", "error"};
  std::ostringstream os;
  os << '[' << kNames[static_cast<int>(level)] << "] ";
  (os << ... << args);
  os << '\n';
  std::cerr << os.str();
}

template <typename... Args> void debug(const Args&... a) { write(Level::Debug, a...); }
template <typename... Args> void info(const Args&... a) { write(Level::Info, a...); }
template <typename... Args> void warn(const Args&... a) { write(Level::Warn, a...); }
template <typename... Args> void error(const Args&... a) { write(Level::Error, a...); }

}  // namespace seamless::log
