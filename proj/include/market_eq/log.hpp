#pragma once

// Minimal stderr logger. Verbosity comes from MARKET_EQ_LOG={error,info,debug};
// the default is error.

#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string_view>

namespace market_eq::log {

enum class Level { error = 0, info = 1, debug = 2 };

inline Level level_from_env() {
  const char* raw = std::getenv("MARKET_EQ_LOG");
  if (raw == nullptr) return Level::error;
  const std::string_view v(raw);
  if (v == "debug") return Level::debug;
  if (v == "info") return Level::info;
  return Level::error;
}

inline Level& current_level() {
  static Level level = level_from_env();
  return level;
}

inline bool enabled(Level l) { return static_cast<int>(l) <= static_cast<int>(current_level()); }

template <class... Args>
void write(Level l, const Args&... args) {
  if (!enabled(l)) return;
  std::ostringstream os;
  static constexpr const char* kTag[] = {"[error] ", "[info] ", "[debug] "};
  os << kTag[static_cast<int>(l)];
  (os << ... << args);
  os << '\n';
  std::cerr << os.str();
}

template <class... Args>
void error(const Args&... args) { write(Level::error, args...); }
template <class... Args>
void info(const Args&... args) { write(Level::info, args...); }
template <class... Args>
void debug(const Args&... args) { write(Level::debug, args...); }

}  // namespace market_eq::log
