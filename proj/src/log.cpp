#include "rbl/log.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string>

#include "rbl/error.hpp"

namespace rbl::log {

namespace {

Level initial_level() {
  const char* env = std::getenv("RBL_LOG_LEVEL");
  if (env == nullptr) return Level::warn;
  try {
    return parse_level(env);
  } catch (const ConfigError&) {
    return Level::warn;
  }
}

std::atomic<Level>& threshold() {
  static std::atomic<Level> value{initial_level()};
  return value;
}

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

constexpr std::string_view kNames[] = {"error", "warn", "info", "debug"};

}  // namespace

void set_level(Level level) { threshold().store(level); }
Level level() { return threshold().load(); }

Level parse_level(std::string_view text) {
  for (int i = 0; i < 4; ++i) {
    if (text == kNames[i]) return static_cast<Level>(i);
  }
  throw ConfigError("unknown log level '" + std::string(text) + "'");
}

void write(Level lvl, std::string_view message) {
  if (static_cast<int>(lvl) > static_cast<int>(level())) return;
  std::lock_guard lock(sink_mutex());
  std::cerr << "[rbl " << kNames[static_cast<int>(lvl)] << "] " << message << '\n';
}

}  // namespace rbl::log
