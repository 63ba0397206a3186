#pragma once

#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace dbot {

enum class LogLevel { error = 0, warn = 1, info = 2, debug = 3 };

/// Level from DBOT_LOG (error|warn|info|debug); defaults to warn.
inline LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("DBOT_LOG");
    if (!env) return LogLevel::warn;
    if (std::strcmp(env, "error") == 0) return LogLevel::error;
    if (std::strcmp(env, "info") == 0) return LogLevel::info;
    if (std::strcmp(env, "debug") == 0) return LogLevel::debug;
    return LogLevel::warn;
  }();
  return level;
}

/// Diagnostics go to standard error only; results stay on stdout/files.
inline void logf(LogLevel level, const char* fmt, ...) {
  if (level > log_level()) return;
  static const char* names[] = {"error", "warn", "info", "debug"};
  std::fprintf(stderr, "[dbot:%s] ", names[static_cast<int>(level)]);
  va_list args;
  va_start(args, fmt);
  std::vfprintf(stderr, fmt, args);
  va_end(args);
  std::fputc('\n', stderr);
}

}  // namespace dbot
