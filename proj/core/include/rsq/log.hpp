#pragma once

#include <sstream>
#include <string>

namespace rsq {

enum class LogLevel : int { error = 0, info = 1, debug = 2 };

void set_log_level(LogLevel level);
LogLevel log_level();

namespace detail {
void log_line(LogLevel level, const std::string& msg);
}

template <typename... Args>
void log_error(const Args&... args) {
  std::ostringstream os;
  (os << ... << args);
  detail::log_line(LogLevel::error, os.str());
}

template <typename... Args>
void log_info(const Args&... args) {
  if (log_level() < LogLevel::info) return;
  std::ostringstream os;
  (os << ... << args);
  detail::log_line(LogLevel::info, os.str());
}

template <typename... Args>
void log_debug(const Args&... args) {
  if (log_level() < LogLevel::debug) return;
  std::ostringstream os;
  (os << ... << args);
  detail::log_line(LogLevel::debug, os.str());
}

}  // namespace rsq
