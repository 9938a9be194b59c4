#include "rsq/log.hpp"

#include <iostream>

namespace rsq {

namespace {
LogLevel g_level = LogLevel::info;
}

void set_log_level(LogLevel level) { g_level = level; }

LogLevel log_level() { return g_level; }

namespace detail {

void log_line(LogLevel level, const std::string& msg) {
  const char* tag = level == LogLevel::error ? "error" : level == LogLevel::info ? "info" : "debug";
  std::cerr << "[" << tag << "] " << msg << "\n";
}

}  // namespace detail
}  // namespace rsq
