#include "msbayes/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace msbayes {

namespace {
std::atomic<LogLevel> g_level{LogLevel::Warning};
std::mutex g_mutex;

void emit(std::string_view tag, std::string_view message) {
  std::lock_guard lock(g_mutex);
  std::cerr << "msbayes: " << tag << message << '\n';
}
}  // namespace

void set_log_level(LogLevel level) { g_level = level; }
LogLevel log_level() { return g_level; }

void log_warning(std::string_view message) {
  if (g_level.load() >= LogLevel::Warning) emit("warning: ", message);
}

void log_info(std::string_view message) {
  if (g_level.load() >= LogLevel::Info) emit("", message);
}

}  // namespace msbayes
