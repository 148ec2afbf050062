#pragma once

#include <string_view>

namespace msbayes {

enum class LogLevel { Quiet, Warning, Info };

void set_log_level(LogLevel level);
LogLevel log_level();

/// Writes to stderr; thread-safe.
void log_warning(std::string_view message);
void log_info(std::string_view message);

}  // namespace msbayes
