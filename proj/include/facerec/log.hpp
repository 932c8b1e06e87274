#pragma once

#include <string_view>

namespace facerec {

enum class LogLevel { debug, info, warn, error, off };

/// Library diagnostics go to standard error through one shared logger.
void set_log_level(LogLevel level);

void log_debug(std::string_view message);
void log_info(std::string_view message);
void log_warn(std::string_view message);
void log_error(std::string_view message);

}  // namespace facerec
