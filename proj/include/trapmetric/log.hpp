#pragma once

#include <string_view>

namespace trapmetric {

enum class LogLevel { error = 0, warn = 1, info = 2, debug = 3 };

/// Level parsed once from TRAPMETRIC_LOG (error|warn|info|debug); default warn.
LogLevel log_level();

void log(LogLevel level, std::string_view msg);

inline void log_error(std::string_view msg) { log(LogLevel::error, msg); }
inline void log_warn(std::string_view msg) { log(LogLevel::warn, msg); }
inline void log_info(std::string_view msg) { log(LogLevel::info, msg); }
inline void log_debug(std::string_view msg) { log(LogLevel::debug, msg); }

}  // namespace trapmetric
