#include "trapmetric/log.hpp"

#include <cstdio>
#include <cstdlib>
#include <mutex>
#include <string>

namespace trapmetric {

namespace {

LogLevel parse_level() {
    const char* env = std::getenv("TRAPMETRIC_LOG");
    if (!env) return LogLevel::warn;
    const std::string s(env);
    if (s == "error") return LogLevel::error;
    if (s == "warn") return LogLevel::warn;
    if (s == "info") return LogLevel::info;
    if (s == "debug") return LogLevel::debug;
    return LogLevel::warn;
}

const char* level_name(LogLevel l) {
    switch (l) {
        case LogLevel::error: return "error";
        case LogLevel::warn: return "warn";
        case LogLevel::info: return "info";
        case LogLevel::debug: return "debug";
    }
    return "?";
}

std::mutex g_log_mutex;

}  // namespace

LogLevel log_level() {
    static const LogLevel level = parse_level();
    return level;
}

void log(LogLevel level, std::string_view msg) {
    if (static_cast<int>(level) > static_cast<int>(log_level())) return;
    std::lock_guard<std::mutex> lock(g_log_mutex);
    std::fprintf(stderr, "trapmetric %s: %.*s\n", level_name(level),
                 static_cast<int>(msg.size()), msg.data());
}

}  // namespace trapmetric
