#pragma once

#include <cstdlib>
#include <iostream>
#include <string>

namespace qsb {

enum class LogLevel { error = 0, info = 1, debug = 2 };

// Verbosity is controlled by the QSB_LOG environment variable
// (one of "error", "info", "debug"); unset or unrecognized means "error".
inline LogLevel log_level() {
    static const LogLevel level = [] {
        const char* env = std::getenv("QSB_LOG");
        if (env == nullptr) return LogLevel::error;
        const std::string s(env);
        if (s == "debug") return LogLevel::debug;
        if (s == "info") return LogLevel::info;
        return LogLevel::error;
    }();
    return level;
}

inline void log_message(LogLevel lvl, const std::string& msg) {
    if (static_cast<int>(lvl) > static_cast<int>(log_level())) return;
    const char* tag = lvl == LogLevel::error ? "error" : (lvl == LogLevel::info ? "info" : "debug");
    std::cerr << "[qsb][" << tag << "] " << msg << '\n';
}

inline void log_error(const std::string& msg) { log_message(LogLevel::error, msg); }
inline void log_info(const std::string& msg) { log_message(LogLevel::info, msg); }
inline void log_debug(const std::string& msg) { log_message(LogLevel::debug, msg); }

}  // namespace qsb
