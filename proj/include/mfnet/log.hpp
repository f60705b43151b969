#pragma once

#include <cstdlib>
#include <iostream>
#include <string_view>

namespace mfnet::log {

enum class Level { Error = 0, Warn = 1, Info = 2, Debug = 3 };

/// From MEANFIELD_PH_LOG (error|warn|info|debug); warn when unset or unknown.
inline Level threshold()
{
    static const Level level = [] {
        const char* env = std::getenv("MEANFIELD_PH_LOG");
        const std::string_view s = env ? env : "";
        if (s == "error") return Level::Error;
        if (s == "info") return Level::Info;
        if (s == "debug") return Level::Debug;
        return Level::Warn;
    }();
    return level;
}

inline bool enabled(Level l) { return l <= threshold(); }

inline void write(Level l, std::string_view msg)
{
    if (!enabled(l)) return;
    static constexpr std::string_view tags[] = {"error", "warn", "info", "debug"};
    std::cerr << "[" << tags[static_cast<int>(l)] << "] " << msg << '\n';
}

inline void error(std::string_view m) { write(Level::Error, m); }
inline void warn(std::string_view m) { write(Level::Warn, m); }
inline void info(std::string_view m) { write(Level::Info, m); }
inline void debug(std::string_view m) { write(Level::Debug, m); }

} // namespace mfnet::log
