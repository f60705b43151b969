#pragma once

#include <charconv>
#include <span>
#include <string>

namespace mfnet {

/// Shortest round-trip decimal form; identical bytes on every run.
inline std::string format_double(double v)
{
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

/// "2-0-1"
inline std::string dash_join(std::span<const int> x)
{
    std::string s;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (i) s += '-';
        s += std::to_string(x[i]);
    }
    return s;
}

} // namespace mfnet
