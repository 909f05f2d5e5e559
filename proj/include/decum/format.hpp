#pragma once

#include <charconv>
#include <string>

namespace decum {

/// Shortest text that parses back to exactly `v`.
inline std::string shortest(double v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

}  // namespace decum
