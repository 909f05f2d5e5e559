#pragma once

#include <stdexcept>
#include <string>

namespace decum {

// Mirrors decum_status in decum.h; the C layer maps one onto the other.
enum class ErrorCode : int {
    InvalidArgument = 1,
    Io = 2,
    Parse = 3,
    Numeric = 4,
    Range = 5,
    Mismatch = 6,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool ok, const std::string& what, ErrorCode code = ErrorCode::InvalidArgument) {
    if (!ok) fail(code, what);
}

}  // namespace decum
