#pragma once

#include <stdexcept>
#include <string>

namespace vcmr {

// Base class for every error raised by the library. CLI maps ConfigError to
// exit code 2, everything else to 1.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct ShapeError : Error {
    explicit ShapeError(const std::string& msg) : Error("shape error: " + msg) {}
};

// A forward op produced NaN/Inf. Surfaced at the op that created it, never
// propagated further.
struct FiniteError : Error {
    explicit FiniteError(const std::string& msg) : Error("non-finite value: " + msg) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error("config error: " + msg) {}
};

struct IoError : Error {
    explicit IoError(const std::string& msg) : Error("io error: " + msg) {}
};

struct InvalidArgument : Error {
    explicit InvalidArgument(const std::string& msg) : Error("invalid argument: " + msg) {}
};

}  // namespace vcmr
