#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fnpar {

enum class ErrorKind {
    InvalidArgument,
    StepRejected,
    InvalidState,
    FixedPointDiverged,
    DegenerateRatio,
    DegenerateProfile,
    Coverage,
    CertificateContradiction,
    Unsupported,
    Parse,
    Io,
};

std::string_view to_string(ErrorKind kind);

/// Exception carrying a machine-readable kind next to the message.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

inline void require(bool condition, ErrorKind kind, const std::string& message) {
    if (!condition) throw Error(kind, message);
}

}  // namespace fnpar
