#pragma once

#include <stdexcept>
#include <string>

namespace strpm {

/// All pipeline errors carry a stable machine-parsable code ("BadMagic",
/// "ShapeMismatch", ...) next to the human-readable message. The CLI prints
/// them as "error[Code]: message" and exits nonzero.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error("[" + code + "]: " + message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

[[noreturn]] inline void fail(const std::string& code, const std::string& message) {
    throw Error(code, message);
}

inline void require(bool ok, const std::string& code, const std::string& message) {
    if (!ok) fail(code, message);
}

}  // namespace strpm
