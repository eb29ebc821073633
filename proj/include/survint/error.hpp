#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace survint {

// All library failures carry a stable machine-readable code ("singular-system",
// "infeasible-moments", ...) next to the human-readable message.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(code + ": " + message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

// Problems with user-supplied configuration or input files. CLI exit code 1.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Numerical or runtime failures during an otherwise valid run. CLI exit code 2.
class NumericError : public Error {
public:
    using Error::Error;
};

}  // namespace survint
