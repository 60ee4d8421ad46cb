#pragma once

#include <stdexcept>
#include <string>

namespace tfint {

/// Base error. `code()` is a short machine-parsable identifier.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& what)
        : std::runtime_error(what), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

/// Bad arguments, configurations or preconditions (CLI exit code 2).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Malformed or inconsistent input data (CLI exit code 3).
class DataError : public Error {
public:
    using Error::Error;
};

}  // namespace tfint
