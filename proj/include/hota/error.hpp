#pragma once

#include <stdexcept>
#include <string>

namespace hota {

// Error categories map one-to-one onto CLI exit codes (2, 3, 4).
enum class ErrorKind { Validation, Io, Computation };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& message)
        : Error(ErrorKind::Validation, message) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& message) : Error(ErrorKind::Io, message) {}
};

class ComputationError : public Error {
public:
    explicit ComputationError(const std::string& message)
        : Error(ErrorKind::Computation, message) {}
};

/// Rethrows `e` as the same error category with `prefix` prepended.
[[noreturn]] inline void rethrow_with_prefix(const Error& e, const std::string& prefix) {
    const std::string message = prefix + e.what();
    switch (e.kind()) {
        case ErrorKind::Validation: throw ValidationError(message);
        case ErrorKind::Io: throw IoError(message);
        case ErrorKind::Computation: throw ComputationError(message);
    }
    throw Error(e.kind(), message);
}

}  // namespace hota
