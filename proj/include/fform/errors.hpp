#pragma once

#include <stdexcept>
#include <string>

namespace fform {

/// Bad argument or precondition violation at an API boundary.
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Well-formed input that breaks a domain invariant (e.g. a missing keypoint).
class ValidationError : public InputError {
public:
    using InputError::InputError;
};

/// Malformed line in a JSONL stream. Line numbers are 1-based.
class ParseError : public InputError {
public:
    ParseError(std::size_t line, const std::string& what)
        : InputError("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Feature catalog or file format version does not match the running code.
class VersionMismatch : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Model file that cannot be read back (truncated, not JSON, missing keys).
class CorruptFile : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConvergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class PlacementError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace fform
