#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace jobrec {

/// Malformed or inconsistent input data (CLI exit code 1).
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration value or unknown key (CLI exit code 2).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An internal invariant was violated (CLI exit code 3).
class InvariantError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A recoverable per-line parse failure. Line numbers are 1-based.
struct LineError {
    std::size_t line = 0;
    std::string message;
};

/// Records parsed from a line-oriented stream plus the lines that failed.
template <class T>
struct Parsed {
    std::vector<T> records;
    std::vector<LineError> errors;

    bool ok() const { return errors.empty(); }
};

}  // namespace jobrec
