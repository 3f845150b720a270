#pragma once

#include <stdexcept>
#include <string>

namespace ioda {

// Caller misuse: bad arguments, mismatched shapes, invalid configuration.
// The CLI maps this to exit code 2.
class UsageError : public std::runtime_error {
public:
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed or inconsistent input data (files, streams). Exit code 3.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failure at runtime, e.g. a non-finite training loss. Exit code 4.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace ioda
