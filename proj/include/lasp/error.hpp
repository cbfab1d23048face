#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lasp {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionError : Error {
    DimensionError(const std::string& what_dim, std::size_t expected_dim, std::size_t actual_dim)
        : Error(what_dim + ": expected " + std::to_string(expected_dim) + ", got " +
                std::to_string(actual_dim)),
          expected(expected_dim),
          actual(actual_dim) {}

    std::size_t expected;
    std::size_t actual;
};

struct ConfigError : Error {
    using Error::Error;
};

struct FormatError : Error {
    using Error::Error;
};

struct NumericError : Error {
    using Error::Error;
};

inline void require(bool condition, const std::string& message) {
    if (!condition) {
        throw Error(message);
    }
}

inline void require_dim(const char* what, std::size_t expected, std::size_t actual) {
    if (expected != actual) {
        throw DimensionError(what, expected, actual);
    }
}

}  // namespace lasp
