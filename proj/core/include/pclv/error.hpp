#pragma once

#include <stdexcept>
#include <string>

namespace pclv {

/// Base error for anything that goes wrong at runtime (bad data, I/O, math).
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Misconfiguration: bad config file, invalid parameter value, usage mistake.
/// The CLI maps these to exit code 2; everything else maps to 1.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

}  // namespace pclv
