#pragma once

#include <stdexcept>
#include <string>

namespace bellhalo {

/// Invalid configuration or argument values. CLI exit code 2.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// File system or format problems. CLI exit code 3.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Failed fits, degenerate data, undefined estimates. CLI exit code 4.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace bellhalo
