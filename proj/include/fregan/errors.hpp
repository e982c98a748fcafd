#pragma once

#include <stdexcept>
#include <string>

namespace fregan {

// Shape or hyperparameter records that cannot work together.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A file on disk does not follow the expected container layout.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NotFoundError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Raised when a loss term or parameter leaves the finite range.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace fregan
