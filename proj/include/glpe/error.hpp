#pragma once

#include <stdexcept>
#include <string>

namespace glpe {

// Shape / rank / width mismatches.
struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// NaN or Inf detected at an operation boundary.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// API misuse: stepping a finished episode, missing grad, inactive tape.
struct StateError : std::logic_error {
    using std::logic_error::logic_error;
};

// Config / manifest / CSV problems.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace glpe
