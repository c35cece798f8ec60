#pragma once

#include <stdexcept>
#include <string>

namespace synth {

// Error taxonomy shared across the library. The CLI maps ConfigError and
// ValidationError (and subclasses) to exit code 2, everything else to 3.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ValidationError : Error {
    using Error::Error;
};

struct ShapeError : ValidationError {
    using ValidationError::ValidationError;
};

struct ParseError : ValidationError {
    using ValidationError::ValidationError;
};

struct SchemaError : ValidationError {
    using ValidationError::ValidationError;
};

struct ConfigError : ValidationError {
    using ValidationError::ValidationError;
};

struct StateError : Error {
    using Error::Error;
};

struct NumericError : Error {
    using Error::Error;
};

struct FormatError : Error {
    using Error::Error;
};

struct CapabilityError : Error {
    using Error::Error;
};

struct GenerationError : Error {
    using Error::Error;
};

}  // namespace synth
