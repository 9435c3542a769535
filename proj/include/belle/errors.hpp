#pragma once

#include <stdexcept>
#include <string>

namespace belle {

// Error taxonomy shared by the whole library. The CLI maps these to exit
// codes: ShapeError/ValueError -> 2 (data), NumericError -> 3.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Tensor/sequence dimensions do not conform.
struct ShapeError : Error {
    using Error::Error;
};

// Invalid argument values, malformed files, out-of-range ids.
struct ValueError : Error {
    using Error::Error;
};

// Non-finite results, failed numerical checks, constraint violations.
struct NumericError : Error {
    using Error::Error;
};

// File format / serialization problems.
struct IoError : Error {
    using Error::Error;
};

}  // namespace belle
