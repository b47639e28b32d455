#ifndef GAFCNN_ERRORS_HPP
#define GAFCNN_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace gafcnn {

// Base class for all library errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input CSV: bad field count, non-finite value, bad label.
struct CsvError : Error {
    using Error::Error;
};

// Invalid argument to an operation (out-of-range sizes, bad fractions).
struct ArgError : Error {
    using Error::Error;
};

// Tensor/layer shape mismatch. Message names both shapes.
struct ShapeError : Error {
    using Error::Error;
};

// Invalid model or run configuration.
struct ConfigError : Error {
    using Error::Error;
};

// Filesystem failure (open/read/write).
struct IoError : Error {
    using Error::Error;
};

// Corrupt or unrecognized binary file (bad magic, truncated payload).
struct FormatError : Error {
    using Error::Error;
};

// Training-state failures: missing gradients, divergence.
struct TrainError : Error {
    using Error::Error;
};

}  // namespace gafcnn

#endif
