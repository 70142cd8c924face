#pragma once

#include <stdexcept>
#include <string>

namespace lungcam {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A file could not be opened, read, written or renamed.
class IoError : public Error {
public:
    using Error::Error;
};

/// A file exists but its contents are malformed or inconsistent.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration or command-line values.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A precondition on an argument was violated.
class ArgumentError : public Error {
public:
    using Error::Error;
};

/// Tensor or image shapes are incompatible.
class ShapeError : public Error {
public:
    using Error::Error;
};

}  // namespace lungcam
