#pragma once

#include <stdexcept>
#include <string>

namespace reticulum {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the domain of a special function or metric.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Shape or topology mismatch: wrong dimension, unknown node, invalid tree.
class StructuralError : public Error {
public:
    using Error::Error;
};

/// Invalid training configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Failure while reading external data (CSV rows, model files).
class IngestionError : public Error {
public:
    using Error::Error;
};

/// Non-finite values produced during optimization.
class NumericError : public Error {
public:
    using Error::Error;
};

/// A test oracle refused an instance that is too large to enumerate.
class RefusalError : public Error {
public:
    using Error::Error;
};

}  // namespace reticulum
