#pragma once

#include <stdexcept>
#include <string>

namespace homeauth {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A caller passed an argument outside the operation's domain.
class ArgumentError : public Error {
public:
    using Error::Error;
};

/// Input data (file contents, wire lines) failed to parse or validate.
class DataError : public Error {
public:
    using Error::Error;
};

/// A document parsed but does not match the expected schema.
class SchemaError : public DataError {
public:
    using DataError::DataError;
};

/// Model fitting failed numerically.
class TrainingError : public Error {
public:
    using Error::Error;
};

/// An internal invariant was broken.
class InternalError : public Error {
public:
    using Error::Error;
};

}  // namespace homeauth
