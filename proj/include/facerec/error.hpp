#pragma once

#include <stdexcept>
#include <string>

namespace facerec {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Zero or inconsistent raster dimensions.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// A rectangle or coordinate falls outside the raster it is queried against.
class BoundsError : public Error {
public:
    using Error::Error;
};

/// An argument violates an operation's precondition.
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Malformed serialized input (cascade XML, model files, images, config).
class ParseError : public Error {
public:
    using Error::Error;
};

/// Filesystem failure: missing, unreadable or unwritable paths.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace facerec
