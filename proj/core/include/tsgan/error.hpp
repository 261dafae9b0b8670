#pragma once

#include <stdexcept>
#include <string>

namespace tsgan {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Incompatible tensor shapes or dimensions.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Argument outside its allowed domain (non-positive sigma, bad count, ...).
class ValueError : public Error {
public:
    using Error::Error;
};

/// File missing, unreadable or unwritable.
class IoError : public Error {
public:
    using Error::Error;
};

/// Unsupported or corrupt file content.
class FormatError : public Error {
public:
    using Error::Error;
};

/// A metric is undefined for the given input (zero variance, no fixations).
class UndefinedMetricError : public Error {
public:
    using Error::Error;
};

}  // namespace tsgan
