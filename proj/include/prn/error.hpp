#pragma once

#include <stdexcept>
#include <string>

namespace prn {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Tensor or image shapes that do not fit together.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Argument outside the supported domain (unsupported scale, bad threshold, ...).
class ArgumentError : public Error {
public:
    using Error::Error;
};

/// File could not be read or written.
class IoError : public Error {
public:
    using Error::Error;
};

/// File was readable but its contents are malformed or unsupported.
class FormatError : public Error {
public:
    using Error::Error;
};

}  // namespace prn
