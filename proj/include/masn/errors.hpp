#pragma once

#include <stdexcept>
#include <string>

namespace masn {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Shapes that do not line up for an operation.
class ShapeError : public Error {
public:
    using Error::Error;
};

// NaN or Inf produced or consumed by a numeric routine.
class NumericError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// Episode / checkpoint file problems. Each failure mode has its own type so
// callers (and the CLI) can report them distinctly.
class FormatError : public Error {
public:
    using Error::Error;
};

class VersionError : public Error {
public:
    using Error::Error;
};

class TruncatedError : public Error {
public:
    using Error::Error;
};

class ShapeInconsistencyError : public Error {
public:
    using Error::Error;
};

// Missing or unreadable/unwritable file.
class IoError : public Error {
public:
    using Error::Error;
};

class TaskMismatchError : public Error {
public:
    using Error::Error;
};

}  // namespace masn
