#pragma once

#include <stdexcept>
#include <string>

namespace noiselab {

// Base for all library errors. Subtypes carry the failing subsystem in the
// type so callers can catch narrowly.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(what) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(what) {}
};

class Utf8Error : public Error {
public:
    explicit Utf8Error(const std::string& what) : Error(what) {}
};

// Shape or dtype mismatch in tensor ops; message names the op and shapes.
class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& what) : Error(what) {}
};

class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error(what) {}
};

class CheckpointError : public Error {
public:
    explicit CheckpointError(const std::string& what) : Error(what) {}
};

// Autodiff tape misuse: non-scalar backward, reusing a consumed graph,
// reading gradients before backward, mixing variables across tapes.
class GraphError : public Error {
public:
    explicit GraphError(const std::string& what) : Error(what) {}
};

// Non-finite values produced by a forward op (only raised when finite
// checks are enabled).
class NumericError : public Error {
public:
    explicit NumericError(const std::string& what) : Error(what) {}
};

}  // namespace noiselab
