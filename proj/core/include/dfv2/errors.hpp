#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace dfv2 {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand shapes are incompatible (matmul inner dims, channel counts, ...).
class DimensionError : public Error {
public:
    using Error::Error;
};

/// A single tensor has an unusable shape (e.g. not divisible by a pool stride).
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A scalar hyperparameter is outside its admissible range.
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Input values are outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Labels or other data values are malformed.
class DataError : public Error {
public:
    using Error::Error;
};

/// API misuse: non-scalar loss, reused tape, ...
class UsageError : public Error {
public:
    using Error::Error;
};

/// File could not be parsed; the message always names the file.
class ParseError : public Error {
public:
    using Error::Error;
};

/// File could not be opened or written.
class IoError : public Error {
public:
    using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
public:
    using Error::Error;
};

std::string shape_to_string(const std::vector<std::size_t>& shape);

} // namespace dfv2
