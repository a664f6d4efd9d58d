#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace koopman {

// Base of every exception thrown by the library. The C API maps each
// subclass onto one kp_status code.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : Error(what + " at offset " + std::to_string(offset)), detail_(what), offset_(offset) {}
    std::size_t offset() const { return offset_; }
    // The message without the offset suffix.
    const std::string& detail() const { return detail_; }

private:
    std::string detail_;
    std::size_t offset_;
};

// Unbound variable or a domain violation (ln of a nonpositive value,
// division by zero) during evaluation.
class EvalError : public Error {
public:
    using Error::Error;
};

// Divergence, singular matrices, failed root brackets.
class NumericalError : public Error {
public:
    using Error::Error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

// A file could not be opened, read or written.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace koopman
