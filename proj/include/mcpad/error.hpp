#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mcpad {

// Base for every error raised by the library. Categories mirror the failure
// classes callers are expected to distinguish (bad input vs. failed fit, ...).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ArgumentError : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    FormatError(const std::string& what, std::size_t offset)
        : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

    [[nodiscard]] std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

class IoError : public Error {
public:
    using Error::Error;
};

class GeometryError : public Error {
public:
    using Error::Error;
};

class SampleError : public Error {
public:
    using Error::Error;
};

class FitError : public Error {
public:
    using Error::Error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class ProtocolError : public Error {
public:
    using Error::Error;
};

class MetricError : public Error {
public:
    using Error::Error;
};

// Raised by configuration and CLI validation; maps to exit status 2.
class ValidationError : public Error {
public:
    using Error::Error;
};

}  // namespace mcpad
