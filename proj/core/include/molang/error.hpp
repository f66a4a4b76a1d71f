#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace molang {

// Base of all library errors. The CLI maps these to exit code 2.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Invalid user-supplied configuration (bad ratios, empty family set, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

// Array dimensions do not line up.
class ShapeError : public Error {
public:
    using Error::Error;
};

// An API precondition was violated by the caller.
class ContractError : public Error {
public:
    using Error::Error;
};

// NaN/Inf surfaced while checked mode is on.
class NumericError : public Error {
public:
    using Error::Error;
};

// Token or codebook id out of range.
class RangeError : public Error {
public:
    using Error::Error;
};

// Prompt template had an unbound or unknown placeholder.
class TemplateError : public Error {
public:
    explicit TemplateError(const std::string& placeholder, const std::string& what)
        : Error(what), placeholder_(placeholder) {}
    const std::string& placeholder() const { return placeholder_; }

private:
    std::string placeholder_;
};

// Malformed binary file; carries the byte offset of the first problem.
class FormatError : public Error {
public:
    FormatError(std::size_t offset, const std::string& what)
        : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_ = 0;
};

// Fewer frames than an operation needs.
class InsufficientFramesError : public Error {
public:
    using Error::Error;
};

// Checkpoint does not match the vocabulary or model it is loaded against.
class CompatibilityError : public Error {
public:
    using Error::Error;
};

}  // namespace molang
