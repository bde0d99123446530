#pragma once

#include <stdexcept>
#include <string>

namespace pru {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Dimension or shape mismatch between operands.
class ShapeError : public Error {
public:
    using Error::Error;
};

// NaN/Inf encountered where finite values are required.
class NumericError : public Error {
public:
    using Error::Error;
};

// Experiment configuration violates the schema.
class ConfigError : public Error {
public:
    using Error::Error;
};

class DataError : public Error {
public:
    enum class Kind { unreadable, empty, bad_magic, truncated, count_mismatch, malformed };

    DataError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

}  // namespace pru
