#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace divlex {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A record in a dataset file does not conform to its schema.
class SchemaError : public Error {
public:
    SchemaError(const std::string& file, std::size_t line, const std::string& what)
        : Error(file + ":" + std::to_string(line) + ": " + what), file_(file), line_(line) {}

    const std::string& file() const noexcept { return file_; }
    std::size_t line() const noexcept { return line_; }

private:
    std::string file_;
    std::size_t line_;
};

/// A record references a query, charge or document that does not exist.
class IntegrityError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// Raised when an argument violates an operation's precondition.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

class ProviderError : public Error {
public:
    using Error::Error;
};

class PredictorUnavailable : public ProviderError {
public:
    using ProviderError::ProviderError;
};

class NonFiniteLoss : public Error {
public:
    using Error::Error;
};

}  // namespace divlex
