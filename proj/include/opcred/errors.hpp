#pragma once

#include <stdexcept>
#include <string>

namespace opcred {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input text (CSV/JSON). Carries the 1-based line when known.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line = 0)
        : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Well-formed input that breaks a model invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Data refers to a cell that has no configuration, or the configuration is unusable.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Not enough observations, cells or banks for an estimator.
class InsufficientDataError : public Error {
public:
    using Error::Error;
};

/// Estimator is undefined for the given sample (e.g. infinite MLE).
class DegenerateError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace opcred
