#ifndef JLGCN_ERRORS_HPP
#define JLGCN_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace jlgcn {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand shapes are incompatible.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// A NaN or Inf was produced or supplied.
class NumericError : public Error {
public:
    using Error::Error;
};

/// A renormalization degree was zero or negative.
class DegenerateGraphError : public Error {
public:
    using Error::Error;
};

/// backward() was called without a training-mode forward first.
class MissingCacheError : public Error {
public:
    using Error::Error;
};

class EmptyInputError : public Error {
public:
    using Error::Error;
};

class EmptyMaskError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration values or combinations.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Base for dataset problems (malformed files, dangling ids, ...).
class DataError : public Error {
public:
    using Error::Error;
};

class ParseError : public DataError {
public:
    ParseError(const std::string& file, std::size_t line, const std::string& what)
        : DataError(file + ":" + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class IndexError : public DataError {
public:
    using DataError::DataError;
};

class CheckpointError : public DataError {
public:
    using DataError::DataError;
};

} // namespace jlgcn

#endif // JLGCN_ERRORS_HPP
