#pragma once

#include <stdexcept>
#include <string>

namespace polyode {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Arity / shape mismatch between polynomials, vectors or systems.
class DimensionError : public Error {
public:
    explicit DimensionError(const std::string& what) : Error(what) {}
};

/// Invalid parameter value (delta out of range, degenerate interval, ...).
class ParameterError : public Error {
public:
    explicit ParameterError(const std::string& what) : Error(what) {}
};

/// Construct not supported by the requested operation (unknown primitive,
/// exp without acknowledgement, missing modulus witness, ...).
class UnsupportedError : public Error {
public:
    explicit UnsupportedError(const std::string& what) : Error(what) {}
};

/// A lemma bound was requested in a regime where none of its variants apply.
class InapplicableBoundError : public Error {
public:
    explicit InapplicableBoundError(const std::string& what) : Error(what) {}
};

/// An empirical precondition of a witness transformer failed.
class PreconditionError : public Error {
public:
    explicit PreconditionError(const std::string& what) : Error(what) {}
};

/// DSL / text syntax error with source location.
class ParseError : public Error {
public:
    ParseError(const std::string& what, int line, int col)
        : Error(format(what, line, col)), line_(line), col_(col) {}
    int line() const { return line_; }
    int col() const { return col_; }

private:
    static std::string format(const std::string& what, int line, int col) {
        return std::to_string(line) + ":" + std::to_string(col) + ": " + what;
    }
    int line_;
    int col_;
};

} // namespace polyode
