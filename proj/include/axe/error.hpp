#pragma once

#include <stdexcept>
#include <string>

namespace axe {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The accumulator budget cannot admit a single nonzero weight (B <= 0).
class InfeasibleBudget : public Error {
public:
    using Error::Error;
};

/// Factorization or inversion broke down.
class NumericalError : public Error {
public:
    NumericalError(const std::string& what, long pivot)
        : Error(what), pivot_(pivot) {}

    long pivot() const noexcept { return pivot_; }

private:
    long pivot_;
};

/// Malformed tensor file. `kind()` tells the failures apart.
class FormatError : public Error {
public:
    enum class Kind { io, bad_magic, bad_rank, bad_dtype, truncated, trailing };

    FormatError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

}  // namespace axe
