#ifndef NCOT_ERRORS_HPP
#define NCOT_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace ncot {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shapes, backends or block layouts that do not fit together.
class StructuralError : public Error {
public:
    using Error::Error;
};

/// Invalid input data (non-hermitian jump operators, negative weights, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A scalar function evaluated outside its domain.
class DomainError : public Error {
public:
    using Error::Error;
};

/// A documented precondition of an operation does not hold.
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// A momentum has mass on the kernel of rho-hat: the action is +infinity.
class SingularityError : public Error {
public:
    using Error::Error;
};

/// The heat flow produced a density with a significantly negative eigenvalue.
class PositivityError : public Error {
public:
    using Error::Error;
};

/// An iterative solver stopped before meeting its tolerance.
class NonConvergenceError : public Error {
public:
    NonConvergenceError(const std::string& what, double best_value)
        : Error(what), best_value_(best_value) {}

    double best_value() const noexcept { return best_value_; }

private:
    double best_value_;
};

} // namespace ncot

#endif // NCOT_ERRORS_HPP
