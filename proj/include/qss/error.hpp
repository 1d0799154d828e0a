#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qss {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A parameter is missing, undeclared, nonfinite or violates its schema constraint.
class ParameterError : public Error {
public:
    ParameterError(std::string parameter, const std::string& what)
        : Error(what), parameter_(std::move(parameter)) {}

    const std::string& parameter() const noexcept { return parameter_; }

private:
    std::string parameter_;
};

/// State or derivative dimension does not match the model declaration.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Arguments outside the domain of a closed-form expression.
class DomainError : public Error {
public:
    using Error::Error;
};

/// An operation was asked for a model kind it does not support.
class UnsupportedKindError : public Error {
public:
    using Error::Error;
};

/// Bad invocation (unknown names, malformed sweep specs, bad CLI flags).
class UsageError : public Error {
public:
    using Error::Error;
};

/// Base for failures of the numerical machinery.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Integration produced a nonfinite state.
class BlowupError : public NumericalError {
public:
    BlowupError(double time, const std::string& what) : NumericalError(what), time_(time) {}

    double time() const noexcept { return time_; }

private:
    double time_;
};

/// Adaptive step size collapsed below the underflow threshold.
class StiffnessError : public NumericalError {
public:
    StiffnessError(double time, const std::string& what) : NumericalError(what), time_(time) {}

    double time() const noexcept { return time_; }

private:
    double time_;
};

/// Root finding failed; carries the best iterate seen.
class NoConvergenceError : public NumericalError {
public:
    NoConvergenceError(std::vector<double> best, double residual, const std::string& what)
        : NumericalError(what), best_(std::move(best)), residual_(residual) {}

    const std::vector<double>& best_iterate() const noexcept { return best_; }
    double residual() const noexcept { return residual_; }

private:
    std::vector<double> best_;
    double residual_;
};

/// time_to_epsilon never met its bound inside the search horizon.
class TimeoutError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Too few samples for a trajectory analysis.
class InsufficientDataError : public Error {
public:
    using Error::Error;
};

}  // namespace qss
