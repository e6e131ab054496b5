#pragma once

#include <stdexcept>
#include <string>

namespace carbongmam {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A state or argument lies outside the domain of a model function.
class DomainError : public Error {
public:
    using Error::Error;
};

/// The noise metric degenerates (buffer factor below its floor).
class SingularityError : public Error {
public:
    using Error::Error;
};

/// An iterative solver (Newton, Poincare map) failed to converge.
class ConvergenceError : public Error {
public:
    using Error::Error;
};

/// The requested limit cycle does not exist for these parameters.
class NoCycleError : public Error {
public:
    using Error::Error;
};

class DegeneratePathError : public Error {
public:
    using Error::Error;
};

class LinearSolveError : public Error {
public:
    using Error::Error;
};

/// Configuration or parameter file problem; `field()` names the offending key.
class ConfigError : public Error {
public:
    ConfigError(std::string field, const std::string& message)
        : Error(field.empty() ? message : field + ": " + message), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace carbongmam
