#pragma once

#include <stdexcept>
#include <string>

namespace ladder {

/// Base class of every error thrown by the library. The C API maps the
/// concrete subclasses onto status codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid user configuration. `field()` names the offending parameter.
class ConfigError : public Error {
public:
    ConfigError(std::string field, const std::string& what)
        : Error(field + ": " + what), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// A function was evaluated outside its mathematical domain.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Mesh construction or master/slave tying failed.
class GeometryError : public Error {
public:
    using Error::Error;
};

/// Factorization breakdown, non-convergence, failed consistency checks.
class NumericalError : public Error {
public:
    using Error::Error;
};

} // namespace ladder
