#pragma once

#include <stdexcept>
#include <string>

namespace paneitz {

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Malformed or inconsistent run configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The operator failed the discrete coercivity test.
class CoercivityError : public std::runtime_error {
public:
    CoercivityError(const std::string& what, double lambda_estimate)
        : std::runtime_error(what), lambda_estimate_(lambda_estimate) {}
    double lambda_estimate() const noexcept { return lambda_estimate_; }

private:
    double lambda_estimate_;
};

/// The constraint level does not dominate the boundary extension mass.
class AdmissibilityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An iterative solver stopped without meeting its tolerance.
class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace paneitz
