#pragma once

#include <stdexcept>
#include <string>

namespace fraclab {

/// Invalid run or domain configuration (bad extents, unknown face, bad exponent range).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A documented precondition of an operation does not hold for the given inputs.
class PreconditionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Argument outside the domain of a closed-form expression (e.g. a Gamma pole).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Iterative method failed: non-convergence, breakdown or non-finite values.
class NumericalError : public std::runtime_error {
public:
    NumericalError(const std::string& what, double residual = 0.0, int iterations = 0)
        : std::runtime_error(what), residual_(residual), iterations_(iterations) {}

    [[nodiscard]] double residual() const noexcept { return residual_; }
    [[nodiscard]] int iterations() const noexcept { return iterations_; }

private:
    double residual_;
    int iterations_;
};

/// Input makes a checked quotient 0/0 (zero trace, zero test function).
class DegenerateInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace fraclab
