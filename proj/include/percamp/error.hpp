#pragma once

#include <stdexcept>
#include <string>

namespace percamp {

struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

struct ValidationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Raised by the PDE solver when a bound from the a-priori estimates fails.
struct BoundViolation : std::runtime_error {
    std::string family;
    double t = 0.0;
    double x = 0.0;
    double value = 0.0;
    double bound = 0.0;

    BoundViolation(std::string fam, double t_, double x_, double v, double b);
};

struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DivergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ResourceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace percamp
