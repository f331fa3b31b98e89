#pragma once

#include <stdexcept>
#include <string>

namespace sgl {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Thrown when a time argument lies outside the schedule's valid range.
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

}  // namespace sgl
