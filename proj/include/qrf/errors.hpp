#pragma once

#include <stdexcept>
#include <string>

namespace qrf {

enum class ErrorKind {
    IncommensurableSpectrum,
    NotAFrameFactor,
    EmptyKernel,
    NegativeGenerator,
    IndexOutOfRange,
    UnsupportedForm,
    NotPhysical,
    SameFrame,
    UnsupportedSupport,
    IllConditionedFlow,
    RelationViolation,
    DegreeExceeded,
    OrderingViolation,
    InsufficientTower,
    NearZeroEnergy,
    StepTooLarge,
    ConfigError,
};

const char* error_name(ErrorKind k);

/**
 * @brief Single exception type for the library; the kind says what went wrong.
 */
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg)
        : std::runtime_error(std::string(error_name(kind)) + ": " + msg), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& msg) { throw Error(kind, msg); }

}  // namespace qrf
