#include "qrf/errors.hpp"

namespace qrf {

const char* error_name(ErrorKind k) {
    switch (k) {
        case ErrorKind::IncommensurableSpectrum: return "IncommensurableSpectrum";
        case ErrorKind::NotAFrameFactor: return "NotAFrameFactor";
        case ErrorKind::EmptyKernel: return "EmptyKernel";
        case ErrorKind::NegativeGenerator: return "NegativeGenerator";
        case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
        case ErrorKind::UnsupportedForm: return "UnsupportedForm";
        case ErrorKind::NotPhysical: return "NotPhysical";
        case ErrorKind::SameFrame: return "SameFrame";
        case ErrorKind::UnsupportedSupport: return "UnsupportedSupport";
        case ErrorKind::IllConditionedFlow: return "IllConditionedFlow";
        case ErrorKind::RelationViolation: return "RelationViolation";
        case ErrorKind::DegreeExceeded: return "DegreeExceeded";
        case ErrorKind::OrderingViolation: return "OrderingViolation";
        case ErrorKind::InsufficientTower: return "InsufficientTower";
        case ErrorKind::NearZeroEnergy: return "NearZeroEnergy";
        case ErrorKind::StepTooLarge: return "StepTooLarge";
        case ErrorKind::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

}  // namespace qrf
