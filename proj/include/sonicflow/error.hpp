#pragma once

#include <stdexcept>
#include <string>

namespace sonicflow {

enum class ErrorCode {
    InvalidParameter,
    InvalidConfig,
    SonicSingularity,
    CriticalLocus,
    NotConstantDoping,
    SonicDoping,
    NotSonicDoping,
    EntropyViolation,
    ComplexSlope,
    DegenerateLaunch,
    PreconditionViolation,
    NoSolutionInRegime,
    RegimeRejection,
    StepFailure,
    NewtonDivergence,
    BracketFailure,
    ShootingDivergence,
    LastCrossingMissing,
    GlueMismatch,
    InsufficientWindow,
    LemmaViolation,
};

enum class ErrorCategory { Usage, Regime, Numerical };

inline const char* to_string(ErrorCode c) {
    switch (c) {
    case ErrorCode::InvalidParameter: return "InvalidParameter";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::SonicSingularity: return "SonicSingularity";
    case ErrorCode::CriticalLocus: return "CriticalLocus";
    case ErrorCode::NotConstantDoping: return "NotConstantDoping";
    case ErrorCode::SonicDoping: return "SonicDoping";
    case ErrorCode::NotSonicDoping: return "NotSonicDoping";
    case ErrorCode::EntropyViolation: return "EntropyViolation";
    case ErrorCode::ComplexSlope: return "ComplexSlope";
    case ErrorCode::DegenerateLaunch: return "DegenerateLaunch";
    case ErrorCode::PreconditionViolation: return "PreconditionViolation";
    case ErrorCode::NoSolutionInRegime: return "NoSolutionInRegime";
    case ErrorCode::RegimeRejection: return "RegimeRejection";
    case ErrorCode::StepFailure: return "StepFailure";
    case ErrorCode::NewtonDivergence: return "NewtonDivergence";
    case ErrorCode::BracketFailure: return "BracketFailure";
    case ErrorCode::ShootingDivergence: return "ShootingDivergence";
    case ErrorCode::LastCrossingMissing: return "LastCrossingMissing";
    case ErrorCode::GlueMismatch: return "GlueMismatch";
    case ErrorCode::InsufficientWindow: return "InsufficientWindow";
    case ErrorCode::LemmaViolation: return "LemmaViolation";
    }
    return "Unknown";
}

inline ErrorCategory category(ErrorCode c) {
    switch (c) {
    case ErrorCode::InvalidParameter:
    case ErrorCode::InvalidConfig:
        return ErrorCategory::Usage;
    case ErrorCode::NotConstantDoping:
    case ErrorCode::SonicDoping:
    case ErrorCode::NotSonicDoping:
    case ErrorCode::EntropyViolation:
    case ErrorCode::ComplexSlope:
    case ErrorCode::DegenerateLaunch:
    case ErrorCode::PreconditionViolation:
    case ErrorCode::NoSolutionInRegime:
    case ErrorCode::RegimeRejection:
        return ErrorCategory::Regime;
    default:
        return ErrorCategory::Numerical;
    }
}

// Exit status used by the command line tool.
inline int exit_code(ErrorCode c) {
    switch (category(c)) {
    case ErrorCategory::Usage: return 1;
    case ErrorCategory::Regime: return 2;
    case ErrorCategory::Numerical: return 3;
    }
    return 3;
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message, std::string theoremRef = {})
        : std::runtime_error(message), code_(code), theoremRef_(std::move(theoremRef)) {}

    ErrorCode code() const noexcept { return code_; }
    const std::string& theorem_ref() const noexcept { return theoremRef_; }

private:
    ErrorCode code_;
    std::string theoremRef_;
};

} // namespace sonicflow
