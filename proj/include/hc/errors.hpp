#pragma once

#include <stdexcept>
#include <string>

namespace hc {

// Machine-readable failure codes. Validation codes map to CLI exit status 2,
// everything else to exit status 1.
enum class ErrorCode {
    InclusionTouchesBoundary,
    StiffDisconnected,
    EllipticityViolated,
    MisalignedInclusion,
    SolverFailure,
    SolvabilityViolated,
    EigenFailure,
    NotPositiveDefinite,
    PoleProximity,
    TailBoundTooLarge,
    EmptyInclusion,
    EmptySet,
    DegenerateFit,
    ConfigError,
};

inline const char *to_string(ErrorCode c) {
    switch (c) {
    case ErrorCode::InclusionTouchesBoundary: return "InclusionTouchesBoundary";
    case ErrorCode::StiffDisconnected:        return "StiffDisconnected";
    case ErrorCode::EllipticityViolated:      return "EllipticityViolated";
    case ErrorCode::MisalignedInclusion:      return "MisalignedInclusion";
    case ErrorCode::SolverFailure:            return "SolverFailure";
    case ErrorCode::SolvabilityViolated:      return "SolvabilityViolated";
    case ErrorCode::EigenFailure:             return "EigenFailure";
    case ErrorCode::NotPositiveDefinite:      return "NotPositiveDefinite";
    case ErrorCode::PoleProximity:            return "PoleProximity";
    case ErrorCode::TailBoundTooLarge:        return "TailBoundTooLarge";
    case ErrorCode::EmptyInclusion:           return "EmptyInclusion";
    case ErrorCode::EmptySet:                 return "EmptySet";
    case ErrorCode::DegenerateFit:            return "DegenerateFit";
    case ErrorCode::ConfigError:              return "ConfigError";
    }
    return "UnknownError";
}

// True for codes caused by bad user input rather than an internal failure.
inline bool is_validation_error(ErrorCode c) {
    switch (c) {
    case ErrorCode::InclusionTouchesBoundary:
    case ErrorCode::StiffDisconnected:
    case ErrorCode::EllipticityViolated:
    case ErrorCode::MisalignedInclusion:
    case ErrorCode::EmptyInclusion:
    case ErrorCode::ConfigError:
        return true;
    default:
        return false;
    }
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string &what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), m_code(code) {}
    ErrorCode code() const noexcept { return m_code; }

private:
    ErrorCode m_code;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string &what) {
    throw Error(code, what);
}

} // namespace hc
