// error.hpp: error kinds raised by the qheat library

#pragma once

#include <stdexcept>
#include <string>

namespace qheat {

enum class ErrorKind {
    InvalidArgument,
    NonSymmetric,
    NegativeFrequency,
    ZeroFrequency,
    ZeroGap,
    TemperatureTooLow,
    QuadratureFailure,
    NonDecayingKernel,
    NegativeRate,
    DegenerateSteadyState,
    BranchCrossing,
    AsymmetricSplitting,
    SchemeMismatch,
    StepSizeUnderflow,
    TooFewPoints,
    ConfigError,
};

inline const char* to_string(ErrorKind k) {
    switch (k) {
        case ErrorKind::InvalidArgument: return "InvalidArgument";
        case ErrorKind::NonSymmetric: return "NonSymmetric";
        case ErrorKind::NegativeFrequency: return "NegativeFrequency";
        case ErrorKind::ZeroFrequency: return "ZeroFrequency";
        case ErrorKind::ZeroGap: return "ZeroGap";
        case ErrorKind::TemperatureTooLow: return "TemperatureTooLow";
        case ErrorKind::QuadratureFailure: return "QuadratureFailure";
        case ErrorKind::NonDecayingKernel: return "NonDecayingKernel";
        case ErrorKind::NegativeRate: return "NegativeRate";
        case ErrorKind::DegenerateSteadyState: return "DegenerateSteadyState";
        case ErrorKind::BranchCrossing: return "BranchCrossing";
        case ErrorKind::AsymmetricSplitting: return "AsymmetricSplitting";
        case ErrorKind::SchemeMismatch: return "SchemeMismatch";
        case ErrorKind::StepSizeUnderflow: return "StepSizeUnderflow";
        case ErrorKind::TooFewPoints: return "TooFewPoints";
        case ErrorKind::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

} // namespace qheat
