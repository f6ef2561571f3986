#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bifold {

// Every failure the library reports, as a stable machine-readable code.
// The CLI prints these verbatim in its error lines.
enum class ErrorCode {
    InvalidProfile,
    DegenerateWeights,
    StageMismatch,
    InvalidWeights,
    ShapeMismatch,
    MissingPredictions,
    DuplicateRecord,
    UnknownLabel,
    UnknownModel,
    EmptyEvaluation,
    MalformedRow,
    ProbabilityOutOfRange,
    DistributionViolation,
    ManifestConflict,
    ManifestIncomplete,
    ManifestInvalid,
    InstanceMismatch,
    InvalidSpec,
    Io,
};

constexpr std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::InvalidProfile: return "InvalidProfile";
    case ErrorCode::DegenerateWeights: return "DegenerateWeights";
    case ErrorCode::StageMismatch: return "StageMismatch";
    case ErrorCode::InvalidWeights: return "InvalidWeights";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::MissingPredictions: return "MissingPredictions";
    case ErrorCode::DuplicateRecord: return "DuplicateRecord";
    case ErrorCode::UnknownLabel: return "UnknownLabel";
    case ErrorCode::UnknownModel: return "UnknownModel";
    case ErrorCode::EmptyEvaluation: return "EmptyEvaluation";
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::ProbabilityOutOfRange: return "ProbabilityOutOfRange";
    case ErrorCode::DistributionViolation: return "DistributionViolation";
    case ErrorCode::ManifestConflict: return "ManifestConflict";
    case ErrorCode::ManifestIncomplete: return "ManifestIncomplete";
    case ErrorCode::ManifestInvalid: return "ManifestInvalid";
    case ErrorCode::InstanceMismatch: return "InstanceMismatch";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& detail)
        : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code), detail_(detail) {}

    ErrorCode code() const noexcept { return code_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    std::string detail_;
};

} // namespace bifold
