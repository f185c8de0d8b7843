#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lpcurv {

/// Failure categories. The CLI maps these onto its exit-code contract.
enum class ErrorKind {
    InvalidArgument,
    NotInCone,
    ConeExit,
    MaxStepsExceeded,
    LinearSolveFailure,
    HomotopyStalled,
    GammaOutOfRange,
    LemmaViolated,
    RegimeRejected,
    ParseError,
};

constexpr std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidArgument: return "InvalidArgument";
        case ErrorKind::NotInCone: return "NotInCone";
        case ErrorKind::ConeExit: return "ConeExit";
        case ErrorKind::MaxStepsExceeded: return "MaxStepsExceeded";
        case ErrorKind::LinearSolveFailure: return "LinearSolveFailure";
        case ErrorKind::HomotopyStalled: return "HomotopyStalled";
        case ErrorKind::GammaOutOfRange: return "GammaOutOfRange";
        case ErrorKind::LemmaViolated: return "LemmaViolated";
        case ErrorKind::RegimeRejected: return "RegimeRejected";
        case ErrorKind::ParseError: return "ParseError";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

    /// Solver-side failures (as opposed to bad input or failed checks).
    bool is_solve_failure() const noexcept {
        return kind_ == ErrorKind::NotInCone || kind_ == ErrorKind::ConeExit ||
               kind_ == ErrorKind::MaxStepsExceeded || kind_ == ErrorKind::LinearSolveFailure ||
               kind_ == ErrorKind::HomotopyStalled;
    }

private:
    ErrorKind kind_;
};

}  // namespace lpcurv
