#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mfnet {

enum class ErrorKind {
    // input / configuration problems
    InvalidNetwork,
    InvalidArgument,
    InvalidM,
    IndexMismatch,
    BadPlacement,
    ParseError,
    // numerical problems
    NonErgodic,
    EmptyNetwork,
    TruncationOverflow,
    MassDefect,
    ZeroLoad,
    LoadTooLarge,
    Unstable,
    TruncationTooSmall,
    LoadInfeasible,
    BetaTooLarge,
    NoDecay,
};

constexpr std::string_view error_name(ErrorKind kind) noexcept
{
    switch (kind) {
    case ErrorKind::InvalidNetwork: return "InvalidNetwork";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::InvalidM: return "InvalidM";
    case ErrorKind::IndexMismatch: return "IndexMismatch";
    case ErrorKind::BadPlacement: return "BadPlacement";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::NonErgodic: return "NonErgodic";
    case ErrorKind::EmptyNetwork: return "EmptyNetwork";
    case ErrorKind::TruncationOverflow: return "TruncationOverflow";
    case ErrorKind::MassDefect: return "MassDefect";
    case ErrorKind::ZeroLoad: return "ZeroLoad";
    case ErrorKind::LoadTooLarge: return "LoadTooLarge";
    case ErrorKind::Unstable: return "Unstable";
    case ErrorKind::TruncationTooSmall: return "TruncationTooSmall";
    case ErrorKind::LoadInfeasible: return "LoadInfeasible";
    case ErrorKind::BetaTooLarge: return "BetaTooLarge";
    case ErrorKind::NoDecay: return "NoDecay";
    }
    return "Unknown";
}

/// True for errors caused by bad inputs rather than by a numerical failure.
constexpr bool is_validation_error(ErrorKind kind) noexcept
{
    switch (kind) {
    case ErrorKind::InvalidNetwork:
    case ErrorKind::InvalidArgument:
    case ErrorKind::InvalidM:
    case ErrorKind::IndexMismatch:
    case ErrorKind::BadPlacement:
    case ErrorKind::ParseError:
        return true;
    default:
        return false;
    }
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(error_name(kind)) + ": " + message), kind_(kind), detail_(message)
    {
    }

    ErrorKind kind() const noexcept { return kind_; }
    std::string_view name() const noexcept { return error_name(kind_); }
    /// The message without the error-name prefix.
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorKind kind_;
    std::string detail_;
};

} // namespace mfnet
