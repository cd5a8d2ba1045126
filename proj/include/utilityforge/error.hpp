#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace utilityforge {

enum class ErrorCode {
    NonConvergence,
    NonFinite,
    NoBracket,
    InvalidParameter,
    UndefinedHazard,
    DegenerateKernel,
    UnpricedTail,
    NonContinuousTarget,
    BudgetOutOfRange,
    DomainMismatch,
    UndefinedAt,
    NotEquiprobable,
    NonStrictOrder,
    InfeasibleAllocation,
    ConfigError,
};

inline constexpr std::string_view to_string(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::NoBracket: return "NoBracket";
    case ErrorCode::InvalidParameter: return "InvalidParameter";
    case ErrorCode::UndefinedHazard: return "UndefinedHazard";
    case ErrorCode::DegenerateKernel: return "DegenerateKernel";
    case ErrorCode::UnpricedTail: return "UnpricedTail";
    case ErrorCode::NonContinuousTarget: return "NonContinuousTarget";
    case ErrorCode::BudgetOutOfRange: return "BudgetOutOfRange";
    case ErrorCode::DomainMismatch: return "DomainMismatch";
    case ErrorCode::UndefinedAt: return "UndefinedAt";
    case ErrorCode::NotEquiprobable: return "NotEquiprobable";
    case ErrorCode::NonStrictOrder: return "NonStrictOrder";
    case ErrorCode::InfeasibleAllocation: return "InfeasibleAllocation";
    case ErrorCode::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so the
/// CLI can map it onto a machine-readable error report.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what)
        , code_(code)
        , detail_(what)
    {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }
    [[nodiscard]] const std::string& detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    std::string detail_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what)
{
    throw Error(code, what);
}

} // namespace utilityforge
