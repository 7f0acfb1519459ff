#pragma once

#include <stdexcept>
#include <string>

namespace rootopt {

enum class ErrorCode {
    Generic = 1,
    Parse = 2,
    Schema = 3,
    EmptyArm = 4,
    TooFewKept = 5,
    Io = 6,
    UnknownDgp = 7,
    EmptyData = 8,
    Separation = 9,
    NonFinite = 10,
    BudgetExceeded = 11,
    Config = 12,
};

inline const char* error_name(ErrorCode c) {
    switch (c) {
        case ErrorCode::Parse: return "ParseError";
        case ErrorCode::Schema: return "SchemaError";
        case ErrorCode::EmptyArm: return "EmptyArm";
        case ErrorCode::TooFewKept: return "TooFewKept";
        case ErrorCode::Io: return "IoError";
        case ErrorCode::UnknownDgp: return "UnknownDgp";
        case ErrorCode::EmptyData: return "EmptyData";
        case ErrorCode::Separation: return "SeparationError";
        case ErrorCode::NonFinite: return "NonFinite";
        case ErrorCode::BudgetExceeded: return "BudgetExceeded";
        case ErrorCode::Config: return "ConfigError";
        default: return "Error";
    }
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& msg)
        : std::runtime_error(std::string(error_name(code)) + ": " + msg), code_(code) {}

    ErrorCode code() const { return code_; }
    int exit_code() const { return static_cast<int>(code_); }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& msg) { throw Error(code, msg); }

}  // namespace rootopt
