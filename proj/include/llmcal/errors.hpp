#pragma once

#include <stdexcept>
#include <string>

namespace llmcal {

enum class ErrorCode {
    Schema,
    InsufficientData,
    EmptyInput,
    ZeroMass,
    Argument,
    Alignment,
    Backend,
    ExtractionFailure,
    Divergence,
    NoMatch,
    Io,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, std::string message)
        : std::runtime_error(std::move(message)), code_(code) {}

    ErrorCode code() const { return code_; }

    const char* code_name() const {
        switch (code_) {
            case ErrorCode::Schema: return "schema";
            case ErrorCode::InsufficientData: return "insufficient_data";
            case ErrorCode::EmptyInput: return "empty_input";
            case ErrorCode::ZeroMass: return "zero_mass";
            case ErrorCode::Argument: return "argument";
            case ErrorCode::Alignment: return "alignment";
            case ErrorCode::Backend: return "backend";
            case ErrorCode::ExtractionFailure: return "extraction_failure";
            case ErrorCode::Divergence: return "divergence";
            case ErrorCode::NoMatch: return "no_match";
            case ErrorCode::Io: return "io";
        }
        return "unknown";
    }

private:
    ErrorCode code_;
};

}  // namespace llmcal
