#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace eomsim {

enum class ErrorKind {
    InvalidParams,
    ZeroDensity,
    NegativeDensity,
    TargetOutOfRange,
    UndersampledInput,
    AmplitudeOutOfRange,
    ChannelMismatch,
    ConfigMismatch,
    EmptyRun,
    WindowTooSmall,
    ZeroFactor,
    DivisionByZero,
    GridMismatch,
    ParseError,
    ValidationError,
    IoError,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// All library failures are reported through this exception; `kind()` names
/// the failure class so callers (and the CLI exit-code mapping) can dispatch.
class Error : public std::runtime_error {
   public:
    Error(ErrorKind kind, const std::string &message);

    ErrorKind kind() const noexcept {
        return kind_;
    }

   private:
    ErrorKind kind_;
};

}  // namespace eomsim
