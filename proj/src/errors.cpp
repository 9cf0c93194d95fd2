#include "eomsim/errors.hpp"

namespace eomsim {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::InvalidParams:
            return "InvalidParams";
        case ErrorKind::ZeroDensity:
            return "ZeroDensity";
        case ErrorKind::NegativeDensity:
            return "NegativeDensity";
        case ErrorKind::TargetOutOfRange:
            return "TargetOutOfRange";
        case ErrorKind::UndersampledInput:
            return "UndersampledInput";
        case ErrorKind::AmplitudeOutOfRange:
            return "AmplitudeOutOfRange";
        case ErrorKind::ChannelMismatch:
            return "ChannelMismatch";
        case ErrorKind::ConfigMismatch:
            return "ConfigMismatch";
        case ErrorKind::EmptyRun:
            return "EmptyRun";
        case ErrorKind::WindowTooSmall:
            return "WindowTooSmall";
        case ErrorKind::ZeroFactor:
            return "ZeroFactor";
        case ErrorKind::DivisionByZero:
            return "DivisionByZero";
        case ErrorKind::GridMismatch:
            return "GridMismatch";
        case ErrorKind::ParseError:
            return "ParseError";
        case ErrorKind::ValidationError:
            return "ValidationError";
        case ErrorKind::IoError:
            return "IoError";
    }
    return "Unknown";
}

Error::Error(ErrorKind kind, const std::string &message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {
}

}  // namespace eomsim
