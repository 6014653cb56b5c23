#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace transim {

using Real = double;
using Complex = std::complex<double>;
using Index = std::int32_t;

inline constexpr double kPi = 3.14159265358979323846;

/// Error taxonomy shared by every module and surfaced unchanged through the
/// CLI exit codes and the flat C interface.
enum class ErrorCode : int {
    Ok = 0,
    UnknownBus = 1,
    ZeroImpedanceBranch = 2,
    SingularMatrix = 3,
    DimensionMismatch = 4,
    InvalidCase = 5,
    NotConverged = 6,
    InnerLoopDiverged = 7,
    OutOfRange = 8,
    InfeasibleSpec = 9,
    NoBranches = 10,
    SchemaError = 11,
    DimensionChainBroken = 12,
    BlobSizeMismatch = 13,
    InterfaceMismatch = 14,
    ParseError = 15,
    ValidationError = 16,
    UnknownComponent = 17,
    UnknownField = 18,
    ConstraintViolation = 19,
    NotYetComputed = 20,
    IoError = 21,
    InvalidArgument = 22,
};

[[nodiscard]] std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace transim
