#include "transim/common.hpp"

namespace transim {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::Ok: return "Ok";
        case ErrorCode::UnknownBus: return "UnknownBus";
        case ErrorCode::ZeroImpedanceBranch: return "ZeroImpedanceBranch";
        case ErrorCode::SingularMatrix: return "SingularMatrix";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::InvalidCase: return "InvalidCase";
        case ErrorCode::NotConverged: return "NotConverged";
        case ErrorCode::InnerLoopDiverged: return "InnerLoopDiverged";
        case ErrorCode::OutOfRange: return "OutOfRange";
        case ErrorCode::InfeasibleSpec: return "InfeasibleSpec";
        case ErrorCode::NoBranches: return "NoBranches";
        case ErrorCode::SchemaError: return "SchemaError";
        case ErrorCode::DimensionChainBroken: return "DimensionChainBroken";
        case ErrorCode::BlobSizeMismatch: return "BlobSizeMismatch";
        case ErrorCode::InterfaceMismatch: return "InterfaceMismatch";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::ValidationError: return "ValidationError";
        case ErrorCode::UnknownComponent: return "UnknownComponent";
        case ErrorCode::UnknownField: return "UnknownField";
        case ErrorCode::ConstraintViolation: return "ConstraintViolation";
        case ErrorCode::NotYetComputed: return "NotYetComputed";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

}  // namespace transim
