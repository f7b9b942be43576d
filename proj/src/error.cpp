#include "repralign/error.hpp"

namespace repralign {

std::string_view error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::NonFinite: return "NonFinite";
        case ErrorCode::LabelOutOfRange: return "LabelOutOfRange";
        case ErrorCode::DegenerateLabels: return "DegenerateLabels";
        case ErrorCode::SizeOutOfRange: return "SizeOutOfRange";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::MismatchedDendrogram: return "MismatchedDendrogram";
        case ErrorCode::MismatchedPartition: return "MismatchedPartition";
        case ErrorCode::KOutOfRange: return "KOutOfRange";
        case ErrorCode::KTooSmall: return "KTooSmall";
        case ErrorCode::TooLargeForOracle: return "TooLargeForOracle";
        case ErrorCode::EmptyRuns: return "EmptyRuns";
        case ErrorCode::SingleClass: return "SingleClass";
        case ErrorCode::FoldTooSmall: return "FoldTooSmall";
        case ErrorCode::DegenerateDraw: return "DegenerateDraw";
        case ErrorCode::ZeroVariance: return "ZeroVariance";
        case ErrorCode::TooFewPairs: return "TooFewPairs";
        case ErrorCode::DuplicateCell: return "DuplicateCell";
        case ErrorCode::IncompleteGrid: return "IncompleteGrid";
        case ErrorCode::FormatError: return "FormatError";
        case ErrorCode::VersionMismatch: return "VersionMismatch";
        case ErrorCode::EmptyFile: return "EmptyFile";
        case ErrorCode::RowCountMismatch: return "RowCountMismatch";
        case ErrorCode::MissingField: return "MissingField";
        case ErrorCode::BadJson: return "BadJson";
        case ErrorCode::EmptyVocabulary: return "EmptyVocabulary";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

bool is_validation_error(ErrorCode code) {
    switch (code) {
        case ErrorCode::TooLargeForOracle:
        case ErrorCode::FoldTooSmall:
        case ErrorCode::DegenerateDraw:
        case ErrorCode::ZeroVariance:
        case ErrorCode::MismatchedPartition:
            return false;
        default:
            return true;
    }
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code), message_(message) {}

}  // namespace repralign
