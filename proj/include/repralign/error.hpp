#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace repralign {

enum class ErrorCode {
    InvalidArgument,
    ShapeMismatch,
    NonFinite,
    LabelOutOfRange,
    DegenerateLabels,
    SizeOutOfRange,
    DimensionMismatch,
    MismatchedDendrogram,
    MismatchedPartition,
    KOutOfRange,
    KTooSmall,
    TooLargeForOracle,
    EmptyRuns,
    SingleClass,
    FoldTooSmall,
    DegenerateDraw,
    ZeroVariance,
    TooFewPairs,
    DuplicateCell,
    IncompleteGrid,
    FormatError,
    VersionMismatch,
    EmptyFile,
    RowCountMismatch,
    MissingField,
    BadJson,
    EmptyVocabulary,
    IoError,
};

// Stable machine-readable name, e.g. "NonFinite".
std::string_view error_code_name(ErrorCode code);

// True for errors caused by bad input or configuration (CLI exit code 2),
// false for failures during computation (exit code 3).
bool is_validation_error(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message);

    ErrorCode code() const noexcept { return code_; }
    // The message without the code prefix that what() carries.
    const std::string& message() const noexcept { return message_; }

    // Row/column of the offending cell for NonFinite, row for LabelOutOfRange,
    // line number (1-based) for MissingField/BadJson.
    std::optional<std::size_t> row() const noexcept { return row_; }
    std::optional<std::size_t> col() const noexcept { return col_; }
    // Byte offset for FormatError.
    std::optional<std::size_t> offset() const noexcept { return offset_; }

    Error& at_row(std::size_t r) { row_ = r; return *this; }
    Error& at_col(std::size_t c) { col_ = c; return *this; }
    Error& at_offset(std::size_t o) { offset_ = o; return *this; }

private:
    ErrorCode code_;
    std::string message_;
    std::optional<std::size_t> row_;
    std::optional<std::size_t> col_;
    std::optional<std::size_t> offset_;
};

}  // namespace repralign
