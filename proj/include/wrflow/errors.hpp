#pragma once

#include <stdexcept>
#include <string>

namespace wrflow {

enum class ErrorKind {
    NotHermitian,
    NotPsd,
    NotProjection,
    DimensionMismatch,
    EmptyBasis,
    EmptyWord,
    InvalidLetter,
    BudgetExceeded,
    ResidualKindNotBinary,
    InvalidMeasure,
    InvalidArgument,
    EmptySampleSet,
    OperatorsNotRetained,
    BranchNotExtinct,
    InvalidConfig,
    ParseError,
};

const char* to_string(ErrorKind kind) noexcept;

/// Every failure raised by the library carries a machine-checkable kind.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind)
    {
    }

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

} // namespace wrflow
