// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace tad {

enum class ErrorCode {
    UnknownSymbol,
    ShapeMismatch,
    OutOfRangeIndexMap,
    DuplicateIndex,
    NonIntegerComposition,
    BothZero,
    DimensionMismatch,
    InfiniteRange,
    NonAffineSumBound,
    NonAffineIndex,
    NonDifferentiableOp,
    NumericDomain,
    SyntaxError,
    UndeclaredTensor,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code)
    {
    }

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace tad
