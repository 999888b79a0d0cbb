// SPDX-License-Identifier: Apache-2.0
#include "tad/error.hpp"
#include "tad/numeric.hpp"

#include <limits>
#include <stdexcept>

namespace tad {

const char* to_string(ErrorCode code)
{
    switch (code) {
        case ErrorCode::UnknownSymbol: return "UnknownSymbol";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::OutOfRangeIndexMap: return "OutOfRangeIndexMap";
        case ErrorCode::DuplicateIndex: return "DuplicateIndex";
        case ErrorCode::NonIntegerComposition: return "NonIntegerComposition";
        case ErrorCode::BothZero: return "BothZero";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::InfiniteRange: return "InfiniteRange";
        case ErrorCode::NonAffineSumBound: return "NonAffineSumBound";
        case ErrorCode::NonAffineIndex: return "NonAffineIndex";
        case ErrorCode::NonDifferentiableOp: return "NonDifferentiableOp";
        case ErrorCode::NumericDomain: return "NumericDomain";
        case ErrorCode::SyntaxError: return "SyntaxError";
        case ErrorCode::UndeclaredTensor: return "UndeclaredTensor";
    }
    return "Error";
}

std::string to_string(const Integer& v) { return v.str(); }

std::string to_string(const Rational& q)
{
    if (is_integer(q)) return numerator_of(q).str();
    return numerator_of(q).str() + "/" + denominator_of(q).str();
}

std::int64_t to_int64(const Integer& v)
{
    if (v > std::numeric_limits<std::int64_t>::max() || v < std::numeric_limits<std::int64_t>::min())
        throw std::overflow_error("integer does not fit in 64 bits: " + v.str());
    return static_cast<std::int64_t>(v);
}

}  // namespace tad
