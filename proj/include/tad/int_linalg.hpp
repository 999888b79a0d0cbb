// SPDX-License-Identifier: Apache-2.0
#pragma once

// Exact integer linear algebra: Bezout coefficients, Smith normal form and the
// pseudo-inverse / kernel / cokernel parameterization of A x = b over the integers.

#include "tad/matrix.hpp"
#include "tad/numeric.hpp"

#include <cstddef>
#include <span>
#include <variant>
#include <vector>

namespace tad {

struct Bezout {
    Integer gcd;  // always > 0
    Integer x;
    Integer y;  // a*x + b*y == gcd
};

/// Extended Euclid for arbitrary signs. Throws ErrorCode::BothZero for (0, 0).
Bezout extended_gcd(const Integer& a, const Integer& b);

/// S == U * A * V with U, V unimodular, S diagonal with a positive divisibility
/// chain on its first `rank` entries and zeros elsewhere.
struct SmithDecomposition {
    IntMatrix S;
    IntMatrix U;
    IntMatrix V;
    std::size_t rank = 0;

    const Integer& factor(std::size_t i) const { return S(i, i); }
};

/// A zero (or empty) matrix yields rank 0 with identity transforms.
SmithDecomposition smith_normal_form(const IntMatrix& A);

/// All integer solutions of A x = b are x = pinv * b + kernel * z, subject to
/// cokernel * b == 0 and pinv * b integral.
struct LinearSolveResult {
    RatMatrix pinv;      // M x N
    IntMatrix kernel;    // M x (M - R)
    IntMatrix cokernel;  // (N - R) x N
    std::size_t rank = 0;
    SmithDecomposition smith;

    std::size_t kernel_dim() const { return kernel.cols(); }
};

LinearSolveResult solve_structure(const IntMatrix& A);

struct NoSolution {};
struct UniqueSolution {
    std::vector<Integer> x;
};
struct ParametricSolution {
    std::vector<Integer> base;  // pinv * b; the solution set is base + kernel * z
};

using RhsClassification = std::variant<NoSolution, UniqueSolution, ParametricSolution>;

RhsClassification classify_rhs(const LinearSolveResult& res, std::span<const Integer> b);

}  // namespace tad
