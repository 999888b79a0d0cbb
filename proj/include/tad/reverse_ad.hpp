// SPDX-License-Identifier: Apache-2.0
#pragma once

// Reverse accumulation over the expression DAG. Sums are transparent: the
// adjoint of a sum body is the adjoint of the sum, so results depend on the
// enclosing binders as free symbols.

#include "tad/expr.hpp"

#include <vector>

namespace tad {

struct AdTarget {
    Expr element;
    std::vector<Expr> context;  // enclosing Sum nodes, outermost first
};

struct TargetAdjoint {
    Expr element;
    std::vector<Expr> context;
    Expr adjoint;  // constant 0 when the target is not reachable
};

/// One backward pass from `body` seeded with `seed`. Throws NonDifferentiableOp
/// for a power whose exponent is not a constant expression.
std::vector<TargetAdjoint> reverse_ad(const Expr& body, const Expr& seed, const std::vector<AdTarget>& targets);

}  // namespace tad
