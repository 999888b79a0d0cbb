// SPDX-License-Identifier: Apache-2.0
#pragma once

// Closed-form per-element adjoints of element-wise functions: every argument
// occurrence contributes a term with kernel sums, bounds from Fourier-Motzkin
// elimination and integer conditions on the derivative indices.

#include "tad/fourier_motzkin.hpp"
#include "tad/int_linalg.hpp"
#include "tad/spec.hpp"

#include <map>
#include <string>
#include <vector>

namespace tad {

/// Body with every Sum replaced by its body. Binders are appended to the index
/// list (renamed when siblings reuse a name); constraints are forms >= 0.
struct LiberatedSpec {
    Expr body;
    std::vector<IndexSymbol> indices;
    std::vector<AffineForm> constraints;
};

LiberatedSpec sum_liberate(const ElemFuncSpec& spec);

struct OccurrenceDerivation {
    std::vector<IndexSymbol> sources;         // function index followed by context binders
    IndexAffineMap map;
    LinearSolveResult solve;
    std::vector<AffineForm> rhs;              // beta - offset
    std::vector<Condition> conditions;        // outermost first
    std::vector<IndexSymbol> quotient_symbols;
    std::vector<IndexSymbol> kernel_symbols;  // innermost first
    std::vector<AffineForm> constraints;      // range constraints >= 0 over the sources
    FMSystem fm;
    std::vector<RangeBound> lower;            // per kernel symbol
    std::vector<RangeBound> upper;
    std::map<IndexSymbol, AffineForm> substitution;
    Expr delta;  // local adjoint before substitution
    Expr term;   // constant 0 when the occurrence never contributes
};

struct ArgumentAdjoint {
    std::string argument;
    std::string name;  // adjoint tensor name, "d" + argument
    std::vector<IndexSymbol> indices;
    std::vector<std::int64_t> shape;
    Expr expr;
    std::vector<OccurrenceDerivation> occurrences;
};

struct DerivSpec {
    ElemFuncSpec source;
    std::string seed_name;  // adjoint of the function output, "d" + function name
    std::vector<ArgumentAdjoint> adjoints;

    const ArgumentAdjoint& adjoint(const std::string& argument) const;
};

DerivSpec derive(const ElemFuncSpec& spec);

/// Jacobian d f[a'] / d x[b] as a spec over (a', b) with shape f.shape ++ x.shape.
ElemFuncSpec derive_jacobian(const ElemFuncSpec& spec, const std::string& argument);

/// The adjoint of `argument` as a spec over its derivative indices. The output
/// adjoint becomes an ordinary argument so the result can be derived again.
ElemFuncSpec adjoint_as_spec(const DerivSpec& deriv, const std::string& argument);

}  // namespace tad
