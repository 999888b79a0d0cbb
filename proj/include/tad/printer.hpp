// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "tad/elem_deriv.hpp"
#include "tad/spec.hpp"

#include <string>

namespace tad {

std::string print_expr(const Expr& e);
std::string print_bound(const RangeBound& b);

/// `f[i; j] = ...`
std::string print_definition(const ElemFuncSpec& spec);

/// Shape declarations for every argument and the output, then the definition.
std::string print_spec(const ElemFuncSpec& spec);

/// `da[da_0; da_1] = ...`
std::string print_adjoint(const ArgumentAdjoint& adj);

/// `Input: ...` followed by one `Derivative of f wrt. x: ...` line per argument.
std::string print_derivation(const DerivSpec& deriv);

std::string print_shape(const std::vector<std::int64_t>& shape);

}  // namespace tad
