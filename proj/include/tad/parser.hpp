// SPDX-License-Identifier: Apache-2.0
#pragma once

// Text format:
//
//   # comment
//   a : 3 x 5
//   f : 3 x 4
//   f[i; j] = exp (-sum{k}_0^4 (a[i; k] * a[j; k]))
//
// Statements end at a newline outside brackets. `scalar` declares rank 0.

#include "tad/spec.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace tad {

using ShapeTable = std::map<std::string, std::vector<std::int64_t>>;

/// Every declared tensor other than the function itself becomes an argument, in
/// declaration order.
ElemFuncSpec parse_spec(const std::string& text);
ElemFuncSpec parse_spec_file(const std::string& path);

/// A single expression over the given tensors with `free` index symbols in scope.
Expr parse_expression(const std::string& text, const ShapeTable& tensors, const std::vector<IndexSymbol>& free);

}  // namespace tad
