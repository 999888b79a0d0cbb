// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "tad/expr.hpp"
#include "tad/matrix.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace tad {

/// argument index = coeffs * source + offset
struct IndexAffineMap {
    IntMatrix coeffs;
    std::vector<Integer> offset;

    std::vector<Integer> apply(std::span<const Integer> source) const;
    friend bool operator==(const IndexAffineMap&, const IndexAffineMap&) = default;
};

/// One tensor element node as seen from one chain of enclosing sums.
struct Occurrence {
    Expr element;
    std::vector<Expr> context;         // enclosing Sum nodes, outermost first
    std::vector<IndexSymbol> sources;  // output indices, then context binders
    IndexAffineMap map;
};

struct ArgumentDecl {
    std::string name;
    std::vector<std::int64_t> shape;
};

struct Argument {
    std::string name;
    std::vector<std::int64_t> shape;
    std::vector<Occurrence> occurrences;
};

struct ElemFuncSpec {
    std::string name;
    std::vector<std::int64_t> shape;
    std::vector<IndexSymbol> indices;
    std::vector<Argument> arguments;
    Expr body;
    std::vector<std::string> warnings;

    const Argument* find_argument(const std::string& arg) const;
    const Argument& argument(const std::string& arg) const;
    std::vector<ArgumentDecl> declarations() const;
};

/// Validates names, ranks and scopes, collects occurrences and checks that every
/// index map stays inside its argument's shape over all reachable index values.
ElemFuncSpec build_spec(std::string name, std::vector<std::int64_t> shape, std::vector<IndexSymbol> indices,
                        std::vector<ArgumentDecl> args, Expr body);

std::int64_t element_count(std::span<const std::int64_t> shape);

}  // namespace tad
