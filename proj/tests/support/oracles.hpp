// SPDX-License-Identifier: Apache-2.0
#pragma once

// Reference implementations used only by the tests. None of them go through
// the Smith decomposition, Fourier-Motzkin or the reverse pass.

#include "tad/evaluator.hpp"
#include "tad/matrix.hpp"
#include "tad/parser.hpp"
#include "tad/spec.hpp"

#include <optional>
#include <random>
#include <string>
#include <vector>

namespace tad::testing {

IntMatrix random_int_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols, int bound);

// Gaussian elimination over the rationals.
std::size_t rational_rank(const RatMatrix& A);
Rational determinant(const RatMatrix& A);

/// x with B x = v when B has full column rank and a solution exists.
std::optional<std::vector<Rational>> solve_full_column_rank(const RatMatrix& B, const std::vector<Rational>& v);

/// Columns of both matrices generate the same integer lattice.
bool same_lattice(const IntMatrix& K1, const IntMatrix& K2);

/// Every x in [-r, r]^M with A x = b.
std::vector<std::vector<Integer>> brute_force_solutions(const IntMatrix& A, const std::vector<Integer>& b, int r);

/// Every x in [-r, r]^M with A x >= b.
std::vector<std::vector<Integer>> brute_force_points(const RatMatrix& A, const std::vector<Rational>& b, int r);

/// Forward-mode dual numbers over the element-wise body: for every output
/// element the full gradient with respect to `arg` is accumulated, weighted by df.
DenseTensor forward_mode_adjoint(const ElemFuncSpec& spec, const TensorEnv& env, const DenseTensor& df,
                                 const std::string& arg);

/// Forward-mode Jacobian of shape f.shape ++ arg.shape.
DenseTensor forward_mode_jacobian(const ElemFuncSpec& spec, const TensorEnv& env, const std::string& arg);

/// One `Derivative of f wrt. x: dx[dx_0; ...] = expr` line, parsed.
struct ListedAdjoint {
    std::string argument;
    std::string name;
    std::vector<IndexSymbol> indices;
    Expr expr;
};

/// References to `seed` are tagged as adjoint tensors, as derive() builds them.
ListedAdjoint parse_listing_line(const std::string& line, const ShapeTable& tensors, const std::string& seed = "");

struct RandomSpecOptions {
    int max_rank = 3;      // of the function
    int max_arg_rank = 2;
    int max_extent = 5;
    int max_coeff = 2;
    bool allow_sum = true;
};

/// Text of a random valid spec: every index map is shifted and every argument
/// shape sized so that all reachable elements are in range.
std::string random_spec_text(std::mt19937_64& rng, const RandomSpecOptions& opt = {});

}  // namespace tad::testing
