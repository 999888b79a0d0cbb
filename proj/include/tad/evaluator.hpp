// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "tad/elem_deriv.hpp"
#include "tad/spec.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace tad {

/// Row-major float64 tensor. Rank 0 has shape {} and one element.
struct DenseTensor {
    std::vector<std::int64_t> shape;
    std::vector<double> data;

    DenseTensor() : data(1, 0.0) {}
    explicit DenseTensor(std::vector<std::int64_t> s, double fill = 0.0);

    std::size_t size() const noexcept { return data.size(); }
    std::size_t flat(std::span<const std::int64_t> index) const;
    std::vector<std::int64_t> unflat(std::size_t flat_index) const;
    double& at(std::span<const std::int64_t> index) { return data[flat(index)]; }
    double at(std::span<const std::int64_t> index) const { return data[flat(index)]; }
};

using TensorEnv = std::map<std::string, DenseTensor>;

/// Repeated evaluation of one expression for varying index values. Nodes cache
/// their last value keyed by the values of their free symbols.
class ExprEvaluator {
public:
    ExprEvaluator(const Expr& root, const TensorEnv& env);
    ~ExprEvaluator();
    ExprEvaluator(const ExprEvaluator&) = delete;
    ExprEvaluator& operator=(const ExprEvaluator&) = delete;

    /// Ignored for symbols the expression does not mention.
    void set(const IndexSymbol& s, std::int64_t value);
    double evaluate();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Evaluates `body` at every index of the box spanned by `indices` / `shape`.
DenseTensor evaluate_over_box(const Expr& body, const std::vector<IndexSymbol>& indices,
                              const std::vector<std::int64_t>& shape, const TensorEnv& env);

DenseTensor eval_spec(const ElemFuncSpec& spec, const TensorEnv& env);

/// `env` must hold the output adjoint under DerivSpec::seed_name.
DenseTensor eval_adjoint(const ArgumentAdjoint& adj, const TensorEnv& env);

/// Central differences; the result has shape f.shape ++ x.shape.
DenseTensor finite_diff_jacobian(const ElemFuncSpec& spec, const TensorEnv& env, const std::string& arg, double h);

/// Accumulates the local adjoint of every occurrence over the full index box and
/// all sum ranges into the element it addresses.
DenseTensor brute_force_adjoint(const ElemFuncSpec& spec, const TensorEnv& env, const DenseTensor& df,
                                const std::string& arg);

struct ErrorStats {
    double max_abs_err = 0;
    double max_rel_err = 0;
    std::vector<std::int64_t> worst_index;
    bool pass = true;
};

/// Relative error where |reference| > floor, absolute error elsewhere.
ErrorStats compare(const DenseTensor& value, const DenseTensor& reference, double tol, double floor);

struct CheckResult {
    std::string arg;
    std::string check;  // brute_force, finite_diff or jacobian
    double tolerance = 0;
    double max_abs_err = 0;
    double max_rel_err = 0;
    std::vector<std::int64_t> worst_index;
    int worst_trial = -1;
    bool pass = true;
};

struct VerifyReport {
    std::string function;
    int trials = 0;
    std::vector<CheckResult> checks;

    bool pass() const;
    std::string text() const;
    std::string json() const;
};

struct VerifyOptions {
    int trials = 5;
    double tol = 1e-5;
    std::uint64_t seed = 42;
    double h = 1e-6;
    double floor = 1e-8;
    double exact_tol = 1e-12;
};

/// Random inputs from Uniform(0.1, 1.0). Derived adjoints are compared with the
/// brute-force oracle and with finite differences, derived Jacobians with
/// finite-difference Jacobians.
VerifyReport verify(const ElemFuncSpec& spec, const VerifyOptions& opt = {});
VerifyReport verify(const ElemFuncSpec& spec, const DerivSpec& deriv, const VerifyOptions& opt = {});

/// One Uniform(0.1, 1.0) tensor per argument.
TensorEnv random_env(const ElemFuncSpec& spec, std::uint64_t seed);

}  // namespace tad
