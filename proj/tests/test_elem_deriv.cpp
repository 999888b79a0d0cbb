// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support/oracles.hpp"
#include "tad/elem_deriv.hpp"
#include "tad/evaluator.hpp"
#include "tad/parser.hpp"
#include "tad/printer.hpp"

#include <random>

using namespace tad;

namespace {

std::size_t count_kind(const Expr& e, NodeKind kind)
{
    std::size_t n = 0;
    for (const auto& node : topo_order(e)) n += node->kind == kind;
    return n;
}

// Every adjoint against forward-mode dual numbers on a few random inputs.
void check_oracle(const ElemFuncSpec& spec, const DerivSpec& deriv, int trials = 3)
{
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> dist(0.1, 1.0);
    for (int t = 0; t < trials; ++t) {
        TensorEnv env = random_env(spec, 1000 + static_cast<std::uint64_t>(t));
        DenseTensor df(spec.shape);
        for (auto& v : df.data) v = dist(rng);
        TensorEnv with_seed = env;
        with_seed[deriv.seed_name] = df;
        for (const auto& a : spec.arguments) {
            DenseTensor got = eval_adjoint(deriv.adjoint(a.name), with_seed);
            DenseTensor want = tad::testing::forward_mode_adjoint(spec, env, df, a.name);
            ErrorStats st = compare(got, want, 1e-12, 1e-8);
            CAPTURE(a.name);
            CAPTURE(st.max_rel_err);
            CHECK(st.pass);
        }
    }
}

DerivSpec derive_checked(const std::string& text)
{
    ElemFuncSpec spec = parse_spec(text);
    DerivSpec d = derive(spec);
    check_oracle(spec, d);
    return d;
}

}  // namespace

TEST_CASE("element-wise sine: the delta cancels against the output sum")
{
    DerivSpec d = derive_checked("x : 4\nf : 4\nf[i] = sin (x[i])\n");
    const auto& dx = d.adjoint("x");
    CHECK(print_adjoint(dx) == "dx[dx_0] = df[dx_0] * cos (x[dx_0])");
    CHECK(count_kind(dx.expr, NodeKind::Sum) == 0);
    CHECK(count_kind(dx.expr, NodeKind::DeltaIf) == 0);
}

TEST_CASE("an index unused by an argument becomes a sum")
{
    DerivSpec d = derive_checked("x : 3\ny : 3 x 3\nf : 3 x 3\nf[i; j] = x[i] * y[i; j]\n");
    const auto& dx = d.adjoint("x");
    REQUIRE(dx.expr->kind == NodeKind::Sum);
    CHECK(dx.expr->lower.forms[0] == AffineForm(0));
    CHECK(dx.expr->upper.forms[0] == AffineForm(2));
    CHECK(count_kind(d.adjoint("y").expr, NodeKind::Sum) == 0);
    CHECK(count_kind(d.adjoint("y").expr, NodeKind::DeltaIf) == 0);
}

TEST_CASE("a repeated index leaves a delta")
{
    DerivSpec d = derive_checked("x : 3 x 3\nf : 3\nf[i] = x[i; i] ** 3\n");
    const auto& dx = d.adjoint("x");
    REQUIRE(dx.expr->kind == NodeKind::DeltaIf);
    CHECK(dx.expr->condition == Condition::equal_zero(AffineForm::symbol({"dx_0"}) - AffineForm::symbol({"dx_1"})));
    CHECK(count_kind(dx.expr, NodeKind::Sum) == 0);
}

TEST_CASE("matrix product: summation index changes over")
{
    DerivSpec d = derive_checked("x : 2 x 3\ny : 3 x 4\nf : 2 x 4\nf[i; j] = sum{k}_0^2 (x[i; k] * y[k; j])\n");
    CHECK(print_adjoint(d.adjoint("x")) == "dx[dx_0; dx_1] = sum{dx_z0}_0^3 (df[dx_0; dx_z0] * y[dx_1; dx_z0])");
    CHECK(print_adjoint(d.adjoint("y")) == "dy[dy_0; dy_1] = sum{dy_z0}_0^1 (x[dy_z0; dy_0] * df[dy_z0; dy_1])");
}

TEST_CASE("a linear combination of indices is solved and substituted")
{
    DerivSpec d = derive_checked("x : 12\nf : 3 x 4\nf[i; j] = exp (x[4 * i + j])\n");
    const auto& dx = d.adjoint("x");
    REQUIRE(dx.expr->kind == NodeKind::Sum);
    CHECK_FALSE(dx.expr->lower.is_constant());
    CHECK_FALSE(dx.expr->upper.is_constant());
    const std::string s = print_adjoint(dx);
    CHECK(s.find("df[dx_z0; dx_0 + -4 * dx_z0]") != std::string::npos);
    CHECK(s.find("exp (x[dx_0])") != std::string::npos);
}

TEST_CASE("a non-unit Smith factor adds a divisibility condition")
{
    DerivSpec d = derive_checked("x : 7\nf : 4\nf[i] = x[2 * i] ** 2\n");
    const auto& dx = d.adjoint("x");
    REQUIRE(dx.expr->kind == NodeKind::DeltaIf);
    CHECK(dx.expr->condition.relation == Relation::Divisible);
    CHECK(dx.expr->condition.modulus == 2);
    REQUIRE(dx.occurrences.size() == 1);
    CHECK(dx.occurrences[0].quotient_symbols.size() == 1);
}

TEST_CASE("index-dependent sum bounds")
{
    DerivSpec d = derive_checked("x : 4\nf : 4\nf[i] = sum{k}_0^i (x[k])\n");
    CHECK(print_adjoint(d.adjoint("x")) == "dx[dx_0] = sum{dx_z0}_dx_0^3 (df[dx_z0])");
}

TEST_CASE("an argument used both inside and outside a sum")
{
    derive_checked("x : 3 x 3\nf : 3\nf[i] = x[i; 0] * sum{k}_0^2 (x[i; k] * x[k; i])\n");
}

TEST_CASE("nested sums with dependent bounds")
{
    derive_checked("x : 5 x 5\nf : 5\nf[i] = sum{k}_0^i (sum{m}_k^4 (x[k; m] * x[m; i]))\n");
}

TEST_CASE("sum bounds with max and min")
{
    derive_checked("x : 8\nf : 6\nf[i] = sum{k}_(max [0; i + -2])^(min [5; i + 2]) (x[k + 1] ** 2)\n");
}

TEST_CASE("conditionals inside the body")
{
    derive_checked("x : 4\ny : 4\nf : 4\nf[i] = if {i + -1 >= 0} then (x[i] * y[i + -1]) else (exp (y[i])) + "
                   "if {i % 2 = 0} then (x[3 + -i]) else (0)\n");
}

TEST_CASE("rank-zero function and arguments")
{
    DerivSpec d = derive_checked("s : scalar\nx : 3\nf : scalar\nf = s * sum{k}_0^2 (x[k] ** 2)\n");
    CHECK(d.adjoint("s").indices.empty());
    CHECK(print_adjoint(d.adjoint("s")).rfind("ds = ", 0) == 0);
}

TEST_CASE("an argument that never contributes has a zero adjoint")
{
    DerivSpec d = derive_checked("x : 3\nf : 3\nf[i] = sum{k}_2^1 (x[k]) + 1\n");
    CHECK(d.adjoint("x").expr->is_constant(0));
    CHECK(d.source.warnings.size() == 1);
}

TEST_CASE("odd strides do not meet every element")
{
    derive_checked("x : 11\nf : 2 x 2\nf[i; j] = x[3 * i + 6 * j + 1]\n");
    derive_checked("x : 9 x 9\nf : 3 x 3\nf[i; j] = x[2 * i + 2 * j; 2 * i + -2 * j + 4]\n");
}

TEST_CASE("adjoint prefixes avoid names used by the input")
{
    DerivSpec d = derive_checked("x : 3\nf : 3\nf[dx_0] = sum{dx_z0}_0^2 (x[dx_z0] * x[dx_0])\n");
    CHECK(d.adjoint("x").name == "dx");
    CHECK(d.adjoint("x").indices[0].name == "ddx_0");
}

TEST_CASE("sum liberation lists each sum's range constraints")
{
    ElemFuncSpec spec = parse_spec("x : 4\nf : 3\nf[i] = sum{k}_1^(i + 1) (x[k])\n");
    LiberatedSpec lib = sum_liberate(spec);
    REQUIRE(lib.indices.size() == 2);
    CHECK(lib.indices[1].name == "k");
    CHECK(lib.constraints.size() == 2);
    CHECK(lib.body->kind == NodeKind::Tensor);
}

TEST_CASE("Jacobians against forward mode")
{
    const char* texts[] = {
        "x : 3\nf : 3\nf[i] = sin (x[i])\n",
        "x : 2 x 3\ny : 3 x 4\nf : 2 x 4\nf[i; j] = sum{k}_0^2 (x[i; k] * y[k; j])\n",
        "x : 12\nf : 3 x 4\nf[i; j] = exp (x[4 * i + j])\n",
        "x : 7\nf : 4\nf[i] = x[2 * i] ** 2\n",
    };
    for (const char* text : texts) {
        ElemFuncSpec spec = parse_spec(text);
        TensorEnv env = random_env(spec, 5);
        for (const auto& a : spec.arguments) {
            ElemFuncSpec jac = derive_jacobian(spec, a.name);
            CHECK(jac.name == "d" + spec.name + "_d" + a.name);
            CHECK(jac.indices.size() == spec.indices.size() + a.shape.size());
            ErrorStats st = compare(eval_spec(jac, env), tad::testing::forward_mode_jacobian(spec, env, a.name), 1e-12, 1e-8);
            CHECK(st.pass);
        }
    }
}

TEST_CASE("Jacobian parameters avoid clashing with input names")
{
    ElemFuncSpec spec = parse_spec("x : 3\nf : 3\nf[f_0] = x[f_0] ** 2\n");
    ElemFuncSpec jac = derive_jacobian(spec, "x");
    CHECK(jac.indices[0].name != "f_0");
    TensorEnv env = random_env(spec, 1);
    CHECK(compare(eval_spec(jac, env), tad::testing::forward_mode_jacobian(spec, env, "x"), 1e-12, 1e-8).pass);
}

TEST_CASE("an adjoint wrapped as a spec can be differentiated again")
{
    ElemFuncSpec spec = parse_spec("x : 5\nf : 5\nf[i] = x[i] ** 3\n");
    DerivSpec d1 = derive(spec);
    ElemFuncSpec as_spec = adjoint_as_spec(d1, "x");
    CHECK(as_spec.find_argument("df") != nullptr);
    CHECK(as_spec.find_argument("x") != nullptr);
    DerivSpec d2 = derive(as_spec);
    check_oracle(as_spec, d2);
}

TEST_CASE("random specs against forward mode")
{
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 60; ++trial) {
        std::string text = tad::testing::random_spec_text(rng);
        CAPTURE(text);
        ElemFuncSpec spec = parse_spec(text);
        check_oracle(spec, derive(spec), 1);
    }
}
