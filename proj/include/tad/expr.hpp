// SPDX-License-Identifier: Apache-2.0
#pragma once

// Immutable, hash-consed scalar expression DAG over tensor elements, index
// symbols, sums and index-conditional selection.

#include "tad/error.hpp"
#include "tad/numeric.hpp"

#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace tad {

enum class IndexKind { Output, Sum, Derivative, Kernel };

/// Identity is the name; the kind is informational.
struct IndexSymbol {
    std::string name;
    IndexKind kind = IndexKind::Output;

    IndexSymbol() = default;
    IndexSymbol(std::string n, IndexKind k = IndexKind::Output) : name(std::move(n)), kind(k) {}

    friend bool operator==(const IndexSymbol& a, const IndexSymbol& b) { return a.name == b.name; }
    friend std::strong_ordering operator<=>(const IndexSymbol& a, const IndexSymbol& b) { return a.name <=> b.name; }
};

using IndexValues = std::map<IndexSymbol, Integer>;

/// sum_k coeff_k * sym_k + constant. Zero coefficients are never stored.
class AffineForm {
public:
    AffineForm() = default;
    AffineForm(Rational constant) : constant_(std::move(constant)) {}
    AffineForm(int constant) : constant_(constant) {}

    static AffineForm symbol(const IndexSymbol& s, const Rational& coeff = 1);

    const std::map<IndexSymbol, Rational>& terms() const noexcept { return terms_; }
    const Rational& constant() const noexcept { return constant_; }
    Rational coeff(const IndexSymbol& s) const;

    bool is_constant() const noexcept { return terms_.empty(); }
    /// All coefficients and the constant are integers.
    bool is_integral() const;
    bool depends_on(const IndexSymbol& s) const { return terms_.count(s) != 0; }

    void add_term(const IndexSymbol& s, const Rational& coeff);

    AffineForm operator-() const;
    AffineForm& operator+=(const AffineForm& o);
    AffineForm& operator-=(const AffineForm& o);
    AffineForm& operator*=(const Rational& k);
    friend AffineForm operator+(AffineForm a, const AffineForm& b) { return a += b; }
    friend AffineForm operator-(AffineForm a, const AffineForm& b) { return a -= b; }
    friend AffineForm operator*(AffineForm a, const Rational& k) { return a *= k; }
    friend AffineForm operator*(const Rational& k, AffineForm a) { return a *= k; }

    /// Replaces symbols present in `mapping`; others are kept.
    AffineForm substitute(const std::map<IndexSymbol, AffineForm>& mapping) const;
    Rational evaluate(const IndexValues& values) const;

    /// Canonical text: constant first, then terms in name order, joined by " + ".
    std::string str() const;

    friend bool operator==(const AffineForm& a, const AffineForm& b)
    {
        return a.constant_ == b.constant_ && a.terms_ == b.terms_;
    }

private:
    std::map<IndexSymbol, Rational> terms_;
    Rational constant_ = 0;
};

enum class BoundDirection { Lower, Upper };

/// Lower bounds evaluate to ceil(max forms), upper bounds to floor(min forms).
struct RangeBound {
    BoundDirection direction = BoundDirection::Lower;
    std::vector<AffineForm> forms;

    static RangeBound lower(std::vector<AffineForm> forms) { return {BoundDirection::Lower, std::move(forms)}; }
    static RangeBound upper(std::vector<AffineForm> forms) { return {BoundDirection::Upper, std::move(forms)}; }

    Integer evaluate(const IndexValues& values) const;
    bool is_constant() const;

    friend bool operator==(const RangeBound&, const RangeBound&) = default;
};

enum class Relation { EqualZero, NonNegative, Divisible };

/// form = 0, form >= 0 or form % modulus = 0, always over integer coefficients.
struct Condition {
    AffineForm form;
    Relation relation = Relation::EqualZero;
    Integer modulus = 0;

    static Condition equal_zero(AffineForm f);
    static Condition non_negative(AffineForm f);
    static Condition divisible(AffineForm f, Integer m);

    bool holds(const IndexValues& values) const;
    /// Set when the form has no symbols.
    std::optional<bool> constant_truth() const;
    std::string str() const;

    friend bool operator==(const Condition&, const Condition&) = default;
};

enum class NodeKind { Constant, Tensor, Binary, Unary, Sum, DeltaIf };
enum class BinaryOp { Add, Sub, Mul, Div, Pow };
enum class UnaryOp { Neg, Exp, Log, Sin, Cos, Sinh, Cosh, Sqrt };
enum class TensorRole { Argument, Adjoint };

const char* to_string(BinaryOp op);
const char* to_string(UnaryOp op);

struct Node;
using Expr = std::shared_ptr<const Node>;

/// Only the fields belonging to `kind` are meaningful.
struct Node {
    NodeKind kind = NodeKind::Constant;
    std::uint64_t id = 0;

    Rational value;  // Constant

    std::string tensor;  // Tensor
    TensorRole role = TensorRole::Argument;
    std::vector<AffineForm> indices;

    BinaryOp binary_op = BinaryOp::Add;
    UnaryOp unary_op = UnaryOp::Neg;

    IndexSymbol binder;  // Sum
    RangeBound lower;
    RangeBound upper;

    Condition condition;  // DeltaIf

    // Binary: lhs, rhs. Unary: operand. Sum: body. DeltaIf: then, else.
    std::vector<Expr> children;

    std::vector<IndexSymbol> free;  // sorted by name

    const Expr& child(std::size_t i) const { return children[i]; }
    bool is_constant(const Rational& v) const { return kind == NodeKind::Constant && value == v; }
};

Expr constant(const Rational& v);
Expr tensor_ref(const std::string& name, std::vector<AffineForm> indices, TensorRole role = TensorRole::Argument);
Expr binary(BinaryOp op, Expr lhs, Expr rhs);
Expr unary(UnaryOp op, Expr operand);
Expr sum_over(const IndexSymbol& binder, RangeBound lower, RangeBound upper, Expr body);
Expr delta_if(const Condition& cond, Expr then_expr, Expr else_expr);

inline Expr operator+(Expr a, Expr b) { return binary(BinaryOp::Add, std::move(a), std::move(b)); }
inline Expr operator-(Expr a, Expr b) { return binary(BinaryOp::Sub, std::move(a), std::move(b)); }
inline Expr operator*(Expr a, Expr b) { return binary(BinaryOp::Mul, std::move(a), std::move(b)); }
inline Expr operator/(Expr a, Expr b) { return binary(BinaryOp::Div, std::move(a), std::move(b)); }
inline Expr operator-(Expr a) { return unary(UnaryOp::Neg, std::move(a)); }
inline Expr pow(Expr a, Expr b) { return binary(BinaryOp::Pow, std::move(a), std::move(b)); }
inline Expr exp(Expr a) { return unary(UnaryOp::Exp, std::move(a)); }
inline Expr log(Expr a) { return unary(UnaryOp::Log, std::move(a)); }
inline Expr sin(Expr a) { return unary(UnaryOp::Sin, std::move(a)); }
inline Expr cos(Expr a) { return unary(UnaryOp::Cos, std::move(a)); }
inline Expr sinh(Expr a) { return unary(UnaryOp::Sinh, std::move(a)); }
inline Expr cosh(Expr a) { return unary(UnaryOp::Cosh, std::move(a)); }
inline Expr sqrt(Expr a) { return unary(UnaryOp::Sqrt, std::move(a)); }

/// Symbols not bound by an enclosing Sum.
std::set<IndexSymbol> free_symbols(const Expr& e);

/// Value of a subtree built only from constants and arithmetic, if any.
std::optional<Rational> constant_value(const Expr& e);

/// Unique nodes in post order (children before parents).
std::vector<Expr> topo_order(const Expr& root);
std::size_t count_nodes(const Expr& root);
std::size_t count_nodes(const std::vector<Expr>& roots);

/// Replaces free index symbols by affine forms, respecting Sum binders.
/// Throws NonIntegerComposition if a tensor index position becomes non-integral.
Expr substitute_indices(const Expr& e, const std::map<IndexSymbol, AffineForm>& mapping);

/// Bottom-up rebuild. `fn` receives the original node and its rebuilt children
/// and returns a replacement; returning nullptr rebuilds the node unchanged.
Expr rewrite(const Expr& e, const std::function<Expr(const Node&, const std::vector<Expr>&)>& fn);

/// Rebuilds `n` with new children and the same payload.
Expr with_children(const Node& n, const std::vector<Expr>& children);

/// Live entries in the global intern table.
std::size_t intern_table_size();

}  // namespace tad
