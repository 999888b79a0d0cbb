// SPDX-License-Identifier: Apache-2.0
#include "tad/printer.hpp"

namespace tad {

namespace {

constexpr int kAdditive = 1;
constexpr int kMultiplicative = 2;
constexpr int kUnary = 3;
constexpr int kPower = 4;
constexpr int kAtom = 5;

int precedence(const Node& n)
{
    switch (n.kind) {
        case NodeKind::Constant:
            if (!is_integer(n.value)) return kMultiplicative;
            return n.value < 0 ? kUnary : kAtom;
        case NodeKind::Binary:
            switch (n.binary_op) {
                case BinaryOp::Add:
                case BinaryOp::Sub: return kAdditive;
                case BinaryOp::Mul:
                case BinaryOp::Div: return kMultiplicative;
                case BinaryOp::Pow: return kPower;
            }
            return kAtom;
        case NodeKind::Unary: return n.unary_op == UnaryOp::Neg ? kUnary : kAtom;
        default: return kAtom;
    }
}

std::string print(const Expr& e, int min_prec);

std::string tensor(const Node& n)
{
    if (n.indices.empty()) return n.tensor;
    std::string s = n.tensor + "[";
    for (std::size_t i = 0; i < n.indices.size(); ++i) s += (i ? "; " : "") + n.indices[i].str();
    return s + "]";
}

std::string raw(const Expr& e)
{
    const Node& n = *e;
    switch (n.kind) {
        case NodeKind::Constant: return to_string(n.value);
        case NodeKind::Tensor: return tensor(n);
        case NodeKind::Binary: {
            const char* op = to_string(n.binary_op);
            switch (n.binary_op) {
                case BinaryOp::Add:
                case BinaryOp::Sub:
                    return print(n.child(0), kAdditive) + " " + op + " " + print(n.child(1), kMultiplicative);
                case BinaryOp::Mul:
                case BinaryOp::Div:
                    return print(n.child(0), kMultiplicative) + " " + op + " " + print(n.child(1), kUnary);
                case BinaryOp::Pow: return print(n.child(0), kAtom) + " ** " + print(n.child(1), kUnary);
            }
            return {};
        }
        case NodeKind::Unary: {
            if (n.unary_op != UnaryOp::Neg) return std::string(to_string(n.unary_op)) + " (" + print(n.child(0), 0) + ")";
            const Node& c = *n.child(0);
            // A bare minus before a literal would read back as a negative literal.
            if (c.kind == NodeKind::Constant && c.value >= 0) return "-(" + raw(n.child(0)) + ")";
            return "-" + print(n.child(0), kPower);
        }
        case NodeKind::Sum:
            return "sum{" + n.binder.name + "}_" + print_bound(n.lower) + "^" + print_bound(n.upper) + " (" +
                   print(n.child(0), 0) + ")";
        case NodeKind::DeltaIf:
            return "if {" + n.condition.str() + "} then (" + print(n.child(0), 0) + ") else (" + print(n.child(1), 0) + ")";
    }
    return {};
}

std::string print(const Expr& e, int min_prec)
{
    std::string s = raw(e);
    return precedence(*e) < min_prec ? "(" + s + ")" : s;
}

std::string index_list(const std::vector<IndexSymbol>& idx)
{
    if (idx.empty()) return {};
    std::string s = "[";
    for (std::size_t i = 0; i < idx.size(); ++i) s += (i ? "; " : "") + idx[i].name;
    return s + "]";
}

}  // namespace

std::string print_expr(const Expr& e) { return print(e, 0); }

std::string print_bound(const RangeBound& b)
{
    if (b.forms.size() == 1) {
        const AffineForm& f = b.forms[0];
        if (f.is_constant() && is_integer(f.constant()) && f.constant() >= 0) return f.str();
        if (f.constant() == 0 && f.terms().size() == 1 && f.terms().begin()->second == 1) return f.str();
        return "(" + f.str() + ")";
    }
    std::string s = b.direction == BoundDirection::Lower ? "(max [" : "(min [";
    for (std::size_t i = 0; i < b.forms.size(); ++i) s += (i ? "; " : "") + b.forms[i].str();
    return s + "])";
}

std::string print_shape(const std::vector<std::int64_t>& shape)
{
    if (shape.empty()) return "scalar";
    std::string s;
    for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? " x " : "") + std::to_string(shape[i]);
    return s;
}

std::string print_definition(const ElemFuncSpec& spec)
{
    return spec.name + index_list(spec.indices) + " = " + print_expr(spec.body);
}

std::string print_spec(const ElemFuncSpec& spec)
{
    std::string s;
    for (const auto& a : spec.arguments) s += a.name + " : " + print_shape(a.shape) + "\n";
    s += spec.name + " : " + print_shape(spec.shape) + "\n";
    return s + print_definition(spec) + "\n";
}

std::string print_adjoint(const ArgumentAdjoint& adj) { return adj.name + index_list(adj.indices) + " = " + print_expr(adj.expr); }

std::string print_derivation(const DerivSpec& deriv)
{
    std::string s = "Input: " + print_definition(deriv.source) + "\n";
    for (const auto& a : deriv.adjoints)
        s += "Derivative of " + deriv.source.name + " wrt. " + a.argument + ": " + print_adjoint(a) + "\n";
    return s;
}

}  // namespace tad
