// SPDX-License-Identifier: Apache-2.0
#include "tad/expr.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <unordered_map>
#include <unordered_set>

namespace tad {

// ---------------------------------------------------------------- AffineForm

AffineForm AffineForm::symbol(const IndexSymbol& s, const Rational& coeff)
{
    AffineForm f;
    f.add_term(s, coeff);
    return f;
}

Rational AffineForm::coeff(const IndexSymbol& s) const
{
    auto it = terms_.find(s);
    return it == terms_.end() ? Rational(0) : it->second;
}

bool AffineForm::is_integral() const
{
    if (!is_integer(constant_)) return false;
    for (const auto& [s, c] : terms_)
        if (!is_integer(c)) return false;
    return true;
}

void AffineForm::add_term(const IndexSymbol& s, const Rational& coeff)
{
    if (coeff == 0) return;
    auto [it, inserted] = terms_.emplace(s, coeff);
    if (inserted) return;
    it->second += coeff;
    if (it->second == 0) terms_.erase(it);
}

AffineForm AffineForm::operator-() const
{
    AffineForm f = *this;
    f *= Rational(-1);
    return f;
}

AffineForm& AffineForm::operator+=(const AffineForm& o)
{
    constant_ += o.constant_;
    for (const auto& [s, c] : o.terms_) add_term(s, c);
    return *this;
}

AffineForm& AffineForm::operator-=(const AffineForm& o)
{
    constant_ -= o.constant_;
    for (const auto& [s, c] : o.terms_) add_term(s, -c);
    return *this;
}

AffineForm& AffineForm::operator*=(const Rational& k)
{
    if (k == 0) {
        terms_.clear();
        constant_ = 0;
        return *this;
    }
    constant_ *= k;
    for (auto& [s, c] : terms_) c *= k;
    return *this;
}

AffineForm AffineForm::substitute(const std::map<IndexSymbol, AffineForm>& mapping) const
{
    AffineForm out(constant_);
    for (const auto& [s, c] : terms_) {
        auto it = mapping.find(s);
        if (it == mapping.end())
            out.add_term(s, c);
        else
            out += it->second * c;
    }
    return out;
}

Rational AffineForm::evaluate(const IndexValues& values) const
{
    Rational acc = constant_;
    for (const auto& [s, c] : terms_) {
        auto it = values.find(s);
        if (it == values.end()) throw Error(ErrorCode::UnknownSymbol, "no value for index '" + s.name + "'");
        acc += c * Rational(it->second);
    }
    return acc;
}

std::string AffineForm::str() const
{
    std::vector<std::string> parts;
    if (constant_ != 0) parts.push_back(to_string(constant_));
    for (const auto& [s, c] : terms_) {
        if (c == 1)
            parts.push_back(s.name);
        else if (c == -1)
            parts.push_back("-" + s.name);
        else
            parts.push_back(to_string(c) + " * " + s.name);
    }
    if (parts.empty()) return "0";
    std::string out = parts[0];
    for (std::size_t i = 1; i < parts.size(); ++i) out += " + " + parts[i];
    return out;
}

// ---------------------------------------------------------------- bounds, conditions

Integer RangeBound::evaluate(const IndexValues& values) const
{
    if (forms.empty()) throw Error(ErrorCode::InfiniteRange, "range bound without forms");
    Rational best = forms[0].evaluate(values);
    for (std::size_t i = 1; i < forms.size(); ++i) {
        Rational v = forms[i].evaluate(values);
        if (direction == BoundDirection::Lower ? v > best : v < best) best = v;
    }
    return direction == BoundDirection::Lower ? ceil_of(best) : floor_of(best);
}

bool RangeBound::is_constant() const
{
    return std::all_of(forms.begin(), forms.end(), [](const AffineForm& f) { return f.is_constant(); });
}

namespace {

Integer denominator_lcm(const AffineForm& f)
{
    Integer l = denominator_of(f.constant());
    for (const auto& [s, c] : f.terms()) l = lcm_of(l, denominator_of(c));
    return l;
}

Integer content_gcd(const AffineForm& f)
{
    Integer g = numerator_of(f.constant());
    for (const auto& [s, c] : f.terms()) g = gcd_of(g, numerator_of(c));
    return g;
}

AffineForm scaled_integral(const AffineForm& f) { return f * Rational(denominator_lcm(f)); }

}  // namespace

Condition Condition::equal_zero(AffineForm f)
{
    f = scaled_integral(f);
    if (f.is_constant()) {
        if (f.constant() != 0) f = AffineForm(1);
        return {f, Relation::EqualZero, 0};
    }
    Integer g = content_gcd(f);
    if (f.terms().begin()->second < 0) g = -g;
    f *= Rational(1) / Rational(g);
    return {f, Relation::EqualZero, 0};
}

Condition Condition::non_negative(AffineForm f)
{
    f = scaled_integral(f);
    Integer g = content_gcd(f);
    if (g > 1) f *= Rational(1) / Rational(g);
    return {f, Relation::NonNegative, 0};
}

Condition Condition::divisible(AffineForm f, Integer m)
{
    if (m == 0) throw Error(ErrorCode::DimensionMismatch, "divisibility by zero");
    m = abs_of(m);
    Integer l = denominator_lcm(f);
    f *= Rational(l);
    m *= l;
    return {f, Relation::Divisible, m};
}

namespace {

bool relation_holds(Relation rel, const Rational& v, const Integer& m)
{
    switch (rel) {
        case Relation::EqualZero: return v == 0;
        case Relation::NonNegative: return v >= 0;
        case Relation::Divisible: return is_integer(v) && numerator_of(v) % m == 0;
    }
    return false;
}

}  // namespace

bool Condition::holds(const IndexValues& values) const
{
    return relation_holds(relation, form.evaluate(values), modulus);
}

std::optional<bool> Condition::constant_truth() const
{
    if (!form.is_constant()) return std::nullopt;
    return relation_holds(relation, form.constant(), modulus);
}

std::string Condition::str() const
{
    switch (relation) {
        case Relation::EqualZero: return form.str() + " = 0";
        case Relation::NonNegative: return form.str() + " >= 0";
        case Relation::Divisible: return form.str() + " % " + modulus.str() + " = 0";
    }
    return {};
}

const char* to_string(BinaryOp op)
{
    switch (op) {
        case BinaryOp::Add: return "+";
        case BinaryOp::Sub: return "-";
        case BinaryOp::Mul: return "*";
        case BinaryOp::Div: return "/";
        case BinaryOp::Pow: return "**";
    }
    return "?";
}

const char* to_string(UnaryOp op)
{
    switch (op) {
        case UnaryOp::Neg: return "-";
        case UnaryOp::Exp: return "exp";
        case UnaryOp::Log: return "log";
        case UnaryOp::Sin: return "sin";
        case UnaryOp::Cos: return "cos";
        case UnaryOp::Sinh: return "sinh";
        case UnaryOp::Cosh: return "cosh";
        case UnaryOp::Sqrt: return "sqrt";
    }
    return "?";
}

// ---------------------------------------------------------------- interning

namespace {

struct InternTable {
    std::mutex mutex;
    std::unordered_map<std::string, std::weak_ptr<const Node>> nodes;
    std::size_t purge_at = 1024;
    std::uint64_t next_id = 1;
};

InternTable& table()
{
    static InternTable t;
    return t;
}

std::string bound_key(const RangeBound& b)
{
    std::string k = b.direction == BoundDirection::Lower ? "L" : "U";
    for (const auto& f : b.forms) k += "{" + f.str() + "}";
    return k;
}

std::string node_key(const Node& n)
{
    std::string k = std::to_string(static_cast<int>(n.kind)) + "|";
    switch (n.kind) {
        case NodeKind::Constant: k += to_string(n.value); break;
        case NodeKind::Tensor:
            k += n.tensor + (n.role == TensorRole::Adjoint ? "#A" : "#P");
            for (const auto& f : n.indices) k += "[" + f.str() + "]";
            break;
        case NodeKind::Binary: k += to_string(n.binary_op); break;
        case NodeKind::Unary: k += to_string(n.unary_op); break;
        case NodeKind::Sum: k += n.binder.name + bound_key(n.lower) + bound_key(n.upper); break;
        case NodeKind::DeltaIf: k += n.condition.str(); break;
    }
    for (const auto& c : n.children) k += "," + std::to_string(c->id);
    return k;
}

void merge_symbols(std::set<IndexSymbol>& into, const std::vector<IndexSymbol>& from)
{
    into.insert(from.begin(), from.end());
}

void form_symbols(std::set<IndexSymbol>& into, const AffineForm& f)
{
    for (const auto& [s, c] : f.terms()) into.insert(s);
}

void compute_free(Node& n)
{
    std::set<IndexSymbol> s;
    switch (n.kind) {
        case NodeKind::Constant: break;
        case NodeKind::Tensor:
            for (const auto& f : n.indices) form_symbols(s, f);
            break;
        case NodeKind::Binary:
        case NodeKind::Unary:
            for (const auto& c : n.children) merge_symbols(s, c->free);
            break;
        case NodeKind::Sum:
            merge_symbols(s, n.children[0]->free);
            s.erase(n.binder);
            for (const auto& f : n.lower.forms) form_symbols(s, f);
            for (const auto& f : n.upper.forms) form_symbols(s, f);
            break;
        case NodeKind::DeltaIf:
            for (const auto& c : n.children) merge_symbols(s, c->free);
            form_symbols(s, n.condition.form);
            break;
    }
    n.free.assign(s.begin(), s.end());
}

Expr intern(Node&& proto)
{
    compute_free(proto);
    std::string key = node_key(proto);
    auto& t = table();
    std::lock_guard lock(t.mutex);
    auto it = t.nodes.find(key);
    if (it != t.nodes.end()) {
        if (auto live = it->second.lock()) return live;
    }
    proto.id = t.next_id++;
    auto node = std::make_shared<const Node>(std::move(proto));
    t.nodes[key] = node;
    if (t.nodes.size() >= t.purge_at) {
        std::erase_if(t.nodes, [](const auto& kv) { return kv.second.expired(); });
        t.purge_at = std::max<std::size_t>(1024, 2 * t.nodes.size());
    }
    return node;
}

}  // namespace

std::size_t intern_table_size()
{
    auto& t = table();
    std::lock_guard lock(t.mutex);
    std::size_t live = 0;
    for (const auto& [k, w] : t.nodes)
        if (!w.expired()) ++live;
    return live;
}

Expr constant(const Rational& v)
{
    Node n;
    n.kind = NodeKind::Constant;
    n.value = v;
    return intern(std::move(n));
}

Expr tensor_ref(const std::string& name, std::vector<AffineForm> indices, TensorRole role)
{
    for (const auto& f : indices)
        if (!f.is_integral())
            throw Error(ErrorCode::NonIntegerComposition, "index of '" + name + "' is not integral: " + f.str());
    Node n;
    n.kind = NodeKind::Tensor;
    n.tensor = name;
    n.role = role;
    n.indices = std::move(indices);
    return intern(std::move(n));
}

Expr binary(BinaryOp op, Expr lhs, Expr rhs)
{
    switch (op) {
        case BinaryOp::Add:
            if (lhs->is_constant(0)) return rhs;
            if (rhs->is_constant(0)) return lhs;
            break;
        case BinaryOp::Sub:
            if (rhs->is_constant(0)) return lhs;
            break;
        case BinaryOp::Mul:
            if (lhs->is_constant(0) || rhs->is_constant(0)) return constant(0);
            if (lhs->is_constant(1)) return rhs;
            if (rhs->is_constant(1)) return lhs;
            break;
        default: break;
    }
    Node n;
    n.kind = NodeKind::Binary;
    n.binary_op = op;
    n.children = {std::move(lhs), std::move(rhs)};
    return intern(std::move(n));
}

Expr unary(UnaryOp op, Expr operand)
{
    Node n;
    n.kind = NodeKind::Unary;
    n.unary_op = op;
    n.children = {std::move(operand)};
    return intern(std::move(n));
}

Expr sum_over(const IndexSymbol& binder, RangeBound lower, RangeBound upper, Expr body)
{
    if (lower.forms.empty() || upper.forms.empty())
        throw Error(ErrorCode::InfiniteRange, "sum over '" + binder.name + "' needs both bounds");
    lower.direction = BoundDirection::Lower;
    upper.direction = BoundDirection::Upper;
    for (const auto& f : lower.forms)
        if (f.depends_on(binder)) throw Error(ErrorCode::DuplicateIndex, "sum bound refers to its own binder");
    for (const auto& f : upper.forms)
        if (f.depends_on(binder)) throw Error(ErrorCode::DuplicateIndex, "sum bound refers to its own binder");
    Node n;
    n.kind = NodeKind::Sum;
    n.binder = binder;
    n.lower = std::move(lower);
    n.upper = std::move(upper);
    n.children = {std::move(body)};
    return intern(std::move(n));
}

Expr delta_if(const Condition& cond, Expr then_expr, Expr else_expr)
{
    if (then_expr == else_expr) return then_expr;
    if (auto truth = cond.constant_truth()) return *truth ? then_expr : else_expr;
    Node n;
    n.kind = NodeKind::DeltaIf;
    n.condition = cond;
    n.children = {std::move(then_expr), std::move(else_expr)};
    return intern(std::move(n));
}

// ---------------------------------------------------------------- queries

std::set<IndexSymbol> free_symbols(const Expr& e) { return {e->free.begin(), e->free.end()}; }

std::optional<Rational> constant_value(const Expr& e)
{
    switch (e->kind) {
        case NodeKind::Constant: return e->value;
        case NodeKind::Unary: {
            if (e->unary_op != UnaryOp::Neg) return std::nullopt;
            auto v = constant_value(e->child(0));
            if (!v) return std::nullopt;
            return -*v;
        }
        case NodeKind::Binary: {
            auto l = constant_value(e->child(0));
            auto r = constant_value(e->child(1));
            if (!l || !r) return std::nullopt;
            switch (e->binary_op) {
                case BinaryOp::Add: return *l + *r;
                case BinaryOp::Sub: return *l - *r;
                case BinaryOp::Mul: return *l * *r;
                case BinaryOp::Div:
                    if (*r == 0) return std::nullopt;
                    return *l / *r;
                case BinaryOp::Pow: {
                    if (!is_integer(*r) || abs_of(numerator_of(*r)) > 64) return std::nullopt;
                    long k = static_cast<long>(numerator_of(*r));
                    if (k < 0 && *l == 0) return std::nullopt;
                    Rational acc = 1;
                    for (long i = 0; i < (k < 0 ? -k : k); ++i) acc *= *l;
                    return k < 0 ? Rational(1) / acc : acc;
                }
            }
            return std::nullopt;
        }
        default: return std::nullopt;
    }
}

namespace {

void post_order(const Expr& e, std::unordered_set<const Node*>& seen, std::vector<Expr>& out)
{
    if (!seen.insert(e.get()).second) return;
    for (const auto& c : e->children) post_order(c, seen, out);
    out.push_back(e);
}

}  // namespace

std::vector<Expr> topo_order(const Expr& root)
{
    std::unordered_set<const Node*> seen;
    std::vector<Expr> out;
    post_order(root, seen, out);
    return out;
}

std::size_t count_nodes(const Expr& root) { return topo_order(root).size(); }

std::size_t count_nodes(const std::vector<Expr>& roots)
{
    std::unordered_set<const Node*> seen;
    std::vector<Expr> out;
    for (const auto& r : roots) post_order(r, seen, out);
    return out.size();
}

Expr with_children(const Node& n, const std::vector<Expr>& children)
{
    switch (n.kind) {
        case NodeKind::Constant: return constant(n.value);
        case NodeKind::Tensor: return tensor_ref(n.tensor, n.indices, n.role);
        case NodeKind::Binary: return binary(n.binary_op, children[0], children[1]);
        case NodeKind::Unary: return unary(n.unary_op, children[0]);
        case NodeKind::Sum: return sum_over(n.binder, n.lower, n.upper, children[0]);
        case NodeKind::DeltaIf: return delta_if(n.condition, children[0], children[1]);
    }
    return nullptr;
}

namespace {

Expr rewrite_rec(const Expr& e, const std::function<Expr(const Node&, const std::vector<Expr>&)>& fn,
                 std::unordered_map<const Node*, Expr>& memo)
{
    if (auto it = memo.find(e.get()); it != memo.end()) return it->second;
    std::vector<Expr> kids;
    kids.reserve(e->children.size());
    for (const auto& c : e->children) kids.push_back(rewrite_rec(c, fn, memo));
    Expr out = fn(*e, kids);
    if (!out) {
        bool same = true;
        for (std::size_t i = 0; i < kids.size(); ++i) same = same && kids[i] == e->children[i];
        out = same ? e : with_children(*e, kids);
    }
    memo.emplace(e.get(), out);
    return out;
}

Condition substituted(const Condition& c, const std::map<IndexSymbol, AffineForm>& mapping)
{
    AffineForm f = c.form.substitute(mapping);
    switch (c.relation) {
        case Relation::EqualZero: return Condition::equal_zero(f);
        case Relation::NonNegative: return Condition::non_negative(f);
        case Relation::Divisible: return Condition::divisible(f, c.modulus);
    }
    return c;
}

RangeBound substituted(const RangeBound& b, const std::map<IndexSymbol, AffineForm>& mapping)
{
    RangeBound out{b.direction, {}};
    for (const auto& f : b.forms) out.forms.push_back(f.substitute(mapping));
    return out;
}

bool touches(const Node& n, const std::map<IndexSymbol, AffineForm>& mapping)
{
    for (const auto& s : n.free)
        if (mapping.count(s)) return true;
    return false;
}

Expr subst_rec(const Expr& e, const std::map<IndexSymbol, AffineForm>& mapping,
               std::unordered_map<const Node*, Expr>& memo)
{
    if (!touches(*e, mapping)) return e;
    if (auto it = memo.find(e.get()); it != memo.end()) return it->second;

    Expr out;
    switch (e->kind) {
        case NodeKind::Constant: out = e; break;
        case NodeKind::Tensor: {
            std::vector<AffineForm> idx;
            idx.reserve(e->indices.size());
            for (const auto& f : e->indices) {
                AffineForm g = f.substitute(mapping);
                if (!g.is_integral())
                    throw Error(ErrorCode::NonIntegerComposition,
                                "substitution makes index of '" + e->tensor + "' non-integral: " + g.str());
                idx.push_back(std::move(g));
            }
            out = tensor_ref(e->tensor, std::move(idx), e->role);
            break;
        }
        case NodeKind::Binary:
            out = binary(e->binary_op, subst_rec(e->child(0), mapping, memo), subst_rec(e->child(1), mapping, memo));
            break;
        case NodeKind::Unary: out = unary(e->unary_op, subst_rec(e->child(0), mapping, memo)); break;
        case NodeKind::Sum: {
            const Expr& body = e->child(0);
            std::map<IndexSymbol, AffineForm> inner = mapping;
            inner.erase(e->binder);
            for (const auto& s : body->free) {
                auto it = inner.find(s);
                if (it != inner.end() && it->second.depends_on(e->binder))
                    throw Error(ErrorCode::DuplicateIndex,
                                "substitution for '" + s.name + "' would be captured by binder '" + e->binder.name + "'");
            }
            Expr new_body;
            if (inner.size() == mapping.size()) {
                new_body = subst_rec(body, mapping, memo);
            } else {
                std::unordered_map<const Node*, Expr> inner_memo;
                new_body = subst_rec(body, inner, inner_memo);
            }
            out = sum_over(e->binder, substituted(e->lower, mapping), substituted(e->upper, mapping), new_body);
            break;
        }
        case NodeKind::DeltaIf:
            out = delta_if(substituted(e->condition, mapping), subst_rec(e->child(0), mapping, memo),
                           subst_rec(e->child(1), mapping, memo));
            break;
    }
    memo.emplace(e.get(), out);
    return out;
}

}  // namespace

Expr rewrite(const Expr& e, const std::function<Expr(const Node&, const std::vector<Expr>&)>& fn)
{
    std::unordered_map<const Node*, Expr> memo;
    return rewrite_rec(e, fn, memo);
}

Expr substitute_indices(const Expr& e, const std::map<IndexSymbol, AffineForm>& mapping)
{
    std::unordered_map<const Node*, Expr> memo;
    return subst_rec(e, mapping, memo);
}

}  // namespace tad
