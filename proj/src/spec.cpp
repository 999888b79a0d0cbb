// SPDX-License-Identifier: Apache-2.0
#include "tad/spec.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace tad {

std::vector<Integer> IndexAffineMap::apply(std::span<const Integer> source) const
{
    std::vector<Integer> out = coeffs.apply(source);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += offset[i];
    return out;
}

std::int64_t element_count(std::span<const std::int64_t> shape)
{
    std::int64_t n = 1;
    for (auto s : shape) n *= s;
    return n;
}

const Argument* ElemFuncSpec::find_argument(const std::string& arg) const
{
    for (const auto& a : arguments)
        if (a.name == arg) return &a;
    return nullptr;
}

const Argument& ElemFuncSpec::argument(const std::string& arg) const
{
    if (const auto* a = find_argument(arg)) return *a;
    throw Error(ErrorCode::UnknownSymbol, "'" + name + "' has no argument '" + arg + "'");
}

std::vector<ArgumentDecl> ElemFuncSpec::declarations() const
{
    std::vector<ArgumentDecl> out;
    for (const auto& a : arguments) out.push_back({a.name, a.shape});
    return out;
}

namespace {

std::string shape_str(std::span<const std::int64_t> shape)
{
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? ", " : "") + std::to_string(shape[i]);
    return s + "]";
}

std::string tensor_str(const Node& n)
{
    std::string s = n.tensor + "[";
    for (std::size_t i = 0; i < n.indices.size(); ++i) s += (i ? "; " : "") + n.indices[i].str();
    return s + "]";
}

class Builder {
public:
    Builder(ElemFuncSpec& spec) : spec_(spec)
    {
        for (std::size_t i = 0; i < spec_.arguments.size(); ++i) arg_index_[spec_.arguments[i].name] = i;
    }

    void collect()
    {
        std::set<std::string> scope;
        for (const auto& s : spec_.indices) scope.insert(s.name);
        walk(spec_.body, {}, scope);
    }

    void check_ranges()
    {
        IndexValues values;
        std::vector<std::int64_t> idx(spec_.shape.size(), 0);
        if (element_count(spec_.shape) == 0) return;
        for (;;) {
            for (std::size_t d = 0; d < idx.size(); ++d) values[spec_.indices[d]] = idx[d];
            check(spec_.body, values);
            std::size_t d = idx.size();
            while (d > 0) {
                --d;
                if (++idx[d] < spec_.shape[d]) break;
                idx[d] = 0;
                if (d == 0) return;
            }
            if (idx.empty()) return;
        }
    }

private:
    void require_scope(const AffineForm& f, const std::set<std::string>& scope, const std::string& where)
    {
        for (const auto& [s, c] : f.terms())
            if (!scope.count(s.name))
                throw Error(ErrorCode::UnknownSymbol, "index '" + s.name + "' is not in scope in " + where);
    }

    void walk(const Expr& e, const std::vector<Expr>& ctx, const std::set<std::string>& scope)
    {
        std::vector<const Node*> key_ctx;
        for (const auto& s : ctx) key_ctx.push_back(s.get());
        if (!visited_.insert({e.get(), key_ctx}).second) return;

        switch (e->kind) {
            case NodeKind::Constant: return;
            case NodeKind::Tensor: return record(e, ctx, scope);
            case NodeKind::Sum: {
                if (scope.count(e->binder.name))
                    throw Error(ErrorCode::DuplicateIndex, "sum index '" + e->binder.name + "' shadows an index in scope");
                for (const auto& f : e->lower.forms) require_scope(f, scope, "sum bound");
                for (const auto& f : e->upper.forms) require_scope(f, scope, "sum bound");
                if (e->lower.is_constant() && e->upper.is_constant() && e->lower.evaluate({}) > e->upper.evaluate({}))
                    warn("sum over '" + e->binder.name + "' has an empty range and evaluates to 0");
                auto inner_ctx = ctx;
                inner_ctx.push_back(e);
                auto inner_scope = scope;
                inner_scope.insert(e->binder.name);
                walk(e->child(0), inner_ctx, inner_scope);
                return;
            }
            case NodeKind::DeltaIf: require_scope(e->condition.form, scope, "condition"); break;
            default: break;
        }
        for (const auto& c : e->children) walk(c, ctx, scope);
    }

    void warn(const std::string& msg)
    {
        if (std::find(spec_.warnings.begin(), spec_.warnings.end(), msg) == spec_.warnings.end())
            spec_.warnings.push_back(msg);
    }

    void record(const Expr& e, const std::vector<Expr>& ctx, const std::set<std::string>& scope)
    {
        auto it = arg_index_.find(e->tensor);
        if (it == arg_index_.end()) throw Error(ErrorCode::UnknownSymbol, "undeclared tensor '" + e->tensor + "'");
        Argument& arg = spec_.arguments[it->second];
        if (e->indices.size() != arg.shape.size())
            throw Error(ErrorCode::ShapeMismatch, "'" + e->tensor + "' has rank " + std::to_string(arg.shape.size()) +
                                                      " but is indexed with " + std::to_string(e->indices.size()) +
                                                      " indices");
        for (const auto& f : e->indices) require_scope(f, scope, tensor_str(*e));

        for (const auto& occ : arg.occurrences)
            if (occ.element == e && occ.context == ctx) return;

        Occurrence occ;
        occ.element = e;
        occ.context = ctx;
        occ.sources = spec_.indices;
        for (const auto& s : ctx) occ.sources.push_back(s->binder);
        occ.map.coeffs = IntMatrix(e->indices.size(), occ.sources.size());
        occ.map.offset.resize(e->indices.size());
        for (std::size_t r = 0; r < e->indices.size(); ++r) {
            const AffineForm& f = e->indices[r];
            for (std::size_t c = 0; c < occ.sources.size(); ++c) occ.map.coeffs(r, c) = numerator_of(f.coeff(occ.sources[c]));
            occ.map.offset[r] = numerator_of(f.constant());
        }
        arg.occurrences.push_back(std::move(occ));
    }

    void check(const Expr& e, IndexValues& values)
    {
        std::vector<Integer> key;
        key.reserve(e->free.size());
        for (const auto& s : e->free) key.push_back(values.at(s));
        if (!checked_.insert({e.get(), key}).second) return;

        switch (e->kind) {
            case NodeKind::Constant: return;
            case NodeKind::Tensor: {
                const Argument& arg = spec_.arguments[arg_index_.at(e->tensor)];
                for (std::size_t d = 0; d < e->indices.size(); ++d) {
                    Rational v = e->indices[d].evaluate(values);
                    if (v < 0 || v >= arg.shape[d]) {
                        std::string at;
                        for (const auto& s : e->free) at += (at.empty() ? "" : ", ") + s.name + " = " + values.at(s).str();
                        throw Error(ErrorCode::OutOfRangeIndexMap,
                                    "index map " + tensor_str(*e) + " reaches " + to_string(v) + " in dimension " +
                                        std::to_string(d) + " outside [0, " + std::to_string(arg.shape[d] - 1) +
                                        "] of shape " + shape_str(arg.shape) + (at.empty() ? "" : " at " + at));
                    }
                }
                return;
            }
            case NodeKind::Sum: {
                Integer lo = e->lower.evaluate(values);
                Integer hi = e->upper.evaluate(values);
                for (Integer k = lo; k <= hi; ++k) {
                    values[e->binder] = k;
                    check(e->child(0), values);
                }
                values.erase(e->binder);
                return;
            }
            case NodeKind::DeltaIf:
                check(e->condition.holds(values) ? e->child(0) : e->child(1), values);
                return;
            default:
                for (const auto& c : e->children) check(c, values);
        }
    }

    ElemFuncSpec& spec_;
    std::map<std::string, std::size_t> arg_index_;
    std::set<std::pair<const Node*, std::vector<const Node*>>> visited_;
    std::set<std::pair<const Node*, std::vector<Integer>>> checked_;
};

}  // namespace

ElemFuncSpec build_spec(std::string name, std::vector<std::int64_t> shape, std::vector<IndexSymbol> indices,
                        std::vector<ArgumentDecl> args, Expr body)
{
    if (!body) throw Error(ErrorCode::UnknownSymbol, "function '" + name + "' has no body");
    if (shape.size() != indices.size())
        throw Error(ErrorCode::ShapeMismatch, "'" + name + "' has " + std::to_string(indices.size()) +
                                                  " indices but shape " + shape_str(shape));
    for (auto s : shape)
        if (s <= 0) throw Error(ErrorCode::ShapeMismatch, "shape of '" + name + "' must be positive: " + shape_str(shape));

    std::set<std::string> seen;
    for (auto& s : indices) {
        s.kind = IndexKind::Output;
        if (!seen.insert(s.name).second) throw Error(ErrorCode::DuplicateIndex, "index '" + s.name + "' repeated in '" + name + "'");
    }

    ElemFuncSpec spec;
    spec.name = std::move(name);
    spec.shape = std::move(shape);
    spec.indices = std::move(indices);
    spec.body = std::move(body);

    std::set<std::string> arg_names;
    for (auto& a : args) {
        if (!arg_names.insert(a.name).second) throw Error(ErrorCode::DuplicateIndex, "argument '" + a.name + "' declared twice");
        for (auto s : a.shape)
            if (s <= 0)
                throw Error(ErrorCode::ShapeMismatch, "shape of '" + a.name + "' must be positive: " + shape_str(a.shape));
        spec.arguments.push_back({std::move(a.name), std::move(a.shape), {}});
    }

    for (const auto& s : spec.body->free)
        if (!seen.count(s.name)) throw Error(ErrorCode::UnknownSymbol, "index '" + s.name + "' is not an index of '" + spec.name + "'");

    Builder b(spec);
    b.collect();
    b.check_ranges();
    return spec;
}

}  // namespace tad
