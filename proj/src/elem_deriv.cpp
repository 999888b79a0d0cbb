// SPDX-License-Identifier: Apache-2.0
#include "tad/elem_deriv.hpp"

#include "tad/reverse_ad.hpp"

#include <algorithm>
#include <optional>
#include <set>

namespace tad {

namespace {

using Box = std::map<IndexSymbol, std::int64_t>;  // symbol ranges over [0, extent)

AffineForm sym(const IndexSymbol& s) { return AffineForm::symbol(s); }

// Lower bound of f over the box, if f only mentions box symbols.
std::optional<Rational> box_minimum(const AffineForm& f, const Box& box)
{
    Rational m = f.constant();
    for (const auto& [s, c] : f.terms()) {
        auto it = box.find(s);
        if (it == box.end()) return std::nullopt;
        if (c < 0) m += c * Rational(it->second - 1);
    }
    return m;
}

bool nonnegative_on_box(const AffineForm& f, const Box& box)
{
    auto m = box_minimum(f, box);
    return m && *m >= 0;
}

// Keeps forms not made redundant by another kept form over the box.
std::vector<AffineForm> prune_bounds(const std::vector<AffineForm>& forms, BoundDirection dir, const Box& box)
{
    auto dominates = [&](const AffineForm& g, const AffineForm& f) {
        return nonnegative_on_box(dir == BoundDirection::Lower ? g - f : f - g, box);
    };
    std::vector<AffineForm> kept;
    for (const auto& f : forms) {
        if (std::any_of(kept.begin(), kept.end(), [&](const AffineForm& g) { return dominates(g, f); })) continue;
        std::erase_if(kept, [&](const AffineForm& g) { return dominates(f, g); });
        kept.push_back(f);
    }
    return kept;
}

void collect_names(const Expr& e, std::set<std::string>& names)
{
    for (const auto& n : topo_order(e)) {
        for (const auto& s : n->free) names.insert(s.name);
        if (n->kind == NodeKind::Sum) names.insert(n->binder.name);
    }
}

bool prefix_taken(const std::string& prefix, const std::set<std::string>& names)
{
    const std::string p = prefix + "_";
    return std::any_of(names.begin(), names.end(), [&](const std::string& n) { return n.rfind(p, 0) == 0; });
}

std::string free_prefix(std::string prefix, const std::set<std::string>& names)
{
    while (prefix_taken(prefix, names)) prefix = "d" + prefix;
    return prefix;
}

struct Naming {
    std::string prefix;
    std::size_t kernel = 0;
    std::size_t quotient = 0;

    IndexSymbol next_kernel() { return {prefix + "_z" + std::to_string(kernel++), IndexKind::Kernel}; }
    IndexSymbol next_quotient() { return {prefix + "_q" + std::to_string(quotient++), IndexKind::Kernel}; }
};

class OccurrenceDeriver {
public:
    OccurrenceDeriver(const ElemFuncSpec& spec, const Occurrence& occ, const std::vector<IndexSymbol>& beta,
                      const Box& box, Naming& naming)
        : spec_(spec), occ_(occ), beta_(beta), box_(box), naming_(naming)
    {
    }

    OccurrenceDerivation run(const Expr& delta)
    {
        OccurrenceDerivation d;
        d.sources = occ_.sources;
        d.map = occ_.map;
        d.delta = delta;
        d.solve = solve_structure(occ_.map.coeffs);
        if (inside_empty_sum() || !solve(d) || !constrain(d)) {
            d.term = constant(0);
            return d;
        }
        d.term = assemble(d);
        return d;
    }

    bool inside_empty_sum() const
    {
        for (const auto& s : occ_.context)
            if (s->lower.is_constant() && s->upper.is_constant() && s->lower.evaluate({}) > s->upper.evaluate({}))
                return true;
        return false;
    }

private:
    // Cokernel and divisibility conditions and the substitution for the sources.
    bool solve(OccurrenceDerivation& d)
    {
        const auto& sm = d.solve.smith;
        const std::size_t dims = beta_.size();
        const std::size_t nsrc = occ_.sources.size();
        const std::size_t rank = d.solve.rank;

        for (std::size_t r = 0; r < dims; ++r) d.rhs.push_back(sym(beta_[r]) - AffineForm(Rational(occ_.map.offset[r])));
        std::vector<AffineForm> ub(dims);
        for (std::size_t i = 0; i < dims; ++i)
            for (std::size_t r = 0; r < dims; ++r)
                if (sm.U(i, r) != 0) ub[i] += d.rhs[r] * Rational(sm.U(i, r));

        for (std::size_t i = rank; i < dims; ++i)
            if (!add_condition(d, Condition::equal_zero(ub[i]))) return false;

        // Coordinates in the Smith basis: source = V x.
        std::vector<AffineForm> x(nsrc);
        for (std::size_t i = 0; i < rank; ++i) {
            const Integer& s = sm.factor(i);
            if (s == 1) {
                x[i] = ub[i];
                continue;
            }
            if (!add_condition(d, Condition::divisible(ub[i], s))) return false;
            AffineForm q = ub[i] * (Rational(1) / Rational(s));
            if (q.is_constant() && is_integer(q.constant())) {
                x[i] = q;
                continue;
            }
            IndexSymbol t = naming_.next_quotient();
            d.quotient_symbols.push_back(t);
            quotient_bounds_.push_back(q);
            x[i] = sym(t);
        }
        for (std::size_t j = 0; j < d.solve.kernel_dim(); ++j) {
            d.kernel_symbols.push_back(naming_.next_kernel());
            x[rank + j] = sym(d.kernel_symbols.back());
        }

        for (std::size_t j = 0; j < nsrc; ++j) {
            AffineForm f;
            for (std::size_t i = 0; i < nsrc; ++i)
                if (sm.V(j, i) != 0) f += x[i] * Rational(sm.V(j, i));
            d.substitution[occ_.sources[j]] = f;
        }
        return true;
    }

    bool add_condition(OccurrenceDerivation& d, const Condition& c)
    {
        if (auto truth = c.constant_truth()) return *truth;
        if (std::find(d.conditions.begin(), d.conditions.end(), c) == d.conditions.end()) d.conditions.push_back(c);
        return true;
    }

    // Range constraints, rewritten over the kernel parameters and eliminated.
    bool constrain(OccurrenceDerivation& d)
    {
        for (const auto& s : occ_.context) {
            for (const auto& f : s->lower.forms) d.constraints.push_back(sym(s->binder) - f);
            for (const auto& f : s->upper.forms) d.constraints.push_back(f - sym(s->binder));
        }
        for (std::size_t k = 0; k < spec_.indices.size(); ++k) d.constraints.push_back(sym(spec_.indices[k]));
        for (std::size_t k = 0; k < spec_.indices.size(); ++k)
            d.constraints.push_back(AffineForm(Rational(spec_.shape[k] - 1)) - sym(spec_.indices[k]));

        const std::size_t kdim = d.kernel_symbols.size();
        std::vector<std::vector<Rational>> rows;
        std::vector<AffineForm> rhs;
        for (const auto& g : d.constraints) {
            AffineForm h = g.substitute(d.substitution);
            std::vector<Rational> row(kdim);
            AffineForm rest = h;
            bool any = false;
            for (std::size_t j = 0; j < kdim; ++j) {
                row[j] = h.coeff(d.kernel_symbols[j]);
                if (row[j] != 0) {
                    any = true;
                    rest.add_term(d.kernel_symbols[j], -row[j]);
                }
            }
            if (any) {
                rows.push_back(std::move(row));
                rhs.push_back(-rest);
                continue;
            }
            if (rest.is_constant()) {
                if (rest.constant() < 0) return false;
                continue;
            }
            if (nonnegative_on_box(rest, box_)) continue;
            ge_conditions_.push_back(Condition::non_negative(rest));
        }
        std::vector<Condition> unique_ge;
        for (const auto& c : ge_conditions_)
            if (std::find(unique_ge.begin(), unique_ge.end(), c) == unique_ge.end()) unique_ge.push_back(c);
        ge_conditions_ = std::move(unique_ge);

        RatMatrix A(rows.size(), kdim);
        for (std::size_t r = 0; r < rows.size(); ++r)
            for (std::size_t j = 0; j < kdim; ++j) A(r, j) = rows[r][j];
        d.fm = fm_eliminate(A);

        for (std::size_t i = 0; i < kdim; ++i) {
            const FMLevel& lvl = d.fm.levels[i];
            auto forms = [&](const RatMatrix& M, const RatMatrix& hat) {
                std::vector<AffineForm> out;
                for (std::size_t r = 0; r < M.rows(); ++r) {
                    AffineForm f;
                    for (std::size_t c = 0; c < M.cols(); ++c)
                        if (M(r, c) != 0) f += rhs[c] * M(r, c);
                    for (std::size_t t = 0; t < hat.cols(); ++t)
                        if (hat(r, t) != 0) f.add_term(d.kernel_symbols[i + 1 + t], hat(r, t));
                    if (std::find(out.begin(), out.end(), f) == out.end()) out.push_back(std::move(f));
                }
                return out;
            };
            auto lo = prune_bounds(forms(lvl.L, lvl.Lhat), BoundDirection::Lower, box_);
            auto hi = prune_bounds(forms(lvl.H, lvl.Hhat), BoundDirection::Upper, box_);
            if (lo.empty() || hi.empty())
                throw Error(ErrorCode::InfiniteRange, "kernel parameter '" + d.kernel_symbols[i].name + "' of an occurrence of '" +
                                                          occ_.element->tensor + "' is unbounded");
            d.lower.push_back(RangeBound::lower(std::move(lo)));
            d.upper.push_back(RangeBound::upper(std::move(hi)));
        }
        return true;
    }

    Expr assemble(OccurrenceDerivation& d)
    {
        Expr e = substitute_indices(d.delta, d.substitution);
        for (std::size_t i = 0; i < d.kernel_symbols.size(); ++i) e = sum_over(d.kernel_symbols[i], d.lower[i], d.upper[i], e);
        for (auto it = ge_conditions_.rbegin(); it != ge_conditions_.rend(); ++it) e = delta_if(*it, e, constant(0));
        for (std::size_t i = d.quotient_symbols.size(); i-- > 0;)
            e = sum_over(d.quotient_symbols[i], RangeBound::lower({quotient_bounds_[i]}), RangeBound::upper({quotient_bounds_[i]}), e);
        for (auto it = d.conditions.rbegin(); it != d.conditions.rend(); ++it) e = delta_if(*it, e, constant(0));
        d.conditions.insert(d.conditions.end(), ge_conditions_.begin(), ge_conditions_.end());
        return e;
    }

    const ElemFuncSpec& spec_;
    const Occurrence& occ_;
    const std::vector<IndexSymbol>& beta_;
    const Box& box_;
    Naming& naming_;
    std::vector<AffineForm> quotient_bounds_;
    std::vector<Condition> ge_conditions_;
};

struct Parameter {
    IndexSymbol symbol;
    std::int64_t extent;
};

std::vector<ArgumentAdjoint> derive_with_seed(const ElemFuncSpec& spec, const Expr& seed,
                                              const std::vector<Parameter>& params, const std::string* only)
{
    std::vector<AdTarget> targets;
    for (const auto& arg : spec.arguments)
        if (!only || arg.name == *only)
            for (const auto& occ : arg.occurrences) targets.push_back({occ.element, occ.context});
    auto adj = reverse_ad(spec.body, seed, targets);

    std::set<std::string> names;
    collect_names(spec.body, names);
    for (const auto& s : spec.indices) names.insert(s.name);
    for (const auto& p : params) names.insert(p.symbol.name);

    std::vector<ArgumentAdjoint> out;
    std::size_t t = 0;
    for (const auto& arg : spec.arguments) {
        if (only && arg.name != *only) continue;
        ArgumentAdjoint a;
        a.argument = arg.name;
        a.name = "d" + arg.name;
        a.shape = arg.shape;
        Naming naming{free_prefix("d" + arg.name, names)};
        Box box;
        for (const auto& p : params) box[p.symbol] = p.extent;
        for (std::size_t d = 0; d < arg.shape.size(); ++d) {
            a.indices.emplace_back(naming.prefix + "_" + std::to_string(d), IndexKind::Derivative);
            box[a.indices.back()] = arg.shape[d];
        }

        Expr total = constant(0);
        for (const auto& occ : arg.occurrences) {
            OccurrenceDeriver deriver(spec, occ, a.indices, box, naming);
            a.occurrences.push_back(deriver.run(adj[t++].adjoint));
            total = total + a.occurrences.back().term;
        }
        a.expr = total;
        out.push_back(std::move(a));
    }
    return out;
}

std::vector<AffineForm> forms_of(const std::vector<IndexSymbol>& s)
{
    std::vector<AffineForm> out;
    for (const auto& x : s) out.push_back(sym(x));
    return out;
}

}  // namespace

const ArgumentAdjoint& DerivSpec::adjoint(const std::string& argument) const
{
    for (const auto& a : adjoints)
        if (a.argument == argument) return a;
    throw Error(ErrorCode::UnknownSymbol, "no adjoint for '" + argument + "'");
}

LiberatedSpec sum_liberate(const ElemFuncSpec& spec)
{
    LiberatedSpec out;
    out.indices = spec.indices;
    std::set<std::string> used;
    for (const auto& s : spec.indices) used.insert(s.name);

    std::function<Expr(const Expr&)> lib = [&](const Expr& e) -> Expr {
        if (e->kind != NodeKind::Sum) {
            std::vector<Expr> kids;
            bool same = true;
            for (const auto& c : e->children) {
                kids.push_back(lib(c));
                same = same && kids.back() == c;
            }
            return same ? e : with_children(*e, kids);
        }
        IndexSymbol k{e->binder.name, IndexKind::Sum};
        for (int n = 2; used.count(k.name); ++n) k.name = e->binder.name + "_" + std::to_string(n);
        used.insert(k.name);
        out.indices.push_back(k);
        for (const auto& f : e->lower.forms) out.constraints.push_back(sym(k) - f);
        for (const auto& f : e->upper.forms) out.constraints.push_back(f - sym(k));
        Expr body = e->child(0);
        if (k.name != e->binder.name) body = substitute_indices(body, {{e->binder, sym(k)}});
        return lib(body);
    };
    out.body = lib(spec.body);
    return out;
}

DerivSpec derive(const ElemFuncSpec& spec)
{
    DerivSpec d;
    d.source = spec;
    d.seed_name = "d" + spec.name;
    Expr seed = tensor_ref(d.seed_name, forms_of(spec.indices), TensorRole::Adjoint);
    d.adjoints = derive_with_seed(spec, seed, {}, nullptr);
    return d;
}

ElemFuncSpec derive_jacobian(const ElemFuncSpec& spec, const std::string& argument)
{
    const Argument& arg = spec.argument(argument);
    std::set<std::string> names;
    collect_names(spec.body, names);
    for (const auto& s : spec.indices) names.insert(s.name);
    std::string prefix = spec.name;
    while (prefix_taken(prefix, names)) prefix = "j" + prefix;

    std::vector<Parameter> params;
    std::vector<IndexSymbol> primed;
    for (std::size_t d = 0; d < spec.indices.size(); ++d) {
        primed.emplace_back(prefix + "_" + std::to_string(d), IndexKind::Output);
        params.push_back({primed.back(), spec.shape[d]});
    }
    Expr seed = constant(1);
    for (std::size_t d = spec.indices.size(); d-- > 0;)
        seed = delta_if(Condition::equal_zero(sym(spec.indices[d]) - sym(primed[d])), seed, constant(0));

    auto adj = derive_with_seed(spec, seed, params, &arg.name);
    const ArgumentAdjoint& a = adj.front();

    std::vector<IndexSymbol> indices = primed;
    indices.insert(indices.end(), a.indices.begin(), a.indices.end());
    std::vector<std::int64_t> shape = spec.shape;
    shape.insert(shape.end(), arg.shape.begin(), arg.shape.end());
    return build_spec("d" + spec.name + "_d" + argument, shape, indices, spec.declarations(), a.expr);
}

ElemFuncSpec adjoint_as_spec(const DerivSpec& deriv, const std::string& argument)
{
    const ArgumentAdjoint& a = deriv.adjoint(argument);
    Expr body = rewrite(a.expr, [&](const Node& n, const std::vector<Expr>&) -> Expr {
        if (n.kind == NodeKind::Tensor && n.role == TensorRole::Adjoint)
            return tensor_ref(n.tensor, n.indices, TensorRole::Argument);
        return nullptr;
    });
    auto decls = deriv.source.declarations();
    decls.push_back({deriv.seed_name, deriv.source.shape});
    std::vector<IndexSymbol> indices = a.indices;
    return build_spec(a.name, a.shape, indices, decls, body);
}

}  // namespace tad
