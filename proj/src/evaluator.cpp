// SPDX-License-Identifier: Apache-2.0
#include "tad/evaluator.hpp"

#include "tad/reverse_ad.hpp"

#include <json.hpp>

#include <cmath>
#include <functional>
#include <random>
#include <sstream>
#include <unordered_map>

namespace tad {

// ---------------------------------------------------------------- DenseTensor

DenseTensor::DenseTensor(std::vector<std::int64_t> s, double fill) : shape(std::move(s))
{
    data.assign(static_cast<std::size_t>(element_count(shape)), fill);
}

std::size_t DenseTensor::flat(std::span<const std::int64_t> index) const
{
    if (index.size() != shape.size()) throw Error(ErrorCode::ShapeMismatch, "index rank does not match tensor rank");
    std::size_t f = 0;
    for (std::size_t d = 0; d < shape.size(); ++d) {
        if (index[d] < 0 || index[d] >= shape[d])
            throw Error(ErrorCode::OutOfRangeIndexMap, "index " + std::to_string(index[d]) + " outside dimension " +
                                                           std::to_string(d) + " of extent " + std::to_string(shape[d]));
        f = f * static_cast<std::size_t>(shape[d]) + static_cast<std::size_t>(index[d]);
    }
    return f;
}

std::vector<std::int64_t> DenseTensor::unflat(std::size_t flat_index) const
{
    std::vector<std::int64_t> idx(shape.size());
    for (std::size_t d = shape.size(); d-- > 0;) {
        idx[d] = static_cast<std::int64_t>(flat_index % static_cast<std::size_t>(shape[d]));
        flat_index /= static_cast<std::size_t>(shape[d]);
    }
    return idx;
}

namespace {

std::int64_t floor_div(std::int64_t n, std::int64_t d)
{
    std::int64_t q = n / d;
    if ((n % d != 0) && ((n < 0) != (d < 0))) --q;
    return q;
}

std::int64_t ceil_div(std::int64_t n, std::int64_t d) { return -floor_div(-n, d); }

// Affine form with a common positive denominator.
struct CForm {
    std::vector<std::pair<int, std::int64_t>> terms;
    std::int64_t constant = 0;
    std::int64_t den = 1;

    std::int64_t numer(const std::vector<std::int64_t>& vals) const
    {
        std::int64_t acc = constant;
        for (const auto& [slot, c] : terms) acc += c * vals[slot];
        return acc;
    }
};

struct CNode {
    NodeKind kind = NodeKind::Constant;
    BinaryOp bop = BinaryOp::Add;
    UnaryOp uop = UnaryOp::Neg;
    const Node* src = nullptr;
    double value = 0;
    const DenseTensor* tensor = nullptr;
    std::vector<CForm> idx;
    int binder = -1;
    std::vector<CForm> lower, upper;
    CForm cond;
    Relation rel = Relation::EqualZero;
    std::int64_t modulus = 0;
    std::vector<int> kids;
    std::vector<int> free_slots;

    bool cached = false;
    std::vector<std::int64_t> key;
    double cache = 0;
};

}  // namespace

struct ExprEvaluator::Impl {
    std::vector<CNode> nodes;
    std::unordered_map<std::string, int> slots;
    std::vector<std::string> slot_names;
    std::vector<std::int64_t> vals;
    int root = -1;

    int slot(const std::string& name)
    {
        auto [it, inserted] = slots.emplace(name, static_cast<int>(slot_names.size()));
        if (inserted) {
            slot_names.push_back(name);
            vals.push_back(0);
        }
        return it->second;
    }

    CForm form(const AffineForm& f)
    {
        CForm c;
        Integer den = denominator_of(f.constant());
        for (const auto& [s, q] : f.terms()) den = lcm_of(den, denominator_of(q));
        c.den = to_int64(den);
        c.constant = to_int64(numerator_of(f.constant() * Rational(den)));
        for (const auto& [s, q] : f.terms()) c.terms.emplace_back(slot(s.name), to_int64(numerator_of(q * Rational(den))));
        return c;
    }

    int compile(const Expr& e, const TensorEnv& env, std::unordered_map<const Node*, int>& ids)
    {
        if (auto it = ids.find(e.get()); it != ids.end()) return it->second;
        CNode n;
        n.kind = e->kind;
        n.src = e.get();
        for (const auto& s : e->free) n.free_slots.push_back(slot(s.name));
        switch (e->kind) {
            case NodeKind::Constant: n.value = e->value.convert_to<double>(); break;
            case NodeKind::Tensor: {
                auto t = env.find(e->tensor);
                if (t == env.end()) throw Error(ErrorCode::UnknownSymbol, "no value for tensor '" + e->tensor + "'");
                if (t->second.shape.size() != e->indices.size())
                    throw Error(ErrorCode::ShapeMismatch, "tensor '" + e->tensor + "' has rank " +
                                                              std::to_string(t->second.shape.size()));
                n.tensor = &t->second;
                for (const auto& f : e->indices) n.idx.push_back(form(f));
                break;
            }
            case NodeKind::Binary: n.bop = e->binary_op; break;
            case NodeKind::Unary: n.uop = e->unary_op; break;
            case NodeKind::Sum:
                n.binder = slot(e->binder.name);
                for (const auto& f : e->lower.forms) n.lower.push_back(form(f));
                for (const auto& f : e->upper.forms) n.upper.push_back(form(f));
                break;
            case NodeKind::DeltaIf:
                n.cond = form(e->condition.form);
                n.rel = e->condition.relation;
                n.modulus = e->condition.relation == Relation::Divisible ? to_int64(e->condition.modulus) : 0;
                break;
        }
        for (const auto& c : e->children) n.kids.push_back(compile(c, env, ids));
        nodes.push_back(std::move(n));
        int id = static_cast<int>(nodes.size() - 1);
        ids.emplace(e.get(), id);
        return id;
    }

    std::string where(const CNode& n) const
    {
        std::string s;
        for (int slot_id : n.free_slots)
            s += (s.empty() ? "" : ", ") + slot_names[slot_id] + " = " + std::to_string(vals[slot_id]);
        return s.empty() ? "" : " at " + s;
    }

    [[noreturn]] void domain(const CNode& n, const std::string& what) const
    {
        throw Error(ErrorCode::NumericDomain, what + where(n));
    }

    bool holds(const CNode& n) const
    {
        std::int64_t v = n.cond.numer(vals);
        switch (n.rel) {
            case Relation::EqualZero: return v == 0;
            case Relation::NonNegative: return v >= 0;
            case Relation::Divisible: return v % n.modulus == 0;
        }
        return false;
    }

    double eval(int id)
    {
        CNode& n = nodes[id];
        if (n.cached) {
            bool hit = true;
            for (std::size_t k = 0; k < n.free_slots.size() && hit; ++k) hit = vals[n.free_slots[k]] == n.key[k];
            if (hit) return n.cache;
        }
        double v = compute(n);
        n.cached = true;
        n.key.resize(n.free_slots.size());
        for (std::size_t k = 0; k < n.free_slots.size(); ++k) n.key[k] = vals[n.free_slots[k]];
        n.cache = v;
        return v;
    }

    double compute(CNode& n)
    {
        switch (n.kind) {
            case NodeKind::Constant: return n.value;
            case NodeKind::Tensor: {
                std::size_t f = 0;
                const auto& shape = n.tensor->shape;
                for (std::size_t d = 0; d < n.idx.size(); ++d) {
                    std::int64_t i = n.idx[d].numer(vals);
                    if (i < 0 || i >= shape[d])
                        throw Error(ErrorCode::OutOfRangeIndexMap, "element " + std::to_string(i) + " of dimension " +
                                                                       std::to_string(d) + " of '" + n.src->tensor +
                                                                       "' is out of range" + where(n));
                    f = f * static_cast<std::size_t>(shape[d]) + static_cast<std::size_t>(i);
                }
                return n.tensor->data[f];
            }
            case NodeKind::Binary: {
                double l = eval(n.kids[0]);
                double r = eval(n.kids[1]);
                switch (n.bop) {
                    case BinaryOp::Add: return l + r;
                    case BinaryOp::Sub: return l - r;
                    case BinaryOp::Mul: return l * r;
                    case BinaryOp::Div:
                        if (r == 0) domain(n, "division by zero");
                        return l / r;
                    case BinaryOp::Pow:
                        if (l < 0 && std::trunc(r) != r) domain(n, "negative base with non-integer exponent");
                        if (l == 0 && r < 0) domain(n, "zero base with negative exponent");
                        return std::pow(l, r);
                }
                return 0;
            }
            case NodeKind::Unary: {
                double x = eval(n.kids[0]);
                switch (n.uop) {
                    case UnaryOp::Neg: return -x;
                    case UnaryOp::Exp: return std::exp(x);
                    case UnaryOp::Log:
                        if (x <= 0) domain(n, "log of nonpositive value " + std::to_string(x));
                        return std::log(x);
                    case UnaryOp::Sin: return std::sin(x);
                    case UnaryOp::Cos: return std::cos(x);
                    case UnaryOp::Sinh: return std::sinh(x);
                    case UnaryOp::Cosh: return std::cosh(x);
                    case UnaryOp::Sqrt:
                        if (x < 0) domain(n, "sqrt of negative value " + std::to_string(x));
                        return std::sqrt(x);
                }
                return 0;
            }
            case NodeKind::Sum: {
                std::int64_t lo = ceil_div(n.lower[0].numer(vals), n.lower[0].den);
                for (std::size_t i = 1; i < n.lower.size(); ++i)
                    lo = std::max(lo, ceil_div(n.lower[i].numer(vals), n.lower[i].den));
                std::int64_t hi = floor_div(n.upper[0].numer(vals), n.upper[0].den);
                for (std::size_t i = 1; i < n.upper.size(); ++i)
                    hi = std::min(hi, floor_div(n.upper[i].numer(vals), n.upper[i].den));
                const std::int64_t saved = vals[n.binder];
                const int body = n.kids[0];
                double acc = 0;
                for (std::int64_t k = lo; k <= hi; ++k) {
                    vals[n.binder] = k;
                    acc += eval(body);
                }
                vals[n.binder] = saved;
                return acc;
            }
            case NodeKind::DeltaIf: return holds(n) ? eval(n.kids[0]) : eval(n.kids[1]);
        }
        return 0;
    }
};

ExprEvaluator::ExprEvaluator(const Expr& root, const TensorEnv& env) : impl_(std::make_unique<Impl>())
{
    std::unordered_map<const Node*, int> ids;
    impl_->root = impl_->compile(root, env, ids);
}

ExprEvaluator::~ExprEvaluator() = default;

void ExprEvaluator::set(const IndexSymbol& s, std::int64_t value)
{
    auto it = impl_->slots.find(s.name);
    if (it != impl_->slots.end()) impl_->vals[it->second] = value;
}

double ExprEvaluator::evaluate() { return impl_->eval(impl_->root); }

// ---------------------------------------------------------------- tensor level

namespace {

// Calls fn for every index of the box in row-major order.
void for_each_index(const std::vector<std::int64_t>& shape, const std::function<void(const std::vector<std::int64_t>&)>& fn)
{
    if (element_count(shape) == 0) return;
    std::vector<std::int64_t> idx(shape.size(), 0);
    for (;;) {
        fn(idx);
        std::size_t d = shape.size();
        for (;;) {
            if (d == 0) return;
            --d;
            if (++idx[d] < shape[d]) break;
            idx[d] = 0;
        }
    }
}

void check_env(const ElemFuncSpec& spec, const TensorEnv& env)
{
    for (const auto& a : spec.arguments) {
        auto it = env.find(a.name);
        if (it == env.end()) throw Error(ErrorCode::UnknownSymbol, "no value for argument '" + a.name + "'");
        if (it->second.shape != a.shape) throw Error(ErrorCode::ShapeMismatch, "value of '" + a.name + "' has the wrong shape");
    }
}

}  // namespace

DenseTensor evaluate_over_box(const Expr& body, const std::vector<IndexSymbol>& indices,
                              const std::vector<std::int64_t>& shape, const TensorEnv& env)
{
    DenseTensor out(shape);
    ExprEvaluator ev(body, env);
    std::size_t f = 0;
    for_each_index(shape, [&](const std::vector<std::int64_t>& idx) {
        for (std::size_t d = 0; d < idx.size(); ++d) ev.set(indices[d], idx[d]);
        out.data[f++] = ev.evaluate();
    });
    return out;
}

DenseTensor eval_spec(const ElemFuncSpec& spec, const TensorEnv& env)
{
    check_env(spec, env);
    return evaluate_over_box(spec.body, spec.indices, spec.shape, env);
}

DenseTensor eval_adjoint(const ArgumentAdjoint& adj, const TensorEnv& env)
{
    return evaluate_over_box(adj.expr, adj.indices, adj.shape, env);
}

DenseTensor finite_diff_jacobian(const ElemFuncSpec& spec, const TensorEnv& env, const std::string& arg, double h)
{
    if (!(h > 0)) throw Error(ErrorCode::NumericDomain, "finite-difference step must be positive");
    const Argument& a = spec.argument(arg);
    check_env(spec, env);
    TensorEnv work = env;
    DenseTensor& x = work.at(arg);

    std::vector<std::int64_t> shape = spec.shape;
    shape.insert(shape.end(), a.shape.begin(), a.shape.end());
    DenseTensor jac(shape);
    const std::size_t nx = x.size();
    for (std::size_t e = 0; e < nx; ++e) {
        const double orig = x.data[e];
        x.data[e] = orig + h;
        DenseTensor fp = evaluate_over_box(spec.body, spec.indices, spec.shape, work);
        x.data[e] = orig - h;
        DenseTensor fm = evaluate_over_box(spec.body, spec.indices, spec.shape, work);
        x.data[e] = orig;
        for (std::size_t o = 0; o < fp.size(); ++o) jac.data[o * nx + e] = (fp.data[o] - fm.data[o]) / (2 * h);
    }
    return jac;
}

DenseTensor brute_force_adjoint(const ElemFuncSpec& spec, const TensorEnv& env, const DenseTensor& df,
                                const std::string& arg)
{
    const Argument& a = spec.argument(arg);
    check_env(spec, env);
    if (df.shape != spec.shape) throw Error(ErrorCode::ShapeMismatch, "output adjoint has the wrong shape");
    const std::string seed_name = "d" + spec.name;
    TensorEnv work = env;
    work[seed_name] = df;

    std::vector<AffineForm> out_forms;
    for (const auto& s : spec.indices) out_forms.push_back(AffineForm::symbol(s));
    std::vector<AdTarget> targets;
    for (const auto& occ : a.occurrences) targets.push_back({occ.element, occ.context});
    auto deltas = reverse_ad(spec.body, tensor_ref(seed_name, out_forms, TensorRole::Adjoint), targets);

    DenseTensor result(a.shape);
    for (std::size_t o = 0; o < a.occurrences.size(); ++o) {
        const Occurrence& occ = a.occurrences[o];
        ExprEvaluator ev(deltas[o].adjoint, work);
        IndexValues values;
        std::vector<Integer> src(occ.sources.size());
        std::vector<std::int64_t> target(a.shape.size());

        std::function<void(std::size_t)> level = [&](std::size_t c) {
            if (c == occ.context.size()) {
                auto t = occ.map.apply(src);
                for (std::size_t d = 0; d < t.size(); ++d) target[d] = to_int64(t[d]);
                result.at(target) += ev.evaluate();
                return;
            }
            const Node& s = *occ.context[c];
            Integer lo = s.lower.evaluate(values);
            Integer hi = s.upper.evaluate(values);
            const std::size_t pos = spec.indices.size() + c;
            for (Integer k = lo; k <= hi; ++k) {
                values[s.binder] = k;
                src[pos] = k;
                ev.set(s.binder, to_int64(k));
                level(c + 1);
            }
            values.erase(s.binder);
        };
        for_each_index(spec.shape, [&](const std::vector<std::int64_t>& idx) {
            for (std::size_t d = 0; d < idx.size(); ++d) {
                values[spec.indices[d]] = idx[d];
                src[d] = idx[d];
                ev.set(spec.indices[d], idx[d]);
            }
            level(0);
        });
    }
    return result;
}

ErrorStats compare(const DenseTensor& value, const DenseTensor& reference, double tol, double floor)
{
    if (value.shape != reference.shape) throw Error(ErrorCode::ShapeMismatch, "compared tensors differ in shape");
    ErrorStats st;
    double worst = -1;
    for (std::size_t i = 0; i < value.size(); ++i) {
        const double r = reference.data[i];
        const double abs_err = std::abs(value.data[i] - r);
        double score;
        bool ok;
        if (std::abs(r) > floor) {
            score = abs_err / std::abs(r);
            st.max_rel_err = std::max(st.max_rel_err, score);
            ok = score <= tol;
        } else {
            score = abs_err;
            ok = abs_err <= tol;
        }
        if (std::isnan(value.data[i]) || std::isnan(r)) {
            ok = false;
            score = INFINITY;
        }
        st.max_abs_err = std::max(st.max_abs_err, abs_err);
        st.pass = st.pass && ok;
        if (score > worst) {
            worst = score;
            st.worst_index = value.unflat(i);
        }
    }
    return st;
}

// ---------------------------------------------------------------- verification

namespace {

void fill_uniform(DenseTensor& t, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> dist(0.1, 1.0);
    for (auto& v : t.data) v = dist(rng);
}

void merge(CheckResult& into, const ErrorStats& st, int trial)
{
    if (into.worst_trial < 0 || st.max_rel_err > into.max_rel_err ||
        (st.max_rel_err == into.max_rel_err && st.max_abs_err > into.max_abs_err)) {
        into.worst_index = st.worst_index;
        into.worst_trial = trial;
    }
    into.max_abs_err = std::max(into.max_abs_err, st.max_abs_err);
    into.max_rel_err = std::max(into.max_rel_err, st.max_rel_err);
    into.pass = into.pass && st.pass;
}

std::string index_str(const std::vector<std::int64_t>& idx)
{
    std::string s = "[";
    for (std::size_t i = 0; i < idx.size(); ++i) s += (i ? ", " : "") + std::to_string(idx[i]);
    return s + "]";
}

}  // namespace

TensorEnv random_env(const ElemFuncSpec& spec, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    TensorEnv env;
    for (const auto& a : spec.arguments) {
        DenseTensor t(a.shape);
        fill_uniform(t, rng);
        env[a.name] = std::move(t);
    }
    return env;
}

VerifyReport verify(const ElemFuncSpec& spec, const VerifyOptions& opt) { return verify(spec, derive(spec), opt); }

VerifyReport verify(const ElemFuncSpec& spec, const DerivSpec& deriv, const VerifyOptions& opt)
{
    VerifyReport rep;
    rep.function = spec.name;
    rep.trials = opt.trials;

    std::vector<ElemFuncSpec> jacobians;
    for (const auto& a : spec.arguments) {
        jacobians.push_back(derive_jacobian(spec, a.name));
        rep.checks.push_back({a.name, "brute_force", opt.exact_tol});
        rep.checks.push_back({a.name, "finite_diff", opt.tol});
        rep.checks.push_back({a.name, "jacobian", opt.tol});
    }

    std::mt19937_64 rng(opt.seed);
    for (int trial = 0; trial < opt.trials; ++trial) {
        TensorEnv env;
        for (const auto& a : spec.arguments) {
            DenseTensor t(a.shape);
            fill_uniform(t, rng);
            env[a.name] = std::move(t);
        }
        DenseTensor df(spec.shape);
        fill_uniform(df, rng);
        TensorEnv with_seed = env;
        with_seed[deriv.seed_name] = df;

        for (std::size_t p = 0; p < spec.arguments.size(); ++p) {
            const std::string& name = spec.arguments[p].name;
            DenseTensor adj = eval_adjoint(deriv.adjoint(name), with_seed);

            DenseTensor bf = brute_force_adjoint(spec, env, df, name);
            merge(rep.checks[3 * p], compare(adj, bf, opt.exact_tol, opt.floor), trial);

            DenseTensor jac = finite_diff_jacobian(spec, env, name, opt.h);
            DenseTensor contracted(adj.shape);
            const std::size_t nx = contracted.size();
            for (std::size_t o = 0; o < df.size(); ++o)
                for (std::size_t e = 0; e < nx; ++e) contracted.data[e] += df.data[o] * jac.data[o * nx + e];
            merge(rep.checks[3 * p + 1], compare(adj, contracted, opt.tol, opt.floor), trial);

            merge(rep.checks[3 * p + 2], compare(eval_spec(jacobians[p], env), jac, opt.tol, opt.floor), trial);
        }
    }
    return rep;
}

bool VerifyReport::pass() const
{
    for (const auto& c : checks)
        if (!c.pass) return false;
    return true;
}

std::string VerifyReport::text() const
{
    std::ostringstream os;
    os << "verify " << function << " (" << trials << " trials)\n";
    for (const auto& c : checks) {
        os << "  " << c.arg << ' ' << c.check << ": max_abs_err=" << c.max_abs_err << " max_rel_err=" << c.max_rel_err
           << " tol=" << c.tolerance << " worst=" << index_str(c.worst_index) << " trial=" << c.worst_trial << ' '
           << (c.pass ? "PASS" : "FAIL") << '\n';
    }
    os << (pass() ? "PASS" : "FAIL") << '\n';
    return os.str();
}

std::string VerifyReport::json() const
{
    nlohmann::json j;
    j["function"] = function;
    j["trials"] = trials;
    j["pass"] = pass();
    j["checks"] = nlohmann::json::array();
    for (const auto& c : checks) {
        j["checks"].push_back({{"arg", c.arg},
                               {"check", c.check},
                               {"tolerance", c.tolerance},
                               {"max_abs_err", c.max_abs_err},
                               {"max_rel_err", c.max_rel_err},
                               {"worst_index", c.worst_index},
                               {"worst_trial", c.worst_trial},
                               {"pass", c.pass}});
    }
    return j.dump(2);
}

}  // namespace tad
