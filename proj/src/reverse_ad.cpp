// SPDX-License-Identifier: Apache-2.0
#include "tad/reverse_ad.hpp"

#include <functional>
#include <map>
#include <set>

namespace tad {

namespace {

using ContextKey = std::vector<const Node*>;

struct Instance {
    Expr node;
    std::size_t ctx;  // index into the context table

    friend bool operator<(const Instance& a, const Instance& b)
    {
        return std::pair(a.node.get(), a.ctx) < std::pair(b.node.get(), b.ctx);
    }
};

class Backward {
public:
    std::size_t context_id(const std::vector<Expr>& ctx)
    {
        ContextKey key;
        for (const auto& s : ctx) key.push_back(s.get());
        auto [it, inserted] = ids_.emplace(key, contexts_.size());
        if (inserted) contexts_.push_back(ctx);
        return it->second;
    }

    void order(const Instance& inst, std::set<Instance>& seen, std::vector<Instance>& out)
    {
        if (!seen.insert(inst).second) return;
        const Node& n = *inst.node;
        if (n.kind == NodeKind::Sum) {
            auto inner = contexts_[inst.ctx];
            inner.push_back(inst.node);
            order({n.child(0), context_id(inner)}, seen, out);
        } else {
            for (const auto& c : n.children) order({c, inst.ctx}, seen, out);
        }
        out.push_back(inst);
    }

    void add(const Instance& inst, Expr term) { terms_[inst].push_back(std::move(term)); }

    Expr total(const Instance& inst) const
    {
        auto it = terms_.find(inst);
        if (it == terms_.end()) return nullptr;
        Expr acc = it->second[0];
        for (std::size_t i = 1; i < it->second.size(); ++i) acc = acc + it->second[i];
        return acc;
    }

    void propagate(const Instance& inst, const Expr& a)
    {
        const Node& n = *inst.node;
        const std::size_t ctx = inst.ctx;
        switch (n.kind) {
            case NodeKind::Constant:
            case NodeKind::Tensor: return;
            case NodeKind::Sum: {
                auto inner = contexts_[ctx];
                inner.push_back(inst.node);
                add({n.child(0), context_id(inner)}, a);
                return;
            }
            case NodeKind::DeltaIf:
                add({n.child(0), ctx}, delta_if(n.condition, a, constant(0)));
                add({n.child(1), ctx}, delta_if(n.condition, constant(0), a));
                return;
            case NodeKind::Binary: return binary_rule(n, ctx, a);
            case NodeKind::Unary: return unary_rule(inst, a);
        }
    }

private:
    void binary_rule(const Node& n, std::size_t ctx, const Expr& a)
    {
        const Expr& l = n.child(0);
        const Expr& r = n.child(1);
        switch (n.binary_op) {
            case BinaryOp::Add:
                add({l, ctx}, a);
                add({r, ctx}, a);
                return;
            case BinaryOp::Sub:
                add({l, ctx}, a);
                add({r, ctx}, guarded(a, [](const Expr& g) { return -g; }));
                return;
            case BinaryOp::Mul:
                add({l, ctx}, guarded(a, [&](const Expr& g) { return g * r; }));
                add({r, ctx}, guarded(a, [&](const Expr& g) { return l * g; }));
                return;
            case BinaryOp::Div:
                add({l, ctx}, guarded(a, [&](const Expr& g) { return g / r; }));
                add({r, ctx}, guarded(a, [&](const Expr& g) { return -(g * l / (r * r)); }));
                return;
            case BinaryOp::Pow:
                if (!constant_value(r))
                    throw Error(ErrorCode::NonDifferentiableOp, "power with a non-constant exponent");
                add({l, ctx}, guarded(a, [&](const Expr& g) { return g * r * pow(l, r - constant(1)); }));
                return;
        }
    }

    void unary_rule(const Instance& inst, const Expr& a)
    {
        const Node& n = *inst.node;
        const Expr& x = n.child(0);
        const Instance child{x, inst.ctx};
        const Expr& self = inst.node;
        std::function<Expr(const Expr&)> rule;
        switch (n.unary_op) {
            case UnaryOp::Neg: rule = [](const Expr& g) { return -g; }; break;
            case UnaryOp::Exp: rule = [&](const Expr& g) { return g * self; }; break;
            case UnaryOp::Log: rule = [&](const Expr& g) { return g / x; }; break;
            case UnaryOp::Sin: rule = [&](const Expr& g) { return g * cos(x); }; break;
            case UnaryOp::Cos: rule = [&](const Expr& g) { return -(g * sin(x)); }; break;
            case UnaryOp::Sinh: rule = [&](const Expr& g) { return g * cosh(x); }; break;
            case UnaryOp::Cosh: rule = [&](const Expr& g) { return g * sinh(x); }; break;
            case UnaryOp::Sqrt: rule = [&](const Expr& g) { return g / (constant(2) * self); }; break;
        }
        add(child, guarded(a, rule));
    }

    // Keeps branch guards outermost so that operands living under a guard are
    // only evaluated where the guard holds.
    static bool has_guard(const Expr& a)
    {
        if (a->kind == NodeKind::DeltaIf) return a->child(0)->is_constant(0) || a->child(1)->is_constant(0);
        if (a->kind == NodeKind::Binary && a->binary_op == BinaryOp::Add) return has_guard(a->child(0)) || has_guard(a->child(1));
        return false;
    }

    static Expr guarded(const Expr& a, const std::function<Expr(const Expr&)>& rule)
    {
        if (!has_guard(a)) return rule(a);
        if (a->kind == NodeKind::Binary) return guarded(a->child(0), rule) + guarded(a->child(1), rule);
        if (a->child(1)->is_constant(0)) return delta_if(a->condition, guarded(a->child(0), rule), constant(0));
        return delta_if(a->condition, constant(0), guarded(a->child(1), rule));
    }

    std::map<ContextKey, std::size_t> ids_;
    std::vector<std::vector<Expr>> contexts_;
    std::map<Instance, std::vector<Expr>> terms_;
};

}  // namespace

std::vector<TargetAdjoint> reverse_ad(const Expr& body, const Expr& seed, const std::vector<AdTarget>& targets)
{
    Backward bw;
    const Instance root{body, bw.context_id({})};
    std::set<Instance> seen;
    std::vector<Instance> order;
    bw.order(root, seen, order);

    bw.add(root, seed);
    std::map<Instance, Expr> done;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Expr a = bw.total(*it);
        if (!a) continue;
        done.emplace(*it, a);
        bw.propagate(*it, a);
    }

    std::vector<TargetAdjoint> out;
    for (const auto& t : targets) {
        Instance inst{t.element, bw.context_id(t.context)};
        auto it = done.find(inst);
        out.push_back({t.element, t.context, it == done.end() ? constant(0) : it->second});
    }
    return out;
}

}  // namespace tad
