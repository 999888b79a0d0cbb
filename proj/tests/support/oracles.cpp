// SPDX-License-Identifier: Apache-2.0
#include "oracles.hpp"

#include <cmath>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace tad::testing {

IntMatrix random_int_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols, int bound)
{
    std::uniform_int_distribution<int> dist(-bound, bound);
    IntMatrix A(rows, cols);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) A(r, c) = dist(rng);
    return A;
}

namespace {

// Row echelon form in place; returns pivot columns.
std::vector<std::size_t> eliminate(RatMatrix& A, Rational* det_sign = nullptr)
{
    std::vector<std::size_t> pivots;
    std::size_t row = 0;
    for (std::size_t col = 0; col < A.cols() && row < A.rows(); ++col) {
        std::size_t p = row;
        while (p < A.rows() && A(p, col) == 0) ++p;
        if (p == A.rows()) continue;
        if (p != row) {
            for (std::size_t c = 0; c < A.cols(); ++c) std::swap(A(p, c), A(row, c));
            if (det_sign) *det_sign = -*det_sign;
        }
        for (std::size_t r = row + 1; r < A.rows(); ++r) {
            if (A(r, col) == 0) continue;
            Rational f = A(r, col) / A(row, col);
            for (std::size_t c = col; c < A.cols(); ++c) A(r, c) -= f * A(row, c);
        }
        pivots.push_back(col);
        ++row;
    }
    return pivots;
}

}  // namespace

std::size_t rational_rank(const RatMatrix& A)
{
    RatMatrix W = A;
    return eliminate(W).size();
}

Rational determinant(const RatMatrix& A)
{
    RatMatrix W = A;
    Rational sign = 1;
    auto piv = eliminate(W, &sign);
    if (piv.size() < A.rows()) return 0;
    Rational d = sign;
    for (std::size_t i = 0; i < A.rows(); ++i) d *= W(i, i);
    return d;
}

std::optional<std::vector<Rational>> solve_full_column_rank(const RatMatrix& B, const std::vector<Rational>& v)
{
    const std::size_t n = B.rows(), m = B.cols();
    RatMatrix W(n, m + 1);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < m; ++c) W(r, c) = B(r, c);
        W(r, m) = v[r];
    }
    auto piv = eliminate(W);
    if (!piv.empty() && piv.back() == m) return std::nullopt;  // inconsistent
    if (piv.size() != m) return std::nullopt;
    std::vector<Rational> x(m);
    for (std::size_t i = m; i-- > 0;) {
        Rational acc = W(i, m);
        for (std::size_t c = i + 1; c < m; ++c) acc -= W(i, c) * x[c];
        x[i] = acc / W(i, i);
    }
    return x;
}

namespace {

bool columns_in_lattice(const IntMatrix& of, const IntMatrix& basis)
{
    RatMatrix B = to_rational(basis);
    for (std::size_t c = 0; c < of.cols(); ++c) {
        std::vector<Rational> v(of.rows());
        for (std::size_t r = 0; r < of.rows(); ++r) v[r] = of(r, c);
        auto x = solve_full_column_rank(B, v);
        if (!x) return false;
        for (const auto& q : *x)
            if (denominator_of(q) != 1) return false;
    }
    return true;
}

}  // namespace

bool same_lattice(const IntMatrix& K1, const IntMatrix& K2)
{
    if (K1.rows() != K2.rows() || K1.cols() != K2.cols()) return false;
    if (K1.cols() == 0) return true;
    if (rational_rank(to_rational(K1)) != K1.cols() || rational_rank(to_rational(K2)) != K2.cols()) return false;
    return columns_in_lattice(K1, K2) && columns_in_lattice(K2, K1);
}

namespace {

void box_points(std::size_t m, int r, const std::function<void(const std::vector<Integer>&)>& visit)
{
    std::vector<Integer> x(m, -r);
    if (m == 0) {
        visit(x);
        return;
    }
    for (;;) {
        visit(x);
        std::size_t d = 0;
        while (d < m && x[d] == r) x[d++] = -r;
        if (d == m) return;
        ++x[d];
    }
}

}  // namespace

std::vector<std::vector<Integer>> brute_force_solutions(const IntMatrix& A, const std::vector<Integer>& b, int r)
{
    std::vector<std::vector<Integer>> out;
    box_points(A.cols(), r, [&](const std::vector<Integer>& x) {
        for (std::size_t i = 0; i < A.rows(); ++i) {
            Integer acc = 0;
            for (std::size_t j = 0; j < A.cols(); ++j) acc += A(i, j) * x[j];
            if (acc != b[i]) return;
        }
        out.push_back(x);
    });
    return out;
}

std::vector<std::vector<Integer>> brute_force_points(const RatMatrix& A, const std::vector<Rational>& b, int r)
{
    std::vector<std::vector<Integer>> out;
    box_points(A.cols(), r, [&](const std::vector<Integer>& x) {
        for (std::size_t i = 0; i < A.rows(); ++i) {
            Rational acc = 0;
            for (std::size_t j = 0; j < A.cols(); ++j) acc += A(i, j) * Rational(x[j]);
            if (acc < b[i]) return;
        }
        out.push_back(x);
    });
    return out;
}

// ------------------------------------------------------------ forward mode

namespace {

struct Dual {
    double v = 0;
    std::map<std::size_t, double> d;
};

Dual scale(Dual a, double k)
{
    a.v *= k;
    for (auto& [_, g] : a.d) g *= k;
    return a;
}

// a + k * b in the derivative part; the value is set by the caller.
void axpy(std::map<std::size_t, double>& into, const std::map<std::size_t, double>& b, double k)
{
    for (const auto& [e, g] : b) into[e] += k * g;
}

class Forward {
public:
    Forward(const TensorEnv& env, const std::string& arg) : env_(env), arg_(arg) {}

    Dual eval(const Expr& e, IndexValues& iv)
    {
        const Node& n = *e;
        switch (n.kind) {
            case NodeKind::Constant: return {n.value.convert_to<double>(), {}};
            case NodeKind::Tensor: {
                const DenseTensor& t = env_.at(n.tensor);
                std::vector<std::int64_t> idx;
                for (const auto& f : n.indices) idx.push_back(to_int64(numerator_of(f.evaluate(iv))));
                std::size_t flat = t.flat(idx);
                Dual r{t.data[flat], {}};
                if (n.tensor == arg_) r.d[flat] = 1;
                return r;
            }
            case NodeKind::Binary: {
                Dual a = eval(n.children[0], iv);
                Dual b = eval(n.children[1], iv);
                Dual r;
                switch (n.binary_op) {
                    case BinaryOp::Add:
                        r.v = a.v + b.v;
                        r.d = a.d;
                        axpy(r.d, b.d, 1);
                        return r;
                    case BinaryOp::Sub:
                        r.v = a.v - b.v;
                        r.d = a.d;
                        axpy(r.d, b.d, -1);
                        return r;
                    case BinaryOp::Mul:
                        r.v = a.v * b.v;
                        axpy(r.d, a.d, b.v);
                        axpy(r.d, b.d, a.v);
                        return r;
                    case BinaryOp::Div:
                        r.v = a.v / b.v;
                        axpy(r.d, a.d, 1 / b.v);
                        axpy(r.d, b.d, -a.v / (b.v * b.v));
                        return r;
                    case BinaryOp::Pow:
                        r.v = std::pow(a.v, b.v);
                        axpy(r.d, a.d, b.v * std::pow(a.v, b.v - 1));
                        return r;
                }
                return r;
            }
            case NodeKind::Unary: {
                Dual a = eval(n.children[0], iv);
                double v = a.v, g = 0;
                switch (n.unary_op) {
                    case UnaryOp::Neg: v = -a.v, g = -1; break;
                    case UnaryOp::Exp: v = std::exp(a.v), g = v; break;
                    case UnaryOp::Log: v = std::log(a.v), g = 1 / a.v; break;
                    case UnaryOp::Sin: v = std::sin(a.v), g = std::cos(a.v); break;
                    case UnaryOp::Cos: v = std::cos(a.v), g = -std::sin(a.v); break;
                    case UnaryOp::Sinh: v = std::sinh(a.v), g = std::cosh(a.v); break;
                    case UnaryOp::Cosh: v = std::cosh(a.v), g = std::sinh(a.v); break;
                    case UnaryOp::Sqrt: v = std::sqrt(a.v), g = 0.5 / v; break;
                }
                Dual r = scale(std::move(a), g);
                r.v = v;
                return r;
            }
            case NodeKind::Sum: {
                Integer lo = n.lower.evaluate(iv), hi = n.upper.evaluate(iv);
                Dual r;
                for (Integer k = lo; k <= hi; ++k) {
                    iv[n.binder] = k;
                    Dual t = eval(n.children[0], iv);
                    r.v += t.v;
                    axpy(r.d, t.d, 1);
                }
                iv.erase(n.binder);
                return r;
            }
            case NodeKind::DeltaIf: return eval(n.children[n.condition.holds(iv) ? 0 : 1], iv);
        }
        return {};
    }

private:
    const TensorEnv& env_;
    std::string arg_;
};

void over_box(const std::vector<std::int64_t>& shape, const std::function<void(const std::vector<std::int64_t>&)>& visit)
{
    DenseTensor probe(shape);
    for (std::size_t f = 0; f < probe.size(); ++f) visit(probe.unflat(f));
}

}  // namespace

DenseTensor forward_mode_jacobian(const ElemFuncSpec& spec, const TensorEnv& env, const std::string& arg)
{
    const auto& xshape = spec.argument(arg).shape;
    std::vector<std::int64_t> jshape = spec.shape;
    jshape.insert(jshape.end(), xshape.begin(), xshape.end());
    DenseTensor jac(jshape);
    const std::size_t nx = static_cast<std::size_t>(element_count(xshape));
    Forward fw(env, arg);
    std::size_t o = 0;
    over_box(spec.shape, [&](const std::vector<std::int64_t>& alpha) {
        IndexValues iv;
        for (std::size_t d = 0; d < alpha.size(); ++d) iv[spec.indices[d]] = alpha[d];
        Dual r = fw.eval(spec.body, iv);
        for (const auto& [e, g] : r.d) jac.data[o * nx + e] += g;
        ++o;
    });
    return jac;
}

DenseTensor forward_mode_adjoint(const ElemFuncSpec& spec, const TensorEnv& env, const DenseTensor& df,
                                 const std::string& arg)
{
    DenseTensor out(spec.argument(arg).shape);
    Forward fw(env, arg);
    std::size_t o = 0;
    over_box(spec.shape, [&](const std::vector<std::int64_t>& alpha) {
        IndexValues iv;
        for (std::size_t d = 0; d < alpha.size(); ++d) iv[spec.indices[d]] = alpha[d];
        Dual r = fw.eval(spec.body, iv);
        for (const auto& [e, g] : r.d) out.data[e] += df.data[o] * g;
        ++o;
    });
    return out;
}

// ------------------------------------------------------------ listings

ListedAdjoint parse_listing_line(const std::string& line, const ShapeTable& tensors, const std::string& seed)
{
    ListedAdjoint out;
    const std::string wrt = " wrt. ";
    auto p = line.find(wrt);
    auto colon = line.find(": ", p);
    if (p == std::string::npos || colon == std::string::npos) throw std::invalid_argument("not a derivative line");
    out.argument = line.substr(p + wrt.size(), colon - p - wrt.size());
    std::string def = line.substr(colon + 2);
    auto eq = def.find(" = ");
    std::string head = def.substr(0, eq);
    auto br = head.find('[');
    out.name = head.substr(0, br);
    if (br != std::string::npos) {
        std::string list = head.substr(br + 1, head.size() - br - 2);
        std::size_t start = 0;
        while (start <= list.size()) {
            auto semi = list.find(';', start);
            std::string name = list.substr(start, semi == std::string::npos ? std::string::npos : semi - start);
            name.erase(0, name.find_first_not_of(' '));
            out.indices.push_back(IndexSymbol{name, IndexKind::Derivative});
            if (semi == std::string::npos) break;
            start = semi + 1;
        }
    }
    out.expr = parse_expression(def.substr(eq + 3), tensors, out.indices);
    if (!seed.empty()) {
        out.expr = rewrite(out.expr, [&](const Node& n, const std::vector<Expr>&) -> Expr {
            if (n.kind != NodeKind::Tensor || n.tensor != seed) return nullptr;
            return tensor_ref(n.tensor, n.indices, TensorRole::Adjoint);
        });
    }
    return out;
}

// ------------------------------------------------------------ random specs

namespace {

struct Occ {
    std::size_t arg = 0;
    bool inside = false;
    std::vector<std::vector<int>> coeffs;  // per dim, per symbol (outputs then k)
    std::vector<std::int64_t> lo, hi;
};

std::string form_text(const std::vector<int>& coeffs, const std::vector<std::string>& names, std::int64_t constant)
{
    std::string s;
    for (std::size_t i = 0; i < coeffs.size(); ++i) {
        if (coeffs[i] == 0) continue;
        if (!s.empty()) s += " + ";
        s += coeffs[i] == 1 ? names[i] : std::to_string(coeffs[i]) + " * " + names[i];
    }
    if (constant != 0 || s.empty()) s += (s.empty() ? "" : " + ") + std::to_string(constant);
    return s;
}

}  // namespace

std::string random_spec_text(std::mt19937_64& rng, const RandomSpecOptions& opt)
{
    auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    const std::vector<std::string> out_names = {"i", "j", "l"};
    const std::vector<std::string> arg_names = {"x", "y", "w"};

    const int rank = pick(0, opt.max_rank);
    std::vector<std::int64_t> shape;
    for (int d = 0; d < rank; ++d) shape.push_back(pick(1, opt.max_extent));

    // Optional sum with a lower bound of 0 and a constant or index-dependent upper bound.
    const bool has_sum = opt.allow_sum && pick(0, 1) == 1;
    int sum_upper_const = pick(0, opt.max_extent - 1);
    int sum_upper_index = rank > 0 && pick(0, 2) == 0 ? pick(0, rank - 1) : -1;

    std::vector<std::string> names(out_names.begin(), out_names.begin() + rank);
    names.push_back("k");

    const int nargs = pick(1, 3);
    std::vector<int> arg_rank(static_cast<std::size_t>(nargs));
    for (auto& r : arg_rank) r = pick(0, opt.max_arg_rank);

    std::vector<Occ> occs;
    for (int a = 0; a < nargs; ++a) {
        const int count = pick(1, 2);
        for (int c = 0; c < count; ++c) {
            Occ o;
            o.arg = static_cast<std::size_t>(a);
            o.inside = has_sum && pick(0, 1) == 1;
            for (int d = 0; d < arg_rank[static_cast<std::size_t>(a)]; ++d) {
                std::vector<int> row(names.size(), 0);
                for (std::size_t s = 0; s < names.size(); ++s) {
                    if (s + 1 == names.size() && !o.inside) continue;
                    row[s] = pick(0, 2) == 0 ? 0 : pick(-opt.max_coeff, opt.max_coeff);
                }
                o.coeffs.push_back(std::move(row));
            }
            occs.push_back(std::move(o));
        }
    }
    // Every argument appears somewhere; make sure the sum body is not empty.
    if (has_sum) {
        bool any_inside = false;
        for (const auto& o : occs) any_inside = any_inside || o.inside;
        if (!any_inside) occs.back().inside = true;
    }

    // Reachable index ranges by enumeration.
    for (auto& o : occs) {
        o.lo.assign(o.coeffs.size(), INT64_MAX);
        o.hi.assign(o.coeffs.size(), INT64_MIN);
    }
    over_box(shape, [&](const std::vector<std::int64_t>& alpha) {
        std::vector<std::int64_t> ks = {0};
        if (has_sum) {
            std::int64_t hi = sum_upper_index >= 0 ? alpha[static_cast<std::size_t>(sum_upper_index)] : sum_upper_const;
            ks.clear();
            for (std::int64_t k = 0; k <= hi; ++k) ks.push_back(k);
        }
        for (auto& o : occs) {
            const auto& kset = o.inside ? ks : std::vector<std::int64_t>{0};
            for (std::int64_t k : kset) {
                for (std::size_t d = 0; d < o.coeffs.size(); ++d) {
                    std::int64_t v = 0;
                    for (std::size_t s = 0; s < alpha.size(); ++s) v += o.coeffs[d][s] * alpha[s];
                    v += o.coeffs[d].back() * k;
                    o.lo[d] = std::min(o.lo[d], v);
                    o.hi[d] = std::max(o.hi[d], v);
                }
            }
        }
    });

    std::vector<std::vector<std::int64_t>> arg_shape(static_cast<std::size_t>(nargs));
    for (int a = 0; a < nargs; ++a) arg_shape[static_cast<std::size_t>(a)].assign(static_cast<std::size_t>(arg_rank[static_cast<std::size_t>(a)]), 1);
    for (const auto& o : occs)
        for (std::size_t d = 0; d < o.coeffs.size(); ++d)
            arg_shape[o.arg][d] = std::max(arg_shape[o.arg][d], o.hi[d] - o.lo[d] + 1);

    auto ref = [&](const Occ& o) {
        std::string s = arg_names[o.arg];
        if (o.coeffs.empty()) return s;
        s += "[";
        for (std::size_t d = 0; d < o.coeffs.size(); ++d) s += (d ? "; " : "") + form_text(o.coeffs[d], names, -o.lo[d]);
        return s + "]";
    };

    // Random smooth combination of leaf texts.
    std::function<std::string(std::vector<std::string>)> combine = [&](std::vector<std::string> leaves) -> std::string {
        for (auto& leaf : leaves) {
            // log and sqrt only see argument elements, which are positive.
            const bool positive = leaf.rfind("sum", 0) != 0;
            switch (pick(0, 9)) {
                case 0: leaf = "sin (" + leaf + ")"; break;
                case 1: leaf = "exp (" + leaf + ")"; break;
                case 2: leaf = leaf + " ** 2"; break;
                case 3: leaf = leaf + " ** 3"; break;
                case 4: if (positive) leaf = "log (" + leaf + ")"; break;
                case 5: if (positive) leaf = "sqrt (" + leaf + ")"; break;
                case 6: leaf = "cosh (" + leaf + ")"; break;
                case 7: leaf = "-" + leaf; break;
                default: break;
            }
        }
        std::string acc = leaves[0];
        for (std::size_t i = 1; i < leaves.size(); ++i) {
            switch (pick(0, 3)) {
                case 0: acc = "(" + acc + ") + " + leaves[i]; break;
                case 1: acc = "(" + acc + ") - " + leaves[i]; break;
                case 2: acc = "(" + acc + ") * " + leaves[i]; break;
                default: acc = "(" + acc + ") / (2 + " + leaves[i] + ")"; break;
            }
        }
        return acc;
    };

    std::vector<std::string> outer, inner;
    for (const auto& o : occs) (o.inside ? inner : outer).push_back(ref(o));
    if (has_sum) {
        std::string upper = sum_upper_index >= 0 ? names[static_cast<std::size_t>(sum_upper_index)]
                                                 : std::to_string(sum_upper_const);
        outer.push_back("sum{k}_0^" + upper + " (" + combine(inner) + ")");
    }

    std::ostringstream text;
    for (int a = 0; a < nargs; ++a) {
        const auto& s = arg_shape[static_cast<std::size_t>(a)];
        text << arg_names[static_cast<std::size_t>(a)] << " : ";
        if (s.empty()) text << "scalar";
        for (std::size_t d = 0; d < s.size(); ++d) text << (d ? " x " : "") << s[d];
        text << "\n";
    }
    text << "f : ";
    if (shape.empty()) text << "scalar";
    for (std::size_t d = 0; d < shape.size(); ++d) text << (d ? " x " : "") << shape[d];
    text << "\nf";
    if (rank > 0) {
        text << "[";
        for (int d = 0; d < rank; ++d) text << (d ? "; " : "") << out_names[static_cast<std::size_t>(d)];
        text << "]";
    }
    text << " = " << combine(outer) << "\n";
    return text.str();
}

}  // namespace tad::testing
