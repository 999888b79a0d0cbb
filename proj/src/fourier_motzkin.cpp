// SPDX-License-Identifier: Apache-2.0
#include "tad/fourier_motzkin.hpp"

#include <algorithm>
#include <set>
#include <tuple>

namespace tad {

namespace {

struct Row {
    std::vector<Rational> a;  // coefficients of x
    std::vector<Rational> b;  // combination of the original right-hand sides

    bool is_zero() const
    {
        return std::all_of(a.begin(), a.end(), [](const Rational& v) { return v == 0; }) &&
               std::all_of(b.begin(), b.end(), [](const Rational& v) { return v == 0; });
    }

    // Positive rescaling so that the first nonzero entry has magnitude one.
    void normalize()
    {
        const Rational* lead = nullptr;
        for (const auto& v : a)
            if (v != 0) {
                lead = &v;
                break;
            }
        if (!lead)
            for (const auto& v : b)
                if (v != 0) {
                    lead = &v;
                    break;
                }
        if (!lead) return;
        Rational s = *lead < 0 ? Rational(-1) / *lead : Rational(1) / *lead;
        for (auto& v : a) v *= s;
        for (auto& v : b) v *= s;
    }

    friend bool operator<(const Row& x, const Row& y) { return std::tie(x.a, x.b) < std::tie(y.a, y.b); }
};

std::vector<Row> deduplicate(std::vector<Row> rows)
{
    std::set<Row> seen;
    std::vector<Row> out;
    for (auto& r : rows) {
        r.normalize();
        if (r.is_zero()) continue;
        if (seen.insert(r).second) out.push_back(std::move(r));
    }
    return out;
}

Rational dot(std::span<const Rational> row, std::span<const Rational> v)
{
    Rational acc = 0;
    for (std::size_t i = 0; i < row.size(); ++i)
        if (row[i] != 0) acc += row[i] * v[i];
    return acc;
}

Rational dot(std::span<const Rational> row, std::span<const Integer> v)
{
    Rational acc = 0;
    for (std::size_t i = 0; i < row.size(); ++i)
        if (row[i] != 0) acc += row[i] * Rational(v[i]);
    return acc;
}

void check_dims(const FMSystem& sys, std::size_t b_size, std::size_t tail_size, std::size_t i)
{
    if (i >= sys.num_vars) throw Error(ErrorCode::DimensionMismatch, "variable index out of range");
    if (b_size != sys.num_rows) throw Error(ErrorCode::DimensionMismatch, "right-hand side length mismatch");
    if (tail_size != sys.num_vars - i - 1) throw Error(ErrorCode::DimensionMismatch, "tail length mismatch");
}

template <class Tail>
std::optional<Rational> extreme(const RatMatrix& M, const RatMatrix& hat, std::span<const Rational> b, Tail tail, bool take_max)
{
    std::optional<Rational> best;
    for (std::size_t r = 0; r < M.rows(); ++r) {
        Rational v = dot(M.row(r), b) + dot(hat.row(r), tail);
        if (!best || (take_max ? v > *best : v < *best)) best = std::move(v);
    }
    return best;
}

}  // namespace

FMSystem fm_eliminate(const RatMatrix& A)
{
    FMSystem sys;
    sys.num_vars = A.cols();
    sys.num_rows = A.rows();
    const std::size_t m = sys.num_vars;
    const std::size_t n = sys.num_rows;

    std::vector<Row> rows;
    for (std::size_t r = 0; r < n; ++r) {
        Row row{{A.row(r).begin(), A.row(r).end()}, std::vector<Rational>(n, Rational(0))};
        row.b[r] = 1;
        rows.push_back(std::move(row));
    }

    for (std::size_t k = 0; k < m; ++k) {
        std::vector<const Row*> pos, neg;
        std::vector<Row> next;
        for (const auto& r : rows) {
            if (r.a[k] > 0)
                pos.push_back(&r);
            else if (r.a[k] < 0)
                neg.push_back(&r);
            else
                next.push_back(r);
        }

        const std::size_t tail = m - k - 1;
        FMLevel lvl{RatMatrix(pos.size(), n), RatMatrix(pos.size(), tail), RatMatrix(neg.size(), n),
                    RatMatrix(neg.size(), tail)};
        for (std::size_t p = 0; p < pos.size(); ++p) {
            const Row& r = *pos[p];
            for (std::size_t c = 0; c < n; ++c) lvl.L(p, c) = r.b[c] / r.a[k];
            for (std::size_t t = 0; t < tail; ++t) lvl.Lhat(p, t) = -r.a[k + 1 + t] / r.a[k];
        }
        for (std::size_t q = 0; q < neg.size(); ++q) {
            const Row& r = *neg[q];
            Rational mag = -r.a[k];
            for (std::size_t c = 0; c < n; ++c) lvl.H(q, c) = -r.b[c] / mag;
            for (std::size_t t = 0; t < tail; ++t) lvl.Hhat(q, t) = r.a[k + 1 + t] / mag;
        }
        sys.levels.push_back(std::move(lvl));

        // A variable bounded from one side only places no constraint on the rest.
        if (!pos.empty() && !neg.empty()) {
            for (const Row* p : pos)
                for (const Row* q : neg) {
                    Rational sp = p->a[k], sq = -q->a[k];
                    Row c{std::vector<Rational>(m), std::vector<Rational>(n)};
                    for (std::size_t j = 0; j < m; ++j) c.a[j] = p->a[j] / sp + q->a[j] / sq;
                    for (std::size_t j = 0; j < n; ++j) c.b[j] = p->b[j] / sp + q->b[j] / sq;
                    c.a[k] = 0;
                    next.push_back(std::move(c));
                }
        }
        rows = deduplicate(std::move(next));
    }

    sys.F = RatMatrix(rows.size(), n);
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < n; ++c) sys.F(r, c) = rows[r].b[c];
    return sys;
}

IntInterval instantiate(const FMSystem& sys, std::span<const Rational> b, std::span<const Integer> tail, std::size_t i)
{
    check_dims(sys, b.size(), tail.size(), i);
    const FMLevel& lvl = sys.levels[i];
    IntInterval out;
    if (auto lo = extreme(lvl.L, lvl.Lhat, b, tail, true)) out.lo = ceil_of(*lo);
    if (auto hi = extreme(lvl.H, lvl.Hhat, b, tail, false)) out.hi = floor_of(*hi);
    return out;
}

RealInterval instantiate_real(const FMSystem& sys, std::span<const Rational> b, std::span<const Rational> tail,
                              std::size_t i)
{
    check_dims(sys, b.size(), tail.size(), i);
    const FMLevel& lvl = sys.levels[i];
    return {extreme(lvl.L, lvl.Lhat, b, tail, true), extreme(lvl.H, lvl.Hhat, b, tail, false)};
}

bool real_feasible(const FMSystem& sys, std::span<const Rational> b)
{
    if (b.size() != sys.num_rows) throw Error(ErrorCode::DimensionMismatch, "right-hand side length mismatch");
    for (std::size_t r = 0; r < sys.F.rows(); ++r)
        if (dot(sys.F.row(r), b) > 0) return false;
    return true;
}

void enumerate(const FMSystem& sys, std::span<const Rational> b, const std::function<void(std::span<const Integer>)>& visit)
{
    if (b.size() != sys.num_rows) throw Error(ErrorCode::DimensionMismatch, "right-hand side length mismatch");
    const std::size_t m = sys.num_vars;
    for (std::size_t i = 0; i < m; ++i)
        if (sys.levels[i].L.rows() == 0 || sys.levels[i].H.rows() == 0)
            throw Error(ErrorCode::InfiniteRange, "variable " + std::to_string(i) + " is not bounded on both sides");
    if (!real_feasible(sys, b)) return;

    // The b-dependent parts are fixed for the whole enumeration.
    std::vector<std::vector<Rational>> lb(m), hb(m);
    for (std::size_t i = 0; i < m; ++i) {
        const FMLevel& lvl = sys.levels[i];
        for (std::size_t r = 0; r < lvl.L.rows(); ++r) lb[i].push_back(dot(lvl.L.row(r), b));
        for (std::size_t r = 0; r < lvl.H.rows(); ++r) hb[i].push_back(dot(lvl.H.row(r), b));
    }

    std::vector<Integer> x(m);
    std::function<void(std::size_t)> level = [&](std::size_t i) {
        const FMLevel& lvl = sys.levels[i];
        std::span<const Integer> tail(x.data() + i + 1, m - i - 1);
        Rational lo = lb[i][0] + dot(lvl.Lhat.row(0), tail);
        for (std::size_t r = 1; r < lb[i].size(); ++r) lo = std::max(lo, lb[i][r] + dot(lvl.Lhat.row(r), tail));
        Rational hi = hb[i][0] + dot(lvl.Hhat.row(0), tail);
        for (std::size_t r = 1; r < hb[i].size(); ++r) hi = std::min(hi, hb[i][r] + dot(lvl.Hhat.row(r), tail));
        Integer end = floor_of(hi);
        for (Integer v = ceil_of(lo); v <= end; ++v) {
            x[i] = v;
            if (i == 0)
                visit(x);
            else
                level(i - 1);
        }
    };
    if (m == 0)
        visit(x);
    else
        level(m - 1);
}

std::vector<std::vector<Integer>> enumerate_points(const FMSystem& sys, std::span<const Rational> b)
{
    std::vector<std::vector<Integer>> out;
    enumerate(sys, b, [&](std::span<const Integer> x) { out.emplace_back(x.begin(), x.end()); });
    return out;
}

}  // namespace tad
