// SPDX-License-Identifier: Apache-2.0
#include "tad/int_linalg.hpp"

#include <optional>
#include <utility>

namespace tad {

namespace {

Integer sign_of(const Integer& v) { return v < 0 ? Integer(-1) : Integer(1); }

// Euclid on non-negative inputs with Bezout coefficients.
Bezout euclid_nonnegative(const Integer& a, const Integer& b)
{
    Integer r0 = a, r1 = b;
    Integer s0 = 1, s1 = 0;
    Integer t0 = 0, t1 = 1;
    while (r1 != 0) {
        Integer q = r0 / r1;
        Integer r2 = r0 - q * r1;
        Integer s2 = s0 - q * s1;
        Integer t2 = t0 - q * t1;
        r0 = std::move(r1);
        r1 = std::move(r2);
        s0 = std::move(s1);
        s1 = std::move(s2);
        t0 = std::move(t1);
        t1 = std::move(t2);
    }
    return {r0, s0, t0};
}

// Simultaneously ra <- s*ra + t*ri and ri <- -g*ra + h*ri.
void combine_rows(IntMatrix& m, std::size_t a, std::size_t i, const Integer& s, const Integer& t, const Integer& g,
                  const Integer& h)
{
    for (std::size_t c = 0; c < m.cols(); ++c) {
        Integer va = m(a, c);
        Integer vi = m(i, c);
        m(a, c) = s * va + t * vi;
        m(i, c) = -g * va + h * vi;
    }
}

void combine_cols(IntMatrix& m, std::size_t a, std::size_t j, const Integer& s, const Integer& t, const Integer& g,
                  const Integer& h)
{
    for (std::size_t r = 0; r < m.rows(); ++r) {
        Integer va = m(r, a);
        Integer vj = m(r, j);
        m(r, a) = s * va + t * vj;
        m(r, j) = -g * va + h * vj;
    }
}

void subtract_row(IntMatrix& m, std::size_t target, std::size_t source, const Integer& f)
{
    for (std::size_t c = 0; c < m.cols(); ++c) m(target, c) -= f * m(source, c);
}

void subtract_col(IntMatrix& m, std::size_t target, std::size_t source, const Integer& f)
{
    for (std::size_t r = 0; r < m.rows(); ++r) m(r, target) -= f * m(r, source);
}

// Nonzero entry of minimal magnitude in the trailing block, row-major on ties.
std::optional<std::pair<std::size_t, std::size_t>> find_pivot(const IntMatrix& S, std::size_t a)
{
    std::optional<std::pair<std::size_t, std::size_t>> best;
    Integer best_abs;
    for (std::size_t i = a; i < S.rows(); ++i)
        for (std::size_t j = a; j < S.cols(); ++j) {
            if (S(i, j) == 0) continue;
            Integer mag = abs_of(S(i, j));
            if (!best || mag < best_abs) {
                best = {i, j};
                best_abs = std::move(mag);
            }
        }
    return best;
}

// Clears row and column `a` outside the pivot. Returns once a full sweep changes nothing.
void clear_pivot_cross(IntMatrix& S, IntMatrix& U, IntMatrix& V, std::size_t a)
{
    bool changing = true;
    while (changing) {
        changing = false;

        for (std::size_t i = a + 1; i < S.rows(); ++i) {
            if (S(i, a) % S(a, a) == 0) continue;
            Bezout bz = extended_gcd(S(a, a), S(i, a));
            Integer gamma = S(i, a) / bz.gcd;
            Integer alpha = S(a, a) / bz.gcd;
            combine_rows(S, a, i, bz.x, bz.y, gamma, alpha);
            combine_rows(U, a, i, bz.x, bz.y, gamma, alpha);
            changing = true;
        }
        for (std::size_t i = a + 1; i < S.rows(); ++i) {
            if (S(i, a) == 0) continue;
            Integer f = S(i, a) / S(a, a);
            subtract_row(S, i, a, f);
            subtract_row(U, i, a, f);
            changing = true;
        }

        for (std::size_t j = a + 1; j < S.cols(); ++j) {
            if (S(a, j) % S(a, a) == 0) continue;
            Bezout bz = extended_gcd(S(a, a), S(a, j));
            Integer gamma = S(a, j) / bz.gcd;
            Integer alpha = S(a, a) / bz.gcd;
            combine_cols(S, a, j, bz.x, bz.y, gamma, alpha);
            combine_cols(V, a, j, bz.x, bz.y, gamma, alpha);
            changing = true;
        }
        for (std::size_t j = a + 1; j < S.cols(); ++j) {
            if (S(a, j) == 0) continue;
            Integer f = S(a, j) / S(a, a);
            subtract_col(S, j, a, f);
            subtract_col(V, j, a, f);
            changing = true;
        }
    }
}

}  // namespace

Bezout extended_gcd(const Integer& a, const Integer& b)
{
    if (a == 0 && b == 0) throw Error(ErrorCode::BothZero, "gcd(0, 0) is undefined");
    Bezout r = euclid_nonnegative(abs_of(a), abs_of(b));
    r.x *= sign_of(a);
    r.y *= sign_of(b);
    return r;
}

SmithDecomposition smith_normal_form(const IntMatrix& A)
{
    const std::size_t n = A.rows();
    const std::size_t m = A.cols();
    SmithDecomposition d{A, IntMatrix::identity(n), IntMatrix::identity(m), 0};
    IntMatrix& S = d.S;

    std::size_t a = 0;
    for (;;) {
        while (a < n && a < m) {
            auto pivot = find_pivot(S, a);
            if (!pivot) break;
            auto [i, j] = *pivot;
            S.swap_cols(a, j);
            d.V.swap_cols(a, j);
            S.swap_rows(a, i);
            d.U.swap_rows(a, i);
            clear_pivot_cross(S, d.U, d.V, a);
            ++a;
        }
        d.rank = a;

        bool rerun = false;
        for (std::size_t k = 0; k < d.rank; ++k) {
            if (S(k, k) < 0) {
                for (std::size_t r = 0; r < n; ++r) S(r, k) = -S(r, k);
                for (std::size_t r = 0; r < m; ++r) d.V(r, k) = -d.V(r, k);
            }
            if (k + 1 < d.rank && S(k + 1, k + 1) % S(k, k) != 0) {
                for (std::size_t r = 0; r < n; ++r) S(r, k) += S(r, k + 1);
                for (std::size_t r = 0; r < m; ++r) d.V(r, k) += d.V(r, k + 1);
                a = k;
                rerun = true;
                break;
            }
        }
        if (!rerun) break;
    }
    return d;
}

LinearSolveResult solve_structure(const IntMatrix& A)
{
    LinearSolveResult res;
    res.smith = smith_normal_form(A);
    const auto& sm = res.smith;
    const std::size_t n = A.rows();
    const std::size_t m = A.cols();
    res.rank = sm.rank;

    RatMatrix pseudo(m, n);
    for (std::size_t i = 0; i < sm.rank; ++i) pseudo(i, i) = Rational(1) / Rational(sm.factor(i));
    res.pinv = to_rational(sm.V) * pseudo * to_rational(sm.U);
    res.kernel = sm.V.col_block(sm.rank, m);
    res.cokernel = sm.U.row_block(sm.rank, n);
    return res;
}

RhsClassification classify_rhs(const LinearSolveResult& res, std::span<const Integer> b)
{
    if (b.size() != res.pinv.cols())
        throw Error(ErrorCode::DimensionMismatch, "right-hand side length does not match matrix rows");

    for (std::size_t r = 0; r < res.cokernel.rows(); ++r) {
        Integer acc = 0;
        for (std::size_t c = 0; c < b.size(); ++c) acc += res.cokernel(r, c) * b[c];
        if (acc != 0) return NoSolution{};
    }

    std::vector<Integer> x(res.pinv.rows());
    for (std::size_t r = 0; r < res.pinv.rows(); ++r) {
        Rational acc = 0;
        for (std::size_t c = 0; c < b.size(); ++c) acc += res.pinv(r, c) * Rational(b[c]);
        if (!is_integer(acc)) return NoSolution{};
        x[r] = numerator_of(acc);
    }

    if (res.kernel_dim() == 0) return UniqueSolution{std::move(x)};
    return ParametricSolution{std::move(x)};
}

}  // namespace tad
