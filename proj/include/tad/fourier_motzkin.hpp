// SPDX-License-Identifier: Apache-2.0
#pragma once

// Parametric Fourier-Motzkin elimination for A x >= b. The elimination only
// looks at A; bounds are matrices applied to b at query time.

#include "tad/matrix.hpp"
#include "tad/numeric.hpp"

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace tad {

/// Bounds on x_i: max(L b + Lhat t) <= x_i <= min(H b + Hhat t), t = x_{i+1..M-1}.
struct FMLevel {
    RatMatrix L;     // lower rows x N
    RatMatrix Lhat;  // lower rows x (M - i - 1)
    RatMatrix H;
    RatMatrix Hhat;
};

struct FMSystem {
    std::size_t num_vars = 0;
    std::size_t num_rows = 0;
    std::vector<FMLevel> levels;  // levels[i] bounds x_i
    RatMatrix F;                  // real feasible iff F b <= 0
};

FMSystem fm_eliminate(const RatMatrix& A);

/// Unset ends mean unbounded on that side.
struct IntInterval {
    std::optional<Integer> lo;
    std::optional<Integer> hi;

    bool bounded() const { return lo && hi; }
    bool empty() const { return bounded() && *lo > *hi; }
};

struct RealInterval {
    std::optional<Rational> lo;
    std::optional<Rational> hi;
};

IntInterval instantiate(const FMSystem& sys, std::span<const Rational> b, std::span<const Integer> tail, std::size_t i);
RealInterval instantiate_real(const FMSystem& sys, std::span<const Rational> b, std::span<const Rational> tail,
                              std::size_t i);

/// F b <= 0. This certifies real feasibility only; integer points may still be absent.
bool real_feasible(const FMSystem& sys, std::span<const Rational> b);

/// Visits every integer x with A x >= b, x_{M-1} outermost. Throws InfiniteRange
/// if some variable lacks a lower or upper bound.
void enumerate(const FMSystem& sys, std::span<const Rational> b, const std::function<void(std::span<const Integer>)>& visit);
std::vector<std::vector<Integer>> enumerate_points(const FMSystem& sys, std::span<const Rational> b);

}  // namespace tad
