// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <string>

namespace tad {

using Integer = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

inline Integer numerator_of(const Rational& q) { return boost::multiprecision::numerator(q); }
inline Integer denominator_of(const Rational& q) { return boost::multiprecision::denominator(q); }

inline bool is_integer(const Rational& q) { return denominator_of(q) == 1; }

/// Largest integer not greater than q.
inline Integer floor_of(const Rational& q)
{
    Integer n = numerator_of(q);
    Integer d = denominator_of(q);
    Integer r = n / d;
    if (n % d != 0 && n < 0) --r;
    return r;
}

/// Smallest integer not less than q.
inline Integer ceil_of(const Rational& q)
{
    Integer n = numerator_of(q);
    Integer d = denominator_of(q);
    Integer r = n / d;
    if (n % d != 0 && n > 0) ++r;
    return r;
}

inline Integer abs_of(const Integer& v) { return v < 0 ? Integer(-v) : v; }

inline Integer gcd_of(Integer a, Integer b)
{
    a = abs_of(a);
    b = abs_of(b);
    while (b != 0) {
        Integer t = a % b;
        a = std::move(b);
        b = std::move(t);
    }
    return a;
}

inline Integer lcm_of(const Integer& a, const Integer& b)
{
    if (a == 0 || b == 0) return 0;
    return abs_of(a / gcd_of(a, b) * b);
}

std::string to_string(const Integer& v);
std::string to_string(const Rational& q);

/// Converts to int64, throwing std::overflow_error when the value does not fit.
std::int64_t to_int64(const Integer& v);

}  // namespace tad
