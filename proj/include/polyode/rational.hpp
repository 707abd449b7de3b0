#pragma once

#include <boost/multiprecision/gmp.hpp>

#include <cstdint>
#include <string>

namespace polyode {

/// Exact rational coefficients. All polynomial arithmetic is loss-free.
using Rational = boost::multiprecision::mpq_rational;
using Integer = boost::multiprecision::mpz_int;

/// Parses "3", "-1/2", "0.25", "2.5e-3" into an exact rational.
/// Decimal and scientific literals are expanded over powers of ten.
Rational parse_rational(const std::string& text);

/// Canonical form "n" or "n/d" (d > 1).
std::string rational_to_string(const Rational& q);

/// Nearest rational with denominator 2^bits, rounded toward +inf (up=true)
/// or -inf. Used when an irrational constant (ln 2, 2*pi/tau, ...) must be
/// pinned to a rational coefficient with a known error direction.
Rational rational_from_double_bits(double value, unsigned bits, bool round_up);

} // namespace polyode
