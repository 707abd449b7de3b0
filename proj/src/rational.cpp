#include "polyode/rational.hpp"

#include "polyode/errors.hpp"

#include <cctype>
#include <cmath>

namespace polyode {

Rational parse_rational(const std::string& text) {
    if (text.empty()) throw ParameterError("empty rational literal");
    bool plain = true;
    for (char c : text) {
        if (c == '.' || c == 'e' || c == 'E') {
            plain = false;
            break;
        }
    }
    try {
        if (plain) return Rational(text);
    } catch (const std::exception&) {
        throw ParameterError("bad rational literal: '" + text + "'");
    }

    // Decimal / scientific literal: mantissa * 10^exp expanded exactly.
    size_t pos = 0;
    bool neg = false;
    if (pos < text.size() && (text[pos] == '+' || text[pos] == '-')) {
        neg = text[pos] == '-';
        ++pos;
    }
    Integer mantissa = 0;
    long frac_digits = 0;
    bool seen_digit = false, seen_dot = false;
    for (; pos < text.size(); ++pos) {
        char c = text[pos];
        if (std::isdigit(static_cast<unsigned char>(c))) {
            mantissa = mantissa * 10 + (c - '0');
            if (seen_dot) ++frac_digits;
            seen_digit = true;
        } else if (c == '.' && !seen_dot) {
            seen_dot = true;
        } else {
            break;
        }
    }
    if (!seen_digit) throw ParameterError("bad rational literal: '" + text + "'");
    long exp10 = 0;
    if (pos < text.size() && (text[pos] == 'e' || text[pos] == 'E')) {
        ++pos;
        bool eneg = false;
        if (pos < text.size() && (text[pos] == '+' || text[pos] == '-')) {
            eneg = text[pos] == '-';
            ++pos;
        }
        if (pos >= text.size()) throw ParameterError("bad exponent in '" + text + "'");
        long e = 0;
        for (; pos < text.size(); ++pos) {
            if (!std::isdigit(static_cast<unsigned char>(text[pos])))
                throw ParameterError("bad exponent in '" + text + "'");
            e = e * 10 + (text[pos] - '0');
        }
        exp10 = eneg ? -e : e;
    }
    if (pos != text.size()) throw ParameterError("bad rational literal: '" + text + "'");

    exp10 -= frac_digits;
    Rational q(mantissa);
    Integer scale = 1;
    for (long i = 0; i < std::labs(exp10); ++i) scale *= 10;
    if (exp10 > 0)
        q *= Rational(scale);
    else if (exp10 < 0)
        q /= Rational(scale);
    return neg ? Rational(-q) : q;
}

std::string rational_to_string(const Rational& q) {
    return q.str();
}

Rational rational_from_double_bits(double value, unsigned bits, bool round_up) {
    if (!std::isfinite(value)) throw ParameterError("non-finite value for rational rounding");
    Rational exact(value); // exact: doubles are binary rationals
    Integer den = Integer(1) << bits;
    Rational scaled = exact * Rational(den);
    Integer num = boost::multiprecision::numerator(scaled) / boost::multiprecision::denominator(scaled);
    Rational candidate(num, den); // truncation toward zero
    if (candidate > exact) candidate -= Rational(Integer(1), den);        // now floor
    if (round_up && candidate < exact) candidate += Rational(Integer(1), den);
    return candidate;
}

} // namespace polyode
