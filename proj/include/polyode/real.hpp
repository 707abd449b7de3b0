#pragma once

#include "polyode/rational.hpp"

#include <boost/multiprecision/mpfr.hpp>

#include <cmath>
#include <vector>

namespace polyode {

/// Arbitrary-precision real used wherever the requested precision exceeds
/// double. Precision is set per thread via PrecisionGuard; every freshly
/// constructed Real picks up the active precision.
using Real = boost::multiprecision::number<boost::multiprecision::mpfr_float_backend<0>,
                                            boost::multiprecision::et_off>;

/// Scoped working precision, in bits of mantissa (>= 53).
class PrecisionGuard {
public:
    explicit PrecisionGuard(unsigned bits);
    ~PrecisionGuard();
    PrecisionGuard(const PrecisionGuard&) = delete;
    PrecisionGuard& operator=(const PrecisionGuard&) = delete;

    static unsigned digits10_for_bits(unsigned bits);

private:
    unsigned saved_digits10_;
};

inline Real real_from_rational(const Rational& q) { return Real(q); }

/// Generic conversions so numeric kernels can be instantiated with
/// double or Real.
template <typename Scalar>
Scalar scalar_from_rational(const Rational& q);

template <>
inline double scalar_from_rational<double>(const Rational& q) {
    return q.convert_to<double>();
}

template <>
inline Real scalar_from_rational<Real>(const Rational& q) {
    return Real(q);
}

template <typename Scalar>
double scalar_to_double(const Scalar& x) {
    if constexpr (std::is_same_v<Scalar, double>) {
        return x;
    } else {
        return x.template convert_to<double>();
    }
}

template <typename Scalar>
Scalar scalar_abs(const Scalar& x) {
    using std::abs;
    return abs(x);
}

template <typename Scalar>
Scalar inf_norm(const std::vector<Scalar>& v) {
    Scalar m(0);
    for (const auto& x : v) {
        Scalar a = scalar_abs(x);
        if (a > m) m = a;
    }
    return m;
}

} // namespace polyode
