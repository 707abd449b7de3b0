#include "polyode/real.hpp"

#include "polyode/errors.hpp"

#include <cmath>

namespace polyode {

unsigned PrecisionGuard::digits10_for_bits(unsigned bits) {
    // ceil(bits * log10(2)); the backend never undershoots the request.
    return static_cast<unsigned>(std::ceil(bits * 0.30102999566398119521)) + 1;
}

PrecisionGuard::PrecisionGuard(unsigned bits) {
    if (bits < 53) throw ParameterError("working precision must be >= 53 bits");
    saved_digits10_ = Real::default_precision();
    Real::default_precision(digits10_for_bits(bits));
}

PrecisionGuard::~PrecisionGuard() {
    Real::default_precision(saved_digits10_);
}

} // namespace polyode
