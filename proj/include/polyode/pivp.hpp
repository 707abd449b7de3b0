#pragma once

#include "polyode/polynomial.hpp"

#include <memory>
#include <vector>

namespace polyode {

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

/// A polynomial ODE system y' = p(y, x(t)) with a polynomial initial map
/// y(0) = q(args) and optional external inputs.
///
/// rhs argument layout: [states (dim) | inputs (input_arity) | input
/// derivatives (input_arity, only when input_derivatives is set)]. The
/// derivative slots exist because lowering a non-polynomial right-hand
/// side driven by an external C^1 input x produces equations in x'(t).
///
/// init maps the formal argument vector (length init.arity(), possibly 0)
/// to the initial state. States whose initial value is not polynomial in
/// the arguments (auxiliary variables introduced by lowering) carry an
/// aux_init expression instead, evaluated over [args..., inputs(0)...].
struct Pivp {
    int dim = 0;
    int input_arity = 0;
    bool input_derivatives = false;
    PolyVector rhs;
    PolyVector init;
    std::vector<int> outputs; // 0-based state indices

    struct AuxInit {
        int state = 0;
        ExprPtr expr;
    };
    std::vector<AuxInit> aux_init;

    int rhs_arity() const { return dim + input_arity * (input_derivatives ? 2 : 1); }

    void validate() const {
        if (dim <= 0) throw DimensionError("pivp: dim must be positive");
        if (rhs.size() != dim) throw DimensionError("pivp: rhs must have dim components");
        if (rhs.arity() != rhs_arity()) throw DimensionError("pivp: rhs arity inconsistent with dim/inputs");
        if (init.size() != dim) throw DimensionError("pivp: init must have dim components");
        for (int o : outputs)
            if (o < 0 || o >= dim) throw DimensionError("pivp: output index out of range");
        for (const auto& a : aux_init)
            if (a.state < 0 || a.state >= dim) throw DimensionError("pivp: aux init index out of range");
    }
};

} // namespace polyode
