#pragma once

#include "polyode/expr.hpp"
#include "polyode/pivp.hpp"

#include <map>
#include <string>
#include <vector>

namespace polyode {

/// Evidence that the lowering is well-formed: which auxiliary state
/// indices carry which primitive values.
struct LoweringCert {
    struct Entry {
        PrimKind kind;
        std::string node; // printable form of the primitive node
        std::vector<int> slots;
    };
    std::vector<Entry> entries;
    int semantic_dim = 0; // d: states of the original system
    int lowered_dim = 0;
    int aux_count = 0;
    bool uses_time = false;
    bool uses_exp = false;

    void validate() const;
};

struct LoweredSystem {
    Pivp pivp;
    LoweringCert cert;
};

/// Lowers y' = rhs(y, x(t), t) with y(0) = init_q(args) into a pure
/// polynomial PIVP. The first `rhs.size()` lowered states reproduce y;
/// auxiliary states carry primitive values. Expressions index arguments
/// as Var(0..d-1) = states, Var(d..d+m-1) = external inputs.
///
/// init_overrides replaces the polynomial initial map of selected states
/// with closed-form expressions over the init arguments (needed when an
/// initial value is generable but not polynomial, e.g. a norm of the
/// argument). Overridden states keep a zero row in init_q.
LoweredSystem lower_to_pivp(const std::vector<ExprPtr>& rhs, const PolyVector& init_q,
                            int input_arity,
                            const std::map<int, ExprPtr>& init_overrides = {});

/// Closure under ODE: the expression t -> y_{output}(t) where y solves
/// y' = f(y), y(t0) = y0. Realized as a lowered PIVP behind an
/// OdeSolution node; evaluation simulates with cached traces.
ExprPtr ode_closure(const std::vector<ExprPtr>& f, const Rational& t0,
                    const std::vector<Rational>& y0, int output = 0,
                    const SolverConfig& cfg = {});

} // namespace polyode
