#pragma once

#include "polyode/pivp.hpp"
#include "polyode/polynomial.hpp"
#include "polyode/solver.hpp"

#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace polyode {

enum class ExprKind { Var, Time, Const, Poly, Add, Sub, Mul, Prim };

/// Primitive generable functions. Norm, Mx, Lxh and Hxl are macro
/// primitives: they evaluate through fixed tanh-based realizations and
/// desugar to the core set {Sin, Cos, Tanh, Exp, Log1pSq, Inv} before
/// lowering. Log1pSq is the internal primitive u -> ln(1 + u^2) that the
/// lxh/hxl sharpness term needs; Inv is u -> 1/u (generable away from 0).
/// OdeSolution wraps a lowered PIVP as a function of its (time) child,
/// which is how ode_closure represents t -> y(t).
enum class PrimKind { Sin, Cos, Tanh, Exp, Norm, Mx, Lxh, Hxl, Log1pSq, Inv, OdeSolution };

/// Closed interval with exact endpoints, a < b.
struct RationalInterval {
    Rational a, b;
    void validate() const {
        if (!(a < b)) throw ParameterError("interval needs a < b");
    }
};

struct Expr;
class OdeSolutionCache;

struct PrimParams {
    Rational delta;            // Norm, Mx: delta in (0, 1]
    RationalInterval interval; // Lxh, Hxl
    bool exp_acknowledged = false;

    // OdeSolution payload.
    std::shared_ptr<const Pivp> ode;
    int ode_output = 0;
    Rational ode_t0;
    SolverConfig ode_cfg;
    std::shared_ptr<OdeSolutionCache> ode_cache;
};

struct Expr {
    ExprKind kind = ExprKind::Const;
    int arity = 0; // number of formal arguments Var(0..arity-1)
    int var_index = 0;
    Rational value;
    MultiPoly poly; // Poly nodes: poly.arity() == children.size()
    PrimKind prim = PrimKind::Tanh;
    PrimParams params;
    std::vector<ExprPtr> children;
    bool contains_exp = false;

    std::string to_string() const;
};

// ----- construction -----------------------------------------------------

ExprPtr make_var(int arity, int index);
ExprPtr make_time(int arity);
ExprPtr make_const(int arity, const Rational& value);
ExprPtr make_poly(MultiPoly poly, std::vector<ExprPtr> children);
ExprPtr make_add(ExprPtr a, ExprPtr b);
ExprPtr make_sub(ExprPtr a, ExprPtr b);
ExprPtr make_mul(ExprPtr a, ExprPtr b);
ExprPtr make_scale(const Rational& c, ExprPtr a);

/// build_primitive: sin/cos/tanh/exp take one child; norm/mx take the
/// component list; lxh/hxl take (t, mu, x). delta must lie in (0,1];
/// intervals must be nondegenerate; exp requires acknowledge_unbounded.
ExprPtr build_primitive(PrimKind kind, PrimParams params, std::vector<ExprPtr> children,
                        bool acknowledge_unbounded = false);

ExprPtr make_sin(ExprPtr u);
ExprPtr make_cos(ExprPtr u);
ExprPtr make_tanh(ExprPtr u);
ExprPtr make_exp(ExprPtr u, bool acknowledge_unbounded);
ExprPtr make_norm(const Rational& delta, std::vector<ExprPtr> components);
ExprPtr make_mx(const Rational& delta, std::vector<ExprPtr> components);
ExprPtr make_lxh(const RationalInterval& I, ExprPtr t, ExprPtr mu, ExprPtr x);
ExprPtr make_hxl(const RationalInterval& I, ExprPtr t, ExprPtr mu, ExprPtr x);

enum class ComposeOp { add, sub, mul, compose };

/// Arithmetic on generable expressions; compose substitutes g (one
/// expression per argument of f) into f.
ExprPtr compose_generable(ComposeOp op, const ExprPtr& f, const ExprPtr& g);
ExprPtr compose_generable(const ExprPtr& f, const std::vector<ExprPtr>& args);

/// Structural substitution: Var(i) -> replacement[i]. Time nodes are left
/// untouched.
ExprPtr substitute(const ExprPtr& e, const std::vector<ExprPtr>& replacement);

/// Rebuilds the tree with a wider argument vector (all Var indices must
/// stay in range). Needed to splice closed expressions into system
/// contexts with more variables.
ExprPtr with_arity(const ExprPtr& e, int arity);

// ----- evaluation -------------------------------------------------------

/// Closed-form evaluation at a point (plus ambient time for Time nodes).
/// OdeSolution nodes trigger (cached) simulation.
double eval_expr(const ExprPtr& e, std::span<const double> args, double time = 0.0);
Real eval_expr(const ExprPtr& e, std::span<const Real> args, const Real& time, unsigned precision_bits);

/// Desugared view used by both the evaluator and the lowering pass:
/// Norm/Mx/Lxh/Hxl expand into the core primitive set. Cached per node.
ExprPtr desugar(const ExprPtr& e);

/// Trace cache for OdeSolution nodes; safe for concurrent readers.
class OdeSolutionCache {
public:
    /// Value of state coordinate `output` at time t (relative to absolute
    /// time, anchored at t0).
    double value_at(const Pivp& sys, double t0, double t, int output, const SolverConfig& cfg);

private:
    std::mutex mu_;
    std::optional<Trace> forward_;  // from t0 with increasing t
    std::optional<Trace> backward_; // time-reversed run from t0
};

} // namespace polyode
