#include "polyode/expr.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace polyode {

namespace {

void check_children_arity(const std::vector<ExprPtr>& children) {
    for (size_t i = 1; i < children.size(); ++i)
        if (children[i]->arity != children[0]->arity)
            throw DimensionError("expression children disagree on arity");
}

bool any_exp(const std::vector<ExprPtr>& children) {
    return std::any_of(children.begin(), children.end(),
                       [](const ExprPtr& c) { return c->contains_exp; });
}

ExprPtr finish(std::shared_ptr<Expr> e) {
    return std::const_pointer_cast<const Expr>(std::move(e));
}

} // namespace

ExprPtr make_var(int arity, int index) {
    if (index < 0 || index >= arity) throw DimensionError("variable index out of range");
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::Var;
    e->arity = arity;
    e->var_index = index;
    return finish(e);
}

ExprPtr make_time(int arity) {
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::Time;
    e->arity = arity;
    return finish(e);
}

ExprPtr make_const(int arity, const Rational& value) {
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::Const;
    e->arity = arity;
    e->value = value;
    return finish(e);
}

ExprPtr make_poly(MultiPoly poly, std::vector<ExprPtr> children) {
    if (poly.arity() != static_cast<int>(children.size()))
        throw DimensionError("poly node arity != child count");
    check_children_arity(children);
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::Poly;
    e->arity = children.empty() ? 0 : children[0]->arity;
    e->poly = std::move(poly);
    e->contains_exp = any_exp(children);
    e->children = std::move(children);
    return finish(e);
}

namespace {

ExprPtr make_binary(ExprKind kind, ExprPtr a, ExprPtr b) {
    if (a->arity != b->arity) throw DimensionError("operand arity mismatch");
    auto e = std::make_shared<Expr>();
    e->kind = kind;
    e->arity = a->arity;
    e->contains_exp = a->contains_exp || b->contains_exp;
    e->children = {std::move(a), std::move(b)};
    return finish(e);
}

} // namespace

ExprPtr make_add(ExprPtr a, ExprPtr b) { return make_binary(ExprKind::Add, std::move(a), std::move(b)); }
ExprPtr make_sub(ExprPtr a, ExprPtr b) { return make_binary(ExprKind::Sub, std::move(a), std::move(b)); }
ExprPtr make_mul(ExprPtr a, ExprPtr b) { return make_binary(ExprKind::Mul, std::move(a), std::move(b)); }

ExprPtr make_scale(const Rational& c, ExprPtr a) {
    MultiPoly p(1);
    p.add_term({1}, c);
    return make_poly(std::move(p), {std::move(a)});
}

ExprPtr build_primitive(PrimKind kind, PrimParams params, std::vector<ExprPtr> children,
                        bool acknowledge_unbounded) {
    check_children_arity(children);
    switch (kind) {
        case PrimKind::Sin:
        case PrimKind::Cos:
        case PrimKind::Tanh:
        case PrimKind::Log1pSq:
        case PrimKind::Inv:
            if (children.size() != 1) throw DimensionError("unary primitive expects one child");
            break;
        case PrimKind::Exp:
            if (children.size() != 1) throw DimensionError("exp expects one child");
            if (!acknowledge_unbounded)
                throw UnsupportedError(
                    "exp violates polynomial boundedness; pass acknowledge_unbounded to admit it");
            params.exp_acknowledged = true;
            break;
        case PrimKind::Norm:
        case PrimKind::Mx:
            if (children.empty()) throw DimensionError("norm/mx need at least one component");
            if (!(params.delta > 0 && params.delta <= 1))
                throw ParameterError("delta must lie in (0, 1]");
            break;
        case PrimKind::Lxh:
        case PrimKind::Hxl:
            if (children.size() != 3) throw DimensionError("lxh/hxl take (t, mu, x)");
            params.interval.validate();
            break;
        case PrimKind::OdeSolution:
            if (children.size() != 1) throw DimensionError("ode solution expects one (time) child");
            if (!params.ode) throw ParameterError("ode solution node needs a system");
            if (!params.ode_cache) params.ode_cache = std::make_shared<OdeSolutionCache>();
            break;
    }
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::Prim;
    e->prim = kind;
    e->arity = children.empty() ? 0 : children[0]->arity;
    e->params = std::move(params);
    e->contains_exp = (kind == PrimKind::Exp) || any_exp(children);
    e->children = std::move(children);
    return finish(e);
}

ExprPtr make_sin(ExprPtr u) { return build_primitive(PrimKind::Sin, {}, {std::move(u)}); }
ExprPtr make_cos(ExprPtr u) { return build_primitive(PrimKind::Cos, {}, {std::move(u)}); }
ExprPtr make_tanh(ExprPtr u) { return build_primitive(PrimKind::Tanh, {}, {std::move(u)}); }

ExprPtr make_exp(ExprPtr u, bool acknowledge_unbounded) {
    return build_primitive(PrimKind::Exp, {}, {std::move(u)}, acknowledge_unbounded);
}

ExprPtr make_norm(const Rational& delta, std::vector<ExprPtr> components) {
    PrimParams p;
    p.delta = delta;
    return build_primitive(PrimKind::Norm, std::move(p), std::move(components));
}

ExprPtr make_mx(const Rational& delta, std::vector<ExprPtr> components) {
    PrimParams p;
    p.delta = delta;
    return build_primitive(PrimKind::Mx, std::move(p), std::move(components));
}

ExprPtr make_lxh(const RationalInterval& I, ExprPtr t, ExprPtr mu, ExprPtr x) {
    PrimParams p;
    p.interval = I;
    return build_primitive(PrimKind::Lxh, std::move(p), {std::move(t), std::move(mu), std::move(x)});
}

ExprPtr make_hxl(const RationalInterval& I, ExprPtr t, ExprPtr mu, ExprPtr x) {
    PrimParams p;
    p.interval = I;
    return build_primitive(PrimKind::Hxl, std::move(p), {std::move(t), std::move(mu), std::move(x)});
}

ExprPtr substitute(const ExprPtr& e, const std::vector<ExprPtr>& replacement) {
    switch (e->kind) {
        case ExprKind::Var:
            if (e->var_index >= static_cast<int>(replacement.size()))
                throw DimensionError("substitution misses argument " + std::to_string(e->var_index + 1));
            return replacement[e->var_index];
        case ExprKind::Time: {
            int arity = replacement.empty() ? 0 : replacement[0]->arity;
            return make_time(arity);
        }
        case ExprKind::Const: {
            int arity = replacement.empty() ? 0 : replacement[0]->arity;
            return make_const(arity, e->value);
        }
        default:
            break;
    }
    std::vector<ExprPtr> ch;
    ch.reserve(e->children.size());
    for (const auto& c : e->children) ch.push_back(substitute(c, replacement));
    switch (e->kind) {
        case ExprKind::Poly:
            return make_poly(e->poly, std::move(ch));
        case ExprKind::Add:
            return make_add(ch[0], ch[1]);
        case ExprKind::Sub:
            return make_sub(ch[0], ch[1]);
        case ExprKind::Mul:
            return make_mul(ch[0], ch[1]);
        case ExprKind::Prim:
            return build_primitive(e->prim, e->params, std::move(ch),
                                   e->prim == PrimKind::Exp ? true : false);
        default:
            throw UnsupportedError("substitute: unexpected node");
    }
}

ExprPtr with_arity(const ExprPtr& e, int arity) {
    if (e->arity == arity) return e;
    switch (e->kind) {
        case ExprKind::Var:
            return make_var(arity, e->var_index);
        case ExprKind::Time:
            return make_time(arity);
        case ExprKind::Const:
            return make_const(arity, e->value);
        default:
            break;
    }
    std::vector<ExprPtr> ch;
    ch.reserve(e->children.size());
    for (const auto& c : e->children) ch.push_back(with_arity(c, arity));
    switch (e->kind) {
        case ExprKind::Poly:
            return make_poly(e->poly, std::move(ch));
        case ExprKind::Add:
            return make_add(ch[0], ch[1]);
        case ExprKind::Sub:
            return make_sub(ch[0], ch[1]);
        case ExprKind::Mul:
            return make_mul(ch[0], ch[1]);
        case ExprKind::Prim:
            return build_primitive(e->prim, e->params, std::move(ch), true);
        default:
            throw UnsupportedError("with_arity: unexpected node");
    }
}

ExprPtr compose_generable(ComposeOp op, const ExprPtr& f, const ExprPtr& g) {
    switch (op) {
        case ComposeOp::add:
            return make_add(f, g);
        case ComposeOp::sub:
            return make_sub(f, g);
        case ComposeOp::mul:
            return make_mul(f, g);
        case ComposeOp::compose:
            if (f->arity != 1)
                throw DimensionError("compose with a single inner expression needs unary f");
            return substitute(f, {g});
    }
    throw UnsupportedError("unknown compose op");
}

ExprPtr compose_generable(const ExprPtr& f, const std::vector<ExprPtr>& args) {
    if (f->arity != static_cast<int>(args.size()))
        throw DimensionError("compose: output dim of g must equal input dim of f");
    return substitute(f, args);
}

// ----- desugaring -------------------------------------------------------

namespace {

// Smooth |u| with error budget gamma: u * tanh(2u / gamma). Underestimates
// |u| by at most gamma/(2e).
ExprPtr sabs(const Rational& gamma, const ExprPtr& u) {
    return make_mul(u, make_tanh(make_scale(Rational(2) / gamma, u)));
}

// max(a, b) within [max, max + gamma/8]: (a + b + sabs(a-b))/2 + gamma/8.
ExprPtr mx_pair(const Rational& gamma, const ExprPtr& a, const ExprPtr& b) {
    ExprPtr diff = make_sub(a, b);
    ExprPtr sum = make_add(make_add(a, b), sabs(gamma, diff));
    return make_add(make_scale(Rational(1, 2), sum), make_const(a->arity, gamma / 8));
}

ExprPtr mx_fold(const Rational& budget, std::vector<ExprPtr> items) {
    if (items.size() == 1) return items[0];
    int levels = 0;
    for (size_t n = items.size(); n > 1; n = (n + 1) / 2) ++levels;
    Rational per_level = budget / levels;
    while (items.size() > 1) {
        std::vector<ExprPtr> next;
        for (size_t i = 0; i + 1 < items.size(); i += 2)
            next.push_back(mx_pair(per_level, items[i], items[i + 1]));
        if (items.size() % 2 == 1) next.push_back(items.back());
        items = std::move(next);
    }
    return items[0];
}

ExprPtr desugar_norm(const Expr& e) {
    // norm_{inf,delta}(x) = mx_{delta/2}(sabs_{delta/2}(x_i)) + delta/4;
    // the compensation keeps the value at or above ||x||_inf while the
    // accumulated slack stays below delta.
    const Rational& delta = e.params.delta;
    std::vector<ExprPtr> comps;
    comps.reserve(e.children.size());
    for (const auto& c : e.children) comps.push_back(sabs(delta / 2, desugar(c)));
    ExprPtr folded = mx_fold(delta / 2, std::move(comps));
    return make_add(folded, make_const(e.arity, delta / 4));
}

ExprPtr desugar_mx(const Expr& e) {
    std::vector<ExprPtr> comps;
    comps.reserve(e.children.size());
    for (const auto& c : e.children) comps.push_back(desugar(c));
    return mx_fold(e.params.delta, std::move(comps));
}

ExprPtr desugar_lxh(const Expr& e, bool high_to_low) {
    // lxh_I(t, mu, x) = x (1 + tanh(s)) / 2,  s = nu (2(t-a)/(b-a) - 1),
    // nu = mu + ln(1 + x^2); hxl flips the sign of tanh(s).
    ExprPtr t = desugar(e.children[0]);
    ExprPtr mu = desugar(e.children[1]);
    ExprPtr x = desugar(e.children[2]);
    const Rational& a = e.params.interval.a;
    const Rational& b = e.params.interval.b;
    ExprPtr nu = make_add(mu, build_primitive(PrimKind::Log1pSq, {}, {x}));
    // s = nu * (2/(b-a) t - (2a/(b-a) + 1)) as a bivariate polynomial.
    MultiPoly sp(2);
    sp.add_term({1, 1}, Rational(2) / (b - a));
    sp.add_term({1, 0}, -(Rational(2) * a / (b - a) + 1));
    ExprPtr s = make_poly(std::move(sp), {nu, t});
    ExprPtr v = make_tanh(s);
    // x (1 +/- v) / 2
    MultiPoly val(2);
    val.add_term({1, 0}, Rational(1, 2));
    val.add_term({1, 1}, high_to_low ? Rational(-1, 2) : Rational(1, 2));
    return make_poly(std::move(val), {x, v});
}

} // namespace

ExprPtr desugar(const ExprPtr& e) {
    switch (e->kind) {
        case ExprKind::Var:
        case ExprKind::Time:
        case ExprKind::Const:
            return e;
        case ExprKind::Poly:
        case ExprKind::Add:
        case ExprKind::Sub:
        case ExprKind::Mul: {
            bool changed = false;
            std::vector<ExprPtr> ch;
            ch.reserve(e->children.size());
            for (const auto& c : e->children) {
                ch.push_back(desugar(c));
                changed |= ch.back() != c;
            }
            if (!changed) return e;
            switch (e->kind) {
                case ExprKind::Poly:
                    return make_poly(e->poly, std::move(ch));
                case ExprKind::Add:
                    return make_add(ch[0], ch[1]);
                case ExprKind::Sub:
                    return make_sub(ch[0], ch[1]);
                default:
                    return make_mul(ch[0], ch[1]);
            }
        }
        case ExprKind::Prim:
            switch (e->prim) {
                case PrimKind::Norm:
                    return desugar_norm(*e);
                case PrimKind::Mx:
                    return desugar_mx(*e);
                case PrimKind::Lxh:
                    return desugar_lxh(*e, false);
                case PrimKind::Hxl:
                    return desugar_lxh(*e, true);
                default: {
                    bool changed = false;
                    std::vector<ExprPtr> ch;
                    for (const auto& c : e->children) {
                        ch.push_back(desugar(c));
                        changed |= ch.back() != c;
                    }
                    if (!changed) return e;
                    return build_primitive(e->prim, e->params, std::move(ch), true);
                }
            }
    }
    throw UnsupportedError("desugar: unexpected node");
}

// ----- evaluation -------------------------------------------------------

double OdeSolutionCache::value_at(const Pivp& sys, double t0, double t, int output,
                                  const SolverConfig& cfg) {
    std::lock_guard<std::mutex> lock(mu_);
    double rel = t - t0;
    bool backward = rel < 0;
    double span = std::abs(rel);
    std::optional<Trace>& slot = backward ? backward_ : forward_;
    if (!slot || slot->t_end() < span || slot->status != TraceStatus::ok) {
        Pivp sim = sys;
        if (backward) {
            // Integrate the time-reversed field.
            PolyVector neg(sim.rhs.arity());
            for (const auto& p : sim.rhs.components()) neg.push_back(-p);
            sim.rhs = neg;
        }
        double horizon = std::max(span * 1.25, 1.0);
        slot = integrate(sim, {}, {}, {}, horizon, cfg);
        if (slot->t_end() < span)
            throw Error("ode solution simulation stopped early: " + slot->message);
    }
    if (span == 0) return slot->samples.front().y[output];
    return slot->state_at(span)[output];
}

namespace {

template <typename S>
struct EvalCtx {
    std::span<const S> args;
    S time;
    unsigned precision_bits;
};

template <typename S>
S eval_node(const ExprPtr& e, const EvalCtx<S>& ctx);

template <typename S>
S eval_prim(const ExprPtr& e, const EvalCtx<S>& ctx) {
    using std::cos;
    using std::exp;
    using std::log;
    using std::sin;
    using std::tanh;
    switch (e->prim) {
        case PrimKind::Sin:
            return sin(eval_node(e->children[0], ctx));
        case PrimKind::Cos:
            return cos(eval_node(e->children[0], ctx));
        case PrimKind::Tanh:
            return tanh(eval_node(e->children[0], ctx));
        case PrimKind::Exp:
            return exp(eval_node(e->children[0], ctx));
        case PrimKind::Log1pSq: {
            S u = eval_node(e->children[0], ctx);
            return log(S(1) + u * u);
        }
        case PrimKind::Inv:
            return S(1) / eval_node(e->children[0], ctx);
        case PrimKind::Norm:
        case PrimKind::Mx:
        case PrimKind::Lxh:
        case PrimKind::Hxl:
            // Macro primitives evaluate through their realizations so the
            // closed form and the lowered dynamics share one construction.
            return eval_node(desugar(e), ctx);
        case PrimKind::OdeSolution: {
            S u = eval_node(e->children[0], ctx);
            double value = e->params.ode_cache->value_at(
                *e->params.ode, e->params.ode_t0.convert_to<double>(), scalar_to_double(u),
                e->params.ode_output, e->params.ode_cfg);
            return S(value);
        }
    }
    throw UnsupportedError("eval: unknown primitive");
}

template <typename S>
S eval_node(const ExprPtr& e, const EvalCtx<S>& ctx) {
    switch (e->kind) {
        case ExprKind::Var:
            if (e->var_index >= static_cast<int>(ctx.args.size()))
                throw DimensionError("evaluation point misses argument " +
                                     std::to_string(e->var_index + 1));
            return ctx.args[e->var_index];
        case ExprKind::Time:
            return ctx.time;
        case ExprKind::Const:
            return scalar_from_rational<S>(e->value);
        case ExprKind::Add:
            return eval_node(e->children[0], ctx) + eval_node(e->children[1], ctx);
        case ExprKind::Sub:
            return eval_node(e->children[0], ctx) - eval_node(e->children[1], ctx);
        case ExprKind::Mul:
            return eval_node(e->children[0], ctx) * eval_node(e->children[1], ctx);
        case ExprKind::Poly: {
            std::vector<S> vals;
            vals.reserve(e->children.size());
            for (const auto& c : e->children) vals.push_back(eval_node(c, ctx));
            return e->poly.eval_as<S>(vals);
        }
        case ExprKind::Prim:
            return eval_prim(e, ctx);
    }
    throw UnsupportedError("eval: unexpected node");
}

} // namespace

double eval_expr(const ExprPtr& e, std::span<const double> args, double time) {
    EvalCtx<double> ctx{args, time, 53};
    return eval_node(e, ctx);
}

Real eval_expr(const ExprPtr& e, std::span<const Real> args, const Real& time,
               unsigned precision_bits) {
    PrecisionGuard guard(precision_bits);
    EvalCtx<Real> ctx{args, time, precision_bits};
    return eval_node(e, ctx);
}

// Entry point used by the solver for auxiliary initial values.
Real eval_expr_real(const ExprPtr& e, std::span<const Real> args, unsigned precision_bits) {
    return eval_expr(e, args, Real(0), precision_bits);
}

std::string Expr::to_string() const {
    std::ostringstream out;
    switch (kind) {
        case ExprKind::Var:
            out << "y" << (var_index + 1);
            break;
        case ExprKind::Time:
            out << "t";
            break;
        case ExprKind::Const:
            out << rational_to_string(value);
            break;
        case ExprKind::Add:
            out << "(" << children[0]->to_string() << " + " << children[1]->to_string() << ")";
            break;
        case ExprKind::Sub:
            out << "(" << children[0]->to_string() << " - " << children[1]->to_string() << ")";
            break;
        case ExprKind::Mul:
            out << "(" << children[0]->to_string() << " * " << children[1]->to_string() << ")";
            break;
        case ExprKind::Poly: {
            out << "poly[" << poly.to_string("c") << "](";
            for (size_t i = 0; i < children.size(); ++i)
                out << (i ? ", " : "") << children[i]->to_string();
            out << ")";
            break;
        }
        case ExprKind::Prim: {
            static const char* names[] = {"sin", "cos", "tanh",     "exp", "norm", "mx",
                                          "lxh", "hxl", "log1p_sq", "inv", "ode"};
            out << names[static_cast<int>(prim)];
            if (prim == PrimKind::Norm || prim == PrimKind::Mx)
                out << "[delta=" << rational_to_string(params.delta) << "]";
            if (prim == PrimKind::Lxh || prim == PrimKind::Hxl)
                out << "[I=(" << rational_to_string(params.interval.a) << ","
                    << rational_to_string(params.interval.b) << ")]";
            out << "(";
            for (size_t i = 0; i < children.size(); ++i)
                out << (i ? ", " : "") << children[i]->to_string();
            out << ")";
            break;
        }
    }
    return out.str();
}

} // namespace polyode
