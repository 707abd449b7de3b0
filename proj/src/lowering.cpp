#include "polyode/lowering.hpp"

#include <map>
#include <set>
#include <unordered_map>

namespace polyode {

void LoweringCert::validate() const {
    std::set<int> seen;
    for (const auto& e : entries) {
        for (int s : e.slots) {
            if (s < 0 || s >= lowered_dim) throw DimensionError("certificate slot out of range");
            if (!seen.insert(s).second) throw DimensionError("certificate slots not distinct");
        }
    }
}

namespace {

// Structural key for sharing auxiliary variables between identical
// primitive subtrees (one sin/cos pair per distinct argument, etc.).
std::string node_key(const ExprPtr& e) {
    std::string s;
    switch (e->kind) {
        case ExprKind::Var:
            return "v" + std::to_string(e->var_index);
        case ExprKind::Time:
            return "t";
        case ExprKind::Const:
            return "c" + rational_to_string(e->value);
        case ExprKind::Add:
            s = "(+";
            break;
        case ExprKind::Sub:
            s = "(-";
            break;
        case ExprKind::Mul:
            s = "(*";
            break;
        case ExprKind::Poly:
            s = "(p[" + e->poly.to_string() + "]";
            break;
        case ExprKind::Prim:
            s = "(#" + std::to_string(static_cast<int>(e->prim));
            if (e->prim == PrimKind::OdeSolution)
                s += "@" + std::to_string(reinterpret_cast<uintptr_t>(e->params.ode.get()));
            break;
    }
    for (const auto& c : e->children) s += " " + node_key(c);
    return s + ")";
}

class Lowerer {
public:
    Lowerer(const std::vector<ExprPtr>& rhs, const PolyVector& init_q, int input_arity,
            const std::map<int, ExprPtr>& init_overrides)
        : d_(static_cast<int>(rhs.size())), m_(input_arity), init_q_(init_q),
          init_overrides_(init_overrides) {
        roots_.reserve(rhs.size());
        for (const auto& r : rhs) {
            if (r->arity != d_ + m_)
                throw DimensionError("rhs expression arity must be states + inputs");
            if (r->contains_exp) {
                check_exp_acknowledged(r);
                uses_exp_ = true;
            }
            roots_.push_back(desugar(r));
        }
    }

    LoweredSystem run();

private:
    struct Aux {
        PrimKind kind;
        ExprPtr node; // desugared primitive node
        std::vector<int> slots;
    };

    static void check_exp_acknowledged(const ExprPtr& e) {
        if (e->kind == ExprKind::Prim && e->prim == PrimKind::Exp && !e->params.exp_acknowledged)
            throw UnsupportedError("exp node present without unbounded acknowledgement");
        for (const auto& c : e->children) check_exp_acknowledged(c);
    }

    // Pass 1: allocate auxiliary slots for every primitive node (shared by
    // structural equality) and discover Time usage.
    void assign(const ExprPtr& e) {
        if (e->kind == ExprKind::Time) {
            uses_time_ = true;
            return;
        }
        for (const auto& c : e->children) assign(c);
        if (e->kind != ExprKind::Prim) return;
        std::string key = share_key(e);
        if (slot_of_.count(key)) return;
        Aux aux;
        aux.kind = e->prim;
        aux.node = e;
        int n_slots = 0;
        switch (e->prim) {
            case PrimKind::Tanh:
            case PrimKind::Exp:
            case PrimKind::Inv:
                n_slots = 1;
                break;
            case PrimKind::Sin:
            case PrimKind::Cos:
                n_slots = 2; // (sin, cos) pair shared by both kinds
                break;
            case PrimKind::Log1pSq:
                n_slots = 2; // (ln(1+u^2), 1/(1+u^2))
                break;
            case PrimKind::OdeSolution:
                n_slots = e->params.ode->dim;
                break;
            default:
                throw UnsupportedError("primitive survived desugaring unexpectedly");
        }
        for (int i = 0; i < n_slots; ++i) aux.slots.push_back(next_slot_++);
        slot_of_[key] = static_cast<int>(aux_.size());
        aux_.push_back(std::move(aux));
    }

    // For sin/cos the structural key must identify the *pair*, i.e. the
    // argument, not the node kind.
    std::string share_key(const ExprPtr& e) const {
        if (e->kind == ExprKind::Prim && (e->prim == PrimKind::Sin || e->prim == PrimKind::Cos))
            return "sincos " + node_key(e->children[0]);
        return node_key(e);
    }

    int aux_index(const ExprPtr& e) const {
        auto it = slot_of_.find(share_key(e));
        if (it == slot_of_.end()) throw Error("internal: primitive not assigned");
        return it->second;
    }

    MultiPoly var(int slot) const { return MultiPoly::variable(n_args_, slot); }

    // Pass 2: polynomial value of a node over the lowered argument space.
    MultiPoly val(const ExprPtr& e) {
        auto it = val_memo_.find(e.get());
        if (it != val_memo_.end()) return it->second;
        MultiPoly out;
        switch (e->kind) {
            case ExprKind::Var:
                out = e->var_index < d_ ? var(e->var_index) : var(D_ + (e->var_index - d_));
                break;
            case ExprKind::Time:
                out = var(clock_slot_);
                break;
            case ExprKind::Const:
                out = MultiPoly::constant(n_args_, e->value);
                break;
            case ExprKind::Add:
                out = val(e->children[0]) + val(e->children[1]);
                break;
            case ExprKind::Sub:
                out = val(e->children[0]) - val(e->children[1]);
                break;
            case ExprKind::Mul:
                out = val(e->children[0]) * val(e->children[1]);
                break;
            case ExprKind::Poly: {
                std::vector<MultiPoly> args;
                args.reserve(e->children.size());
                for (const auto& c : e->children) args.push_back(val(c));
                out = e->poly.compose(args);
                break;
            }
            case ExprKind::Prim: {
                const Aux& aux = aux_[aux_index(e)];
                switch (e->prim) {
                    case PrimKind::Sin:
                        out = var(aux.slots[0]);
                        break;
                    case PrimKind::Cos:
                        out = var(aux.slots[1]);
                        break;
                    case PrimKind::Tanh:
                    case PrimKind::Exp:
                    case PrimKind::Inv:
                        out = var(aux.slots[0]);
                        break;
                    case PrimKind::Log1pSq:
                        out = var(aux.slots[0]);
                        break;
                    case PrimKind::OdeSolution:
                        out = var(aux.slots[e->params.ode_output]);
                        break;
                    default:
                        throw UnsupportedError("unexpected primitive");
                }
                break;
            }
        }
        val_memo_.emplace(e.get(), out);
        return out;
    }

    // Pass 3: polynomial for d/dt of a node along trajectories.
    MultiPoly dval(const ExprPtr& e) {
        auto it = dval_memo_.find(e.get());
        if (it != dval_memo_.end()) return it->second;
        MultiPoly out;
        switch (e->kind) {
            case ExprKind::Var:
                if (e->var_index < d_) {
                    out = root_vals_[e->var_index];
                } else {
                    uses_input_derivs_ = true;
                    out = var(D_ + m_ + (e->var_index - d_));
                }
                break;
            case ExprKind::Time:
                out = MultiPoly::constant(n_args_, 1);
                break;
            case ExprKind::Const:
                out = MultiPoly::zero(n_args_);
                break;
            case ExprKind::Add:
                out = dval(e->children[0]) + dval(e->children[1]);
                break;
            case ExprKind::Sub:
                out = dval(e->children[0]) - dval(e->children[1]);
                break;
            case ExprKind::Mul:
                out = val(e->children[0]) * dval(e->children[1]) +
                      val(e->children[1]) * dval(e->children[0]);
                break;
            case ExprKind::Poly: {
                std::vector<MultiPoly> args;
                args.reserve(e->children.size());
                for (const auto& c : e->children) args.push_back(val(c));
                out = MultiPoly::zero(n_args_);
                for (size_t k = 0; k < e->children.size(); ++k) {
                    MultiPoly dk = e->poly.partial_derivative(static_cast<int>(k));
                    if (dk.is_zero()) continue;
                    out = out + dk.compose(args) * dval(e->children[k]);
                }
                break;
            }
            case ExprKind::Prim: {
                const Aux& aux = aux_[aux_index(e)];
                switch (e->prim) {
                    case PrimKind::Tanh: {
                        // v' = (1 - v^2) u'
                        MultiPoly v = var(aux.slots[0]);
                        out = (MultiPoly::constant(n_args_, 1) - v * v) * dval(e->children[0]);
                        break;
                    }
                    case PrimKind::Sin:
                        out = var(aux.slots[1]) * dval(e->children[0]);
                        break;
                    case PrimKind::Cos:
                        out = -var(aux.slots[0]) * dval(e->children[0]);
                        break;
                    case PrimKind::Exp:
                        out = var(aux.slots[0]) * dval(e->children[0]);
                        break;
                    case PrimKind::Inv: {
                        MultiPoly w = var(aux.slots[0]);
                        out = -(w * w) * dval(e->children[0]);
                        break;
                    }
                    case PrimKind::Log1pSq: {
                        // L' = 2 u R u',  R = 1/(1+u^2)
                        MultiPoly u = val(e->children[0]);
                        out = u * var(aux.slots[1]) * dval(e->children[0]).scaled(2);
                        break;
                    }
                    case PrimKind::OdeSolution: {
                        const Pivp& inner = *e->params.ode;
                        std::vector<int> mapping(aux.slots.begin(), aux.slots.end());
                        MultiPoly row = inner.rhs[e->params.ode_output].remap(n_args_, mapping);
                        out = row * dval(e->children[0]);
                        break;
                    }
                    default:
                        throw UnsupportedError("unexpected primitive");
                }
                break;
            }
        }
        dval_memo_.emplace(e.get(), out);
        return out;
    }

    // Initial-value expression of a node over [init args..., inputs(0)...].
    ExprPtr init_expr(const ExprPtr& e) const {
        int n = init_q_.arity();
        std::vector<ExprPtr> repl;
        repl.reserve(d_ + m_);
        for (int i = 0; i < d_; ++i) {
            auto ov = init_overrides_.find(i);
            if (ov != init_overrides_.end())
                repl.push_back(with_arity(ov->second, n + m_));
            else
                repl.push_back(
                    make_poly(init_q_[i].remap(n + m_, identity_map(n)), arg_vars(n + m_)));
        }
        for (int j = 0; j < m_; ++j) repl.push_back(make_var(n + m_, n + j));
        ExprPtr shifted = substitute(e, repl);
        return zero_time(shifted);
    }

    static std::vector<int> identity_map(int n) {
        std::vector<int> m(n);
        for (int i = 0; i < n; ++i) m[i] = i;
        return m;
    }

    static std::vector<ExprPtr> arg_vars(int arity) {
        std::vector<ExprPtr> v;
        v.reserve(arity);
        for (int i = 0; i < arity; ++i) v.push_back(make_var(arity, i));
        return v;
    }

    static ExprPtr zero_time(const ExprPtr& e) {
        if (e->kind == ExprKind::Time) return make_const(e->arity, 0);
        if (e->children.empty()) return e;
        std::vector<ExprPtr> ch;
        bool changed = false;
        for (const auto& c : e->children) {
            ch.push_back(zero_time(c));
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
            case ExprKind::Mul:
                return make_mul(ch[0], ch[1]);
            case ExprKind::Prim:
                return build_primitive(e->prim, e->params, std::move(ch), true);
            default:
                return e;
        }
    }

    int d_, m_;
    PolyVector init_q_;
    std::map<int, ExprPtr> init_overrides_;
    std::vector<ExprPtr> roots_;
    std::vector<Aux> aux_;
    std::unordered_map<std::string, int> slot_of_;
    std::unordered_map<const Expr*, MultiPoly> val_memo_, dval_memo_;
    std::vector<MultiPoly> root_vals_;
    int next_slot_ = 0;
    int D_ = 0, n_args_ = 0, clock_slot_ = -1;
    bool uses_time_ = false, uses_exp_ = false, uses_input_derivs_ = false;
};

LoweredSystem Lowerer::run() {
    next_slot_ = d_;
    for (const auto& r : roots_) assign(r);
    clock_slot_ = uses_time_ ? next_slot_++ : -1;
    D_ = next_slot_;
    n_args_ = D_ + 2 * m_; // deriv slots trimmed afterwards when unused

    // Values first (they only need values), then the semantic rhs, then
    // auxiliary derivatives which may reference any root value.
    root_vals_.reserve(d_);
    for (const auto& r : roots_) root_vals_.push_back(val(r));

    PolyVector rhs(n_args_);
    for (int i = 0; i < d_; ++i) rhs.push_back(root_vals_[i]);

    std::vector<MultiPoly> aux_rhs(D_ - d_, MultiPoly::zero(n_args_));
    auto slot_rhs = [&](int slot) -> MultiPoly& { return aux_rhs[slot - d_]; };
    if (uses_time_) slot_rhs(clock_slot_) = MultiPoly::constant(n_args_, 1);

    for (const auto& aux : aux_) {
        const ExprPtr& node = aux.node;
        switch (aux.kind) {
            case PrimKind::Tanh: {
                MultiPoly v = var(aux.slots[0]);
                slot_rhs(aux.slots[0]) =
                    (MultiPoly::constant(n_args_, 1) - v * v) * dval(node->children[0]);
                break;
            }
            case PrimKind::Sin:
            case PrimKind::Cos: {
                MultiPoly du = dval(node->children[0]);
                slot_rhs(aux.slots[0]) = var(aux.slots[1]) * du;
                slot_rhs(aux.slots[1]) = -var(aux.slots[0]) * du;
                break;
            }
            case PrimKind::Exp:
                slot_rhs(aux.slots[0]) = var(aux.slots[0]) * dval(node->children[0]);
                break;
            case PrimKind::Inv: {
                MultiPoly w = var(aux.slots[0]);
                slot_rhs(aux.slots[0]) = -(w * w) * dval(node->children[0]);
                break;
            }
            case PrimKind::Log1pSq: {
                MultiPoly u = val(node->children[0]);
                MultiPoly R = var(aux.slots[1]);
                MultiPoly du = dval(node->children[0]);
                slot_rhs(aux.slots[0]) = u * R * du.scaled(2);
                slot_rhs(aux.slots[1]) = -(u * R * R * du.scaled(2));
                break;
            }
            case PrimKind::OdeSolution: {
                const Pivp& inner = *node->params.ode;
                if (inner.input_arity != 0)
                    throw UnsupportedError("ode solution nodes must wrap autonomous systems");
                std::vector<int> mapping(aux.slots.begin(), aux.slots.end());
                MultiPoly du = dval(node->children[0]);
                for (int i = 0; i < inner.dim; ++i)
                    slot_rhs(aux.slots[i]) = inner.rhs[i].remap(n_args_, mapping) * du;
                break;
            }
            default:
                throw UnsupportedError("unexpected primitive");
        }
    }
    for (const auto& p : aux_rhs) rhs.push_back(p);

    Pivp pivp;
    pivp.dim = D_;
    pivp.input_arity = m_;
    pivp.input_derivatives = uses_input_derivs_;
    if (!uses_input_derivs_ && m_ > 0) {
        // Deriv slots unused: drop them from the argument space.
        std::vector<int> mapping(n_args_);
        for (int i = 0; i < D_ + m_; ++i) mapping[i] = i;
        for (int j = 0; j < m_; ++j) mapping[D_ + m_ + j] = 0; // unused anyway
        rhs = rhs.remap(D_ + m_, mapping);
    } else if (m_ == 0) {
        std::vector<int> mapping(n_args_);
        for (int i = 0; i < D_; ++i) mapping[i] = i;
        rhs = rhs.remap(D_, mapping);
    }
    pivp.rhs = rhs;

    // Initial state: semantic block from init_q, clock at zero, auxiliary
    // values by closed-form evaluation at t = 0.
    int n = init_q_.arity();
    PolyVector init(n);
    for (int i = 0; i < d_; ++i) init.push_back(init_q_[i]);
    for (int i = d_; i < D_; ++i) init.push_back(MultiPoly::zero(n));
    pivp.init = init;
    for (const auto& [state, expr] : init_overrides_) {
        if (state < 0 || state >= d_) throw DimensionError("init override index out of range");
        pivp.aux_init.push_back({state, with_arity(expr, n + m_)});
    }
    for (const auto& aux : aux_) {
        switch (aux.kind) {
            case PrimKind::Tanh:
            case PrimKind::Exp:
            case PrimKind::Inv:
                pivp.aux_init.push_back({aux.slots[0], init_expr(aux.node)});
                break;
            case PrimKind::Sin:
            case PrimKind::Cos: {
                ExprPtr u0 = init_expr(aux.node->children[0]);
                pivp.aux_init.push_back({aux.slots[0], make_sin(u0)});
                pivp.aux_init.push_back({aux.slots[1], make_cos(u0)});
                break;
            }
            case PrimKind::Log1pSq: {
                ExprPtr u0 = init_expr(aux.node->children[0]);
                pivp.aux_init.push_back(
                    {aux.slots[0], build_primitive(PrimKind::Log1pSq, {}, {u0})});
                // R = 1/(1+u^2) = exp(-ln(1+u^2)); expressed via its own node
                // to avoid a division primitive.
                ExprPtr L = build_primitive(PrimKind::Log1pSq, {}, {u0});
                ExprPtr negL = make_scale(Rational(-1), L);
                pivp.aux_init.push_back({aux.slots[1], make_exp(negL, true)});
                break;
            }
            case PrimKind::OdeSolution: {
                ExprPtr u0 = init_expr(aux.node->children[0]);
                for (int i = 0; i < static_cast<int>(aux.slots.size()); ++i) {
                    PrimParams p = aux.node->params;
                    p.ode_output = i;
                    pivp.aux_init.push_back(
                        {aux.slots[i], build_primitive(PrimKind::OdeSolution, std::move(p), {u0})});
                }
                break;
            }
            default:
                break;
        }
    }
    for (int i = 0; i < d_; ++i) pivp.outputs.push_back(i);
    pivp.validate();

    LoweringCert cert;
    cert.semantic_dim = d_;
    cert.lowered_dim = D_;
    cert.aux_count = D_ - d_;
    cert.uses_time = uses_time_;
    cert.uses_exp = uses_exp_;
    for (const auto& aux : aux_)
        cert.entries.push_back({aux.kind, aux.node->to_string(), aux.slots});
    cert.validate();
    return {std::move(pivp), std::move(cert)};
}

} // namespace

LoweredSystem lower_to_pivp(const std::vector<ExprPtr>& rhs, const PolyVector& init_q,
                            int input_arity, const std::map<int, ExprPtr>& init_overrides) {
    if (rhs.empty()) throw DimensionError("lowering needs at least one equation");
    if (init_q.size() != static_cast<int>(rhs.size()))
        throw DimensionError("init must provide one polynomial per state");
    Lowerer lw(rhs, init_q, input_arity, init_overrides);
    return lw.run();
}

ExprPtr ode_closure(const std::vector<ExprPtr>& f, const Rational& t0,
                    const std::vector<Rational>& y0, int output, const SolverConfig& cfg) {
    if (f.size() != y0.size()) throw DimensionError("ode_closure: y0 size must match system size");
    if (output < 0 || output >= static_cast<int>(f.size()))
        throw DimensionError("ode_closure: output index out of range");
    PolyVector init(0);
    for (const auto& v : y0) init.push_back(MultiPoly::constant(0, v));
    LoweredSystem lowered = lower_to_pivp(f, init, 0);
    PrimParams params;
    params.ode = std::make_shared<const Pivp>(std::move(lowered.pivp));
    params.ode_output = output;
    params.ode_t0 = t0;
    params.ode_cfg = cfg;
    return build_primitive(PrimKind::OdeSolution, std::move(params), {make_time(0)});
}

} // namespace polyode
