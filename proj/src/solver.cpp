#include "polyode/solver.hpp"

#include "polyode/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace polyode {

// Defined in expr.cpp; kept as a free declaration so the solver does not
// depend on the expression headers.
Real eval_expr_real(const ExprPtr& e, std::span<const Real> args, unsigned precision_bits);

void SolverConfig::validate() const {
    if (order < 2) throw ParameterError("solver order must be >= 2");
    if (abs_tol <= 0 || rel_tol <= 0) throw ParameterError("tolerances must be positive");
    if (!(min_step < max_step)) throw ParameterError("min_step must be below max_step");
    if (precision_bits < 53) throw ParameterError("precision must be >= 53 bits");
    if (method == Method::embedded_pair && order != 5)
        throw ParameterError("embedded-pair method is the Dormand-Prince 5(4) pair; order must be 5");
}

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol,
                        int max_depth) {
    struct Rec {
        const std::function<double(double)>& f;
        double tol;
        double run(double a, double fa, double m, double fm, double b, double fb, double whole,
                   int depth) {
            double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
            double flm = f(lm), frm = f(rm);
            double left = (m - a) / 6 * (fa + 4 * flm + fm);
            double right = (b - m) / 6 * (fm + 4 * frm + fb);
            if (depth <= 0 || std::abs(left + right - whole) < 15 * tol)
                return left + right + (left + right - whole) / 15;
            return run(a, fa, lm, flm, m, fm, left, depth - 1) +
                   run(m, fm, rm, frm, b, fb, right, depth - 1);
        }
    };
    if (!(b > a)) return 0;
    double m = 0.5 * (a + b);
    double fa = f(a), fm = f(m), fb = f(b);
    double whole = (b - a) / 6 * (fa + 4 * fm + fb);
    Rec rec{f, tol};
    return rec.run(a, fa, m, fm, b, fb, whole, max_depth);
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------
// Tape: the right-hand side flattened into binary products plus per-state
// linear accumulations, so Taylor coefficients come out of convolutions.
// Slot layout: [states | input values | input derivatives | perturbations
// | one | products...].
// ---------------------------------------------------------------------
struct Tape {
    struct Op {
        int dst, a, b;
    };
    struct Term {
        Rational coeff;
        int slot;
    };

    int dim = 0, n_inputs = 0, n_perturb = 0;
    bool derivs = false;
    int n_args = 0, one_slot = 0, n_slots = 0;
    std::vector<Op> ops;
    std::vector<std::vector<Term>> comp;

    int mul(int a, int b, std::map<std::pair<int, int>, int>& cache) {
        if (a > b) std::swap(a, b);
        auto it = cache.find({a, b});
        if (it != cache.end()) return it->second;
        int dst = n_slots++;
        ops.push_back({dst, a, b});
        cache.emplace(std::make_pair(a, b), dst);
        return dst;
    }

    int power(int arg, uint32_t e, std::map<std::pair<int, uint32_t>, int>& pcache,
              std::map<std::pair<int, int>, int>& mcache) {
        if (e == 1) return arg;
        auto it = pcache.find({arg, e});
        if (it != pcache.end()) return it->second;
        int half = power(arg, e / 2, pcache, mcache);
        int slot = (e % 2 == 0) ? mul(half, half, mcache)
                                : mul(mul(half, half, mcache), arg, mcache);
        pcache.emplace(std::make_pair(arg, e), slot);
        return slot;
    }

    void build(const PolyVector& rhs, int dim_, int n_inputs_, bool derivs_, int n_perturb_) {
        dim = dim_;
        n_inputs = n_inputs_;
        derivs = derivs_;
        n_perturb = n_perturb_;
        int rhs_args = dim + n_inputs * (derivs ? 2 : 1);
        if (rhs.arity() != rhs_args) throw DimensionError("tape: rhs arity mismatch");
        n_args = rhs_args + n_perturb;
        one_slot = n_args;
        n_slots = n_args + 1;
        comp.assign(dim, {});

        std::map<std::pair<int, uint32_t>, int> pcache;
        std::map<std::pair<int, int>, int> mcache;
        for (int i = 0; i < dim; ++i) {
            for (const auto& [e, c] : rhs[i].terms()) {
                int slot = -1;
                for (int a = 0; a < rhs_args; ++a) {
                    if (e[a] == 0) continue;
                    int p = power(a, e[a], pcache, mcache);
                    slot = slot < 0 ? p : mul(slot, p, mcache);
                }
                if (slot < 0) slot = one_slot;
                comp[i].push_back({c, slot});
            }
            if (n_perturb > 0) comp[i].push_back({Rational(1), rhs_args + i});
        }
    }
};

template <typename S>
struct TapeRun {
    const Tape& tape;
    int order;
    std::vector<std::vector<S>> series; // [slot][0..order]
    std::vector<std::vector<S>> coeffs; // converted term coefficients per state

    TapeRun(const Tape& t, int ord) : tape(t), order(ord) {
        series.assign(tape.n_slots, std::vector<S>(order + 1, S(0)));
        coeffs.resize(tape.dim);
        for (int i = 0; i < tape.dim; ++i)
            for (const auto& term : tape.comp[i])
                coeffs[i].push_back(scalar_from_rational<S>(term.coeff));
    }

    void reset() {
        for (auto& s : series) std::fill(s.begin(), s.end(), S(0));
        series[tape.one_slot][0] = S(1);
    }

    /// Fills state coefficients 1..order given coefficient 0 and the input
    /// / perturbation series already loaded into their slots.
    void run() {
        for (int j = 0; j < order; ++j) {
            for (const auto& op : tape.ops) {
                S acc(0);
                const auto& a = series[op.a];
                const auto& b = series[op.b];
                for (int k = 0; k <= j; ++k) acc += a[k] * b[j - k];
                series[op.dst][j] = acc;
            }
            for (int i = 0; i < tape.dim; ++i) {
                S f(0);
                const auto& terms = tape.comp[i];
                for (size_t k = 0; k < terms.size(); ++k) f += coeffs[i][k] * series[terms[k].slot][j];
                series[i][j + 1] = f / S(j + 1);
            }
        }
    }
};

// Dense-series helpers (double side; meters and samples live in double).
double eval_series(const std::vector<double>& c, double s) {
    double acc = 0;
    for (size_t j = c.size(); j-- > 0;) acc = acc * s + c[j];
    return acc;
}

double eval_series_deriv(const std::vector<double>& c, double s) {
    double acc = 0;
    for (size_t j = c.size(); j-- > 1;) acc = acc * s + c[j] * static_cast<double>(j);
    return acc;
}

struct MeterState {
    double length = 0, space = 0, budget = 0;
};

double perturb_norm_at(const std::vector<InputSignal>& perturb, double t) {
    double m = 0;
    for (const auto& e : perturb) m = std::max(m, std::abs(e.value(t)));
    return m;
}

// Integrates meters across one accepted step given the dense coefficients
// (per-state polynomials in s over [0, h]).
void advance_meters(const std::vector<std::vector<double>>& dense_c, double t0, double h,
                    const std::vector<InputSignal>& perturb, double quad_tol, MeterState& m) {
    auto deriv_norm = [&](double s) {
        double n = 0;
        for (const auto& c : dense_c) n = std::max(n, std::abs(eval_series_deriv(c, s)));
        return n;
    };
    auto state_norm = [&](double s) {
        double n = 0;
        for (const auto& c : dense_c) n = std::max(n, std::abs(eval_series(c, s)));
        return n;
    };
    double seg = adaptive_simpson([&](double s) {
        m.space = std::max(m.space, state_norm(s));
        return deriv_norm(s);
    }, 0.0, h, quad_tol * std::max(h, 1e-6));
    m.length += seg;
    m.space = std::max(m.space, state_norm(h));
    if (!perturb.empty())
        m.budget += adaptive_simpson([&](double t) { return perturb_norm_at(perturb, t); }, t0, t0 + h,
                                     quad_tol * std::max(h, 1e-6));
}

std::vector<double> merged_breakpoints(const std::vector<InputSignal>& inputs,
                                       const std::vector<InputSignal>& perturb, double horizon,
                                       const std::vector<double>& extra) {
    std::vector<double> bp(extra);
    for (const auto& s : inputs) s.collect_breakpoints(horizon, bp);
    for (const auto& s : perturb) s.collect_breakpoints(horizon, bp);
    bp.erase(std::remove_if(bp.begin(), bp.end(), [&](double t) { return t <= 0 || t >= horizon; }),
             bp.end());
    std::sort(bp.begin(), bp.end());
    bp.erase(std::unique(bp.begin(), bp.end()), bp.end());
    bp.push_back(horizon);
    return bp;
}

// ---------------------------------------------------------------------
// Variable-step Taylor integration over one scalar type.
// ---------------------------------------------------------------------
template <typename S>
Trace integrate_taylor(const Pivp& system, const std::vector<InputSignal>& inputs,
                       const std::vector<InputSignal>& perturb, std::vector<S> y,
                       double horizon, const SolverConfig& cfg) {
    const int dim = system.dim;
    const int m = system.input_arity;
    const int n_perturb = perturb.empty() ? 0 : dim;

    Tape tape;
    tape.build(system.rhs, dim, m, system.input_derivatives, n_perturb);
    TapeRun<S> run(tape, cfg.order);

    Trace trace;
    trace.dim = dim;
    trace.outputs = system.outputs;

    auto breakpoints = merged_breakpoints(inputs, perturb, horizon, {});
    size_t next_bp = 0;

    MeterState meters;
    meters.budget = 0; // caller adds ||e0|| before the loop via init sample
    double quad_tol = std::max(1e-15, std::min(1e-10, cfg.abs_tol));

    double t = 0;
    std::vector<std::vector<double>> dense_c(dim, std::vector<double>(cfg.order + 1, 0.0));

    auto push_sample = [&](double tt, double deriv_norm) {
        TraceSample s;
        s.t = tt;
        s.y.resize(dim);
        for (int i = 0; i < dim; ++i) s.y[i] = scalar_to_double(y[i]);
        s.deriv_norm = deriv_norm;
        s.length = meters.length;
        s.space = meters.space;
        s.budget = meters.budget;
        trace.samples.push_back(std::move(s));
    };

    // Initial sample: derivative norm from a zero-length series run.
    {
        run.reset();
        for (int i = 0; i < dim; ++i) run.series[i][0] = y[i];
        for (int j = 0; j < m; ++j) {
            auto fit = inputs[j].local_fit(t, cfg.abs_tol);
            for (int k = 0; k < 4 && k <= cfg.order; ++k) run.series[dim + j][k] = S(fit.c[k]);
            if (system.input_derivatives)
                for (int k = 0; k < 3 && k <= cfg.order; ++k)
                    run.series[dim + m + j][k] = S(fit.c[k + 1] * (k + 1));
        }
        for (int j = 0; j < n_perturb; ++j) {
            auto fit = perturb[j].local_fit(t, cfg.abs_tol);
            for (int k = 0; k < 4 && k <= cfg.order; ++k)
                run.series[dim + m * (system.input_derivatives ? 2 : 1) + j][k] = S(fit.c[k]);
        }
        run.run();
        double dn = 0;
        for (int i = 0; i < dim; ++i) dn = std::max(dn, std::abs(scalar_to_double(run.series[i][1])));
        for (int i = 0; i < dim; ++i) meters.space = std::max(meters.space, std::abs(scalar_to_double(y[i])));
        push_sample(0.0, dn);
    }

    const double tiny = 1e-300;
    while (t < horizon) {
        if (horizon - t <= 1e-14 * std::max(1.0, horizon)) break;
        while (next_bp < breakpoints.size() && breakpoints[next_bp] <= t + 1e-15 * std::max(1.0, t))
            ++next_bp;
        double t_stop = next_bp < breakpoints.size() ? breakpoints[next_bp] : horizon;

        run.reset();
        for (int i = 0; i < dim; ++i) run.series[i][0] = y[i];
        double fit_cap = kInf;
        for (int j = 0; j < m; ++j) {
            auto fit = inputs[j].local_fit(t, cfg.abs_tol);
            fit_cap = std::min(fit_cap, fit.step_cap);
            for (int k = 0; k < 4 && k <= cfg.order; ++k) run.series[dim + j][k] = S(fit.c[k]);
            if (system.input_derivatives)
                for (int k = 0; k < 3 && k <= cfg.order; ++k)
                    run.series[dim + m + j][k] = S(fit.c[k + 1] * (k + 1));
        }
        for (int j = 0; j < n_perturb; ++j) {
            auto fit = perturb[j].local_fit(t, cfg.abs_tol);
            fit_cap = std::min(fit_cap, fit.step_cap);
            for (int k = 0; k < 4 && k <= cfg.order; ++k)
                run.series[dim + m * (system.input_derivatives ? 2 : 1) + j][k] = S(fit.c[k]);
        }
        run.run();

        // Radius-style step choice from the last two coefficient norms.
        double ynorm = 0;
        for (int i = 0; i < dim; ++i) ynorm = std::max(ynorm, std::abs(scalar_to_double(y[i])));
        double tol = cfg.abs_tol + cfg.rel_tol * ynorm;
        double h = std::min({cfg.max_step, fit_cap, t_stop - t});
        for (int j : {cfg.order - 1, cfg.order}) {
            double cj = 0;
            for (int i = 0; i < dim; ++i) cj = std::max(cj, std::abs(scalar_to_double(run.series[i][j])));
            if (cj > tiny) h = std::min(h, 0.9 * std::pow(tol / cj, 1.0 / j));
        }
        if (h < cfg.min_step) {
            trace.status = TraceStatus::stalled;
            trace.message = "step underflow at t=" + std::to_string(t);
            break;
        }

        for (int i = 0; i < dim; ++i)
            for (int jj = 0; jj <= cfg.order; ++jj) dense_c[i][jj] = scalar_to_double(run.series[i][jj]);

        // Advance the state in the working precision.
        S hs(h);
        for (int i = 0; i < dim; ++i) {
            S acc(0);
            for (int jj = cfg.order; jj >= 0; --jj) acc = acc * hs + run.series[i][jj];
            y[i] = acc;
        }

        advance_meters(dense_c, t, h, perturb, quad_tol, meters);
        if (cfg.dense) {
            DenseStep ds;
            ds.t0 = t;
            ds.h = h;
            ds.order = cfg.order;
            ds.coeffs.reserve(dim * (cfg.order + 1));
            for (int i = 0; i < dim; ++i)
                ds.coeffs.insert(ds.coeffs.end(), dense_c[i].begin(), dense_c[i].end());
            trace.dense.push_back(std::move(ds));
        }

        t += h;
        double dn = 0;
        for (int i = 0; i < dim; ++i) dn = std::max(dn, std::abs(eval_series_deriv(dense_c[i], h)));
        push_sample(t, dn);

        double ynew = 0;
        for (int i = 0; i < dim; ++i) ynew = std::max(ynew, std::abs(scalar_to_double(y[i])));
        if (ynew > cfg.blowup_threshold) {
            trace.status = TraceStatus::blowup;
            trace.message = "state norm exceeded blowup threshold at t=" + std::to_string(t);
            break;
        }
    }
    return trace;
}

} // namespace

// ---------------------------------------------------------------------
// Dormand-Prince 5(4) with cubic Hermite dense output, for callable RHS.
// ---------------------------------------------------------------------
Trace integrate_rhs(const RhsFn& f, int dim, const std::vector<double>& y0,
                    const std::vector<InputSignal>& perturb, double horizon, const SolverConfig& cfg,
                    const std::vector<double>& init_offset, const std::vector<double>& extra_breakpoints) {
    cfg.validate();
    if (static_cast<int>(y0.size()) != dim) throw DimensionError("integrate_rhs: y0 size mismatch");
    if (!perturb.empty() && static_cast<int>(perturb.size()) != dim)
        throw DimensionError("integrate_rhs: perturbation arity mismatch");
    if (!init_offset.empty() && static_cast<int>(init_offset.size()) != dim)
        throw DimensionError("integrate_rhs: init offset arity mismatch");

    static const double A[7][6] = {
        {},
        {1.0 / 5},
        {3.0 / 40, 9.0 / 40},
        {44.0 / 45, -56.0 / 15, 32.0 / 9},
        {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
        {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
        {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84}};
    static const double C[7] = {0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
    static const double E[7] = {35.0 / 384 - 5179.0 / 57600, 0.0, 500.0 / 1113 - 7571.0 / 16695,
                                125.0 / 192 - 393.0 / 640, -2187.0 / 6784 + 92097.0 / 339200,
                                11.0 / 84 - 187.0 / 2100, -1.0 / 40};

    auto rhs = [&](double t, const std::vector<double>& y, std::vector<double>& dy) {
        f(t, y, dy);
        for (size_t j = 0; j < perturb.size(); ++j) dy[j] += perturb[j].value(t);
    };

    Trace trace;
    trace.dim = dim;
    std::vector<double> y = y0;
    double e0 = 0;
    for (size_t i = 0; i < init_offset.size(); ++i) {
        y[i] += init_offset[i];
        e0 = std::max(e0, std::abs(init_offset[i]));
    }

    auto breakpoints = merged_breakpoints({}, perturb, horizon, extra_breakpoints);
    size_t next_bp = 0;

    MeterState meters;
    meters.budget = e0;
    double quad_tol = std::max(1e-15, std::min(1e-10, cfg.abs_tol));

    std::vector<double> k[7];
    for (auto& v : k) v.assign(dim, 0.0);
    std::vector<double> ytmp(dim), ynew(dim);

    rhs(0.0, y, k[0]);
    {
        TraceSample s;
        s.t = 0;
        s.y = y;
        s.deriv_norm = inf_norm(k[0]);
        s.space = inf_norm(y);
        s.budget = meters.budget;
        meters.space = s.space;
        trace.samples.push_back(s);
    }

    double t = 0;
    double h = std::min(cfg.max_step, horizon / 10);
    bool have_k0 = true;
    int rejects_in_row = 0;

    while (t < horizon) {
        if (horizon - t <= 1e-14 * std::max(1.0, horizon)) break;
        while (next_bp < breakpoints.size() && breakpoints[next_bp] <= t + 1e-15 * std::max(1.0, t))
            ++next_bp;
        double t_stop = next_bp < breakpoints.size() ? breakpoints[next_bp] : horizon;
        h = std::min(h, t_stop - t);
        if (h < cfg.min_step) {
            trace.status = TraceStatus::stalled;
            trace.message = "step underflow at t=" + std::to_string(t);
            break;
        }
        if (!have_k0) rhs(t, y, k[0]);
        for (int s = 1; s < 7; ++s) {
            for (int i = 0; i < dim; ++i) {
                double acc = 0;
                for (int q = 0; q < s; ++q) acc += A[s][q] * k[q][i];
                ytmp[i] = y[i] + h * acc;
            }
            rhs(t + C[s] * h, ytmp, k[s]);
        }
        // 5th order solution is stage-6 ytmp (FSAL); error from E weights.
        double err = 0;
        for (int i = 0; i < dim; ++i) {
            double ei = 0;
            for (int s = 0; s < 7; ++s) ei += E[s] * k[s][i];
            ei *= h;
            double scale = cfg.abs_tol + cfg.rel_tol * std::max(std::abs(y[i]), std::abs(ytmp[i]));
            err = std::max(err, std::abs(ei) / scale);
        }
        if (err > 1.0 && h > cfg.min_step * 2) {
            h = std::max(cfg.min_step, h * std::max(0.2, 0.9 * std::pow(err, -0.25)));
            have_k0 = true; // k0 still valid at (t, y)
            if (++rejects_in_row > 200) {
                trace.status = TraceStatus::stalled;
                trace.message = "persistent step rejection at t=" + std::to_string(t);
                break;
            }
            continue;
        }
        rejects_in_row = 0;
        ynew = ytmp;

        // Cubic Hermite dense coefficients over s in [0, h].
        std::vector<std::vector<double>> dense_c(dim, std::vector<double>(4, 0.0));
        for (int i = 0; i < dim; ++i) {
            double f0 = k[0][i], f1 = k[6][i], dy = ynew[i] - y[i];
            dense_c[i][0] = y[i];
            dense_c[i][1] = f0;
            dense_c[i][2] = (3 * dy / h - 2 * f0 - f1) / h;
            dense_c[i][3] = (f0 + f1 - 2 * dy / h) / (h * h);
        }
        advance_meters(dense_c, t, h, perturb, quad_tol, meters);
        if (cfg.dense) {
            DenseStep ds;
            ds.t0 = t;
            ds.h = h;
            ds.order = 3;
            for (int i = 0; i < dim; ++i)
                ds.coeffs.insert(ds.coeffs.end(), dense_c[i].begin(), dense_c[i].end());
            trace.dense.push_back(std::move(ds));
        }

        t += h;
        y = ynew;
        k[0] = k[6]; // FSAL
        have_k0 = true;

        TraceSample s;
        s.t = t;
        s.y = y;
        s.deriv_norm = inf_norm(k[0]);
        s.length = meters.length;
        s.space = meters.space;
        s.budget = meters.budget;
        trace.samples.push_back(s);

        if (inf_norm(y) > cfg.blowup_threshold) {
            trace.status = TraceStatus::blowup;
            trace.message = "state norm exceeded blowup threshold at t=" + std::to_string(t);
            break;
        }
        if (err > 1e-30) h = std::min(cfg.max_step, h * std::min(5.0, 0.9 * std::pow(err, -0.2)));
        else h = cfg.max_step;
    }
    return trace;
}

Trace integrate(const Pivp& system, const std::vector<InputSignal>& inputs,
                const std::vector<InputSignal>& perturbation, const std::vector<Rational>& x_arg,
                double horizon, const SolverConfig& cfg, const std::vector<double>& init_offset) {
    cfg.validate();
    system.validate();
    if (static_cast<int>(inputs.size()) != system.input_arity)
        throw DimensionError("integrate: expected " + std::to_string(system.input_arity) +
                             " input signals, got " + std::to_string(inputs.size()));
    if (!perturbation.empty() && static_cast<int>(perturbation.size()) != system.dim)
        throw DimensionError("integrate: perturbation must have one channel per state");
    if (!init_offset.empty() && static_cast<int>(init_offset.size()) != system.dim)
        throw DimensionError("integrate: init offset arity mismatch");
    if (horizon <= 0) throw ParameterError("integrate: horizon must be positive");
    if (static_cast<int>(x_arg.size()) != system.init.arity())
        throw DimensionError("integrate: init argument count mismatch");

    // Initial state: polynomial part exactly, auxiliary part numerically.
    unsigned init_bits = std::max(cfg.precision_bits, 64u);
    PrecisionGuard guard(init_bits);
    std::vector<Real> y0(system.dim);
    for (int i = 0; i < system.dim; ++i) y0[i] = Real(system.init[i].eval_exact(x_arg));
    if (!system.aux_init.empty()) {
        std::vector<Real> args;
        args.reserve(x_arg.size() + inputs.size());
        for (const auto& q : x_arg) args.push_back(Real(q));
        for (const auto& sig : inputs) args.push_back(Real(sig.value(0.0)));
        for (const auto& a : system.aux_init) y0[a.state] = eval_expr_real(a.expr, args, init_bits);
    }

    double e0 = 0;
    for (size_t i = 0; i < init_offset.size(); ++i) e0 = std::max(e0, std::abs(init_offset[i]));

    Trace trace;
    if (cfg.method == SolverConfig::Method::embedded_pair) {
        if (cfg.precision_bits > 53)
            throw UnsupportedError("embedded-pair path runs at double precision");
        std::vector<double> y0d(system.dim);
        for (int i = 0; i < system.dim; ++i) y0d[i] = y0[i].convert_to<double>();
        const Pivp* sys = &system;
        auto f = [sys, &inputs](double t, const std::vector<double>& y, std::vector<double>& dy) {
            std::vector<double> args = y;
            for (const auto& sig : inputs) args.push_back(sig.value(t));
            if (sys->input_derivatives)
                for (const auto& sig : inputs) args.push_back(sig.derivative(t));
            for (int i = 0; i < sys->dim; ++i) dy[i] = sys->rhs[i].eval_as<double>(args);
        };
        std::vector<double> extra_bp;
        for (const auto& sig : inputs) sig.collect_breakpoints(horizon, extra_bp);
        trace = integrate_rhs(f, system.dim, y0d, perturbation, horizon, cfg, init_offset, extra_bp);
        trace.outputs = system.outputs;
    } else if (cfg.precision_bits <= 53) {
        std::vector<double> y(system.dim);
        for (int i = 0; i < system.dim; ++i) y[i] = y0[i].convert_to<double>();
        for (size_t i = 0; i < init_offset.size(); ++i) y[i] += init_offset[i];
        trace = integrate_taylor<double>(system, inputs, perturbation, std::move(y), horizon, cfg);
    } else {
        PrecisionGuard run_guard(cfg.precision_bits);
        std::vector<Real> y(system.dim);
        for (int i = 0; i < system.dim; ++i) y[i] = Real(y0[i]);
        for (size_t i = 0; i < init_offset.size(); ++i) y[i] += Real(init_offset[i]);
        trace = integrate_taylor<Real>(system, inputs, perturbation, std::move(y), horizon, cfg);
    }
    // The embedded-pair path already folded ||e0|| into the budget meter.
    if (e0 > 0 && cfg.method == SolverConfig::Method::taylor)
        for (auto& s : trace.samples) s.budget += e0;
    return trace;
}

std::vector<std::vector<Real>> taylor_coefficients(const PolyVector& p, const std::vector<Real>& state,
                                                   int order, unsigned precision_bits) {
    if (p.arity() != static_cast<int>(state.size()))
        throw DimensionError("taylor_coefficients: state dimension != polynomial arity");
    if (p.size() != p.arity())
        throw DimensionError("taylor_coefficients: system must be square (autonomous)");
    PrecisionGuard guard(precision_bits);
    Tape tape;
    tape.build(p, p.size(), 0, false, 0);
    TapeRun<Real> run(tape, order);
    run.reset();
    for (int i = 0; i < p.size(); ++i) run.series[i][0] = Real(state[i]);
    run.run();
    std::vector<std::vector<Real>> out(p.size());
    for (int i = 0; i < p.size(); ++i)
        out[i].assign(run.series[i].begin(), run.series[i].end());
    return out;
}

// ---------------------------------------------------------------------
// Trace queries.
// ---------------------------------------------------------------------
namespace {

const DenseStep* find_dense(const std::vector<DenseStep>& dense, double t) {
    if (dense.empty()) return nullptr;
    // Binary search for the step containing t.
    size_t lo = 0, hi = dense.size();
    while (lo + 1 < hi) {
        size_t mid = (lo + hi) / 2;
        if (dense[mid].t0 <= t) lo = mid;
        else hi = mid;
    }
    const DenseStep& ds = dense[lo];
    if (t < ds.t0 - 1e-12 || t > ds.t0 + ds.h + 1e-9 * std::max(1.0, std::abs(t))) return nullptr;
    return &ds;
}

} // namespace

std::vector<double> Trace::state_at(double t) const {
    if (samples.empty()) throw ParameterError("empty trace");
    if (t <= samples.front().t) return samples.front().y;
    if (t >= samples.back().t) return samples.back().y;
    if (const DenseStep* ds = find_dense(dense, t)) {
        std::vector<double> y(dim);
        double s = t - ds->t0;
        for (int i = 0; i < dim; ++i) {
            const double* c = ds->coeffs.data() + i * (ds->order + 1);
            double acc = 0;
            for (int j = ds->order; j >= 0; --j) acc = acc * s + c[j];
            y[i] = acc;
        }
        return y;
    }
    // Linear fallback.
    size_t k = 1;
    while (k < samples.size() && samples[k].t < t) ++k;
    const auto& a = samples[k - 1];
    const auto& b = samples[k];
    double w = (t - a.t) / (b.t - a.t);
    std::vector<double> y(dim);
    for (int i = 0; i < dim; ++i) y[i] = a.y[i] + w * (b.y[i] - a.y[i]);
    return y;
}

std::vector<double> Trace::deriv_at(double t) const {
    if (const DenseStep* ds = find_dense(dense, t)) {
        std::vector<double> d(dim);
        double s = t - ds->t0;
        for (int i = 0; i < dim; ++i) {
            const double* c = ds->coeffs.data() + i * (ds->order + 1);
            double acc = 0;
            for (int j = ds->order; j >= 1; --j) acc = acc * s + c[j] * j;
            d[i] = acc;
        }
        return d;
    }
    throw ParameterError("derivative requested outside dense coverage");
}

TraceMetrics Trace::metrics_at(double t) const {
    if (samples.empty()) throw ParameterError("empty trace");
    if (t < samples.front().t - 1e-12 || t > samples.back().t + 1e-9 * std::max(1.0, std::abs(t)))
        throw ParameterError("metrics_at: t outside trace range");
    t = std::clamp(t, samples.front().t, samples.back().t);
    size_t k = 1;
    while (k < samples.size() && samples[k].t < t) ++k;
    if (k >= samples.size()) k = samples.size() - 1;
    const auto& a = samples[k - 1];
    const auto& b = samples[k];
    TraceMetrics mm;
    mm.time = t;
    if (t <= a.t + 1e-300) {
        mm.length = a.length;
        mm.space = a.space;
        mm.budget = a.budget;
        return mm;
    }
    if (const DenseStep* ds = find_dense(dense, std::nextafter(t, a.t))) {
        // Re-integrate the partial step so length/space stay quadrature-grade.
        double s1 = t - ds->t0;
        double space = a.space;
        auto deriv_norm = [&](double s) {
            double n = 0;
            for (int i = 0; i < dim; ++i) {
                const double* c = ds->coeffs.data() + i * (ds->order + 1);
                double acc = 0;
                for (int j = ds->order; j >= 1; --j) acc = acc * s + c[j] * j;
                n = std::max(n, std::abs(acc));
            }
            return n;
        };
        auto state_norm = [&](double s) {
            double n = 0;
            for (int i = 0; i < dim; ++i) {
                const double* c = ds->coeffs.data() + i * (ds->order + 1);
                double acc = 0;
                for (int j = ds->order; j >= 0; --j) acc = acc * s + c[j];
                n = std::max(n, std::abs(acc));
            }
            return n;
        };
        double seg = adaptive_simpson([&](double s) {
            space = std::max(space, state_norm(s));
            return deriv_norm(s);
        }, 0.0, s1, 1e-12 * std::max(s1, 1e-6));
        mm.length = a.length + seg;
        mm.space = std::max(space, state_norm(s1));
        double w = (t - a.t) / (b.t - a.t);
        mm.budget = a.budget + w * (b.budget - a.budget);
        return mm;
    }
    double w = (t - a.t) / (b.t - a.t);
    mm.length = a.length + w * (b.length - a.length);
    mm.space = std::max(a.space, inf_norm(state_at(t)));
    mm.budget = a.budget + w * (b.budget - a.budget);
    return mm;
}

double Trace::min_deriv_norm() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& s : samples) m = std::min(m, s.deriv_norm);
    return m;
}

double Trace::max_abs_state() const {
    double m = 0;
    for (const auto& s : samples) m = std::max(m, inf_norm(s.y));
    return m;
}

} // namespace polyode
