#include "polyode/gadgets.hpp"

#include "polyode/lowering.hpp"
#include "polyode/solver.hpp"

#include <algorithm>
#include <cmath>

namespace polyode {

double reach_eval(double phi, double y, double g) {
    double u = g - y;
    return 2.0 * phi * (u + u * u * u);
}

namespace {

// lxh realization in closed form: x (1 + tanh(nu_l (2(t-a)/(b-a) - 1))) / 2
// with nu_l = mu + ln(1 + x^2).
double lxh_closed(double a, double b, double t, double mu, double x) {
    double nu = mu + std::log1p(x * x);
    double s = nu * (2.0 * (t - a) / (b - a) - 1.0);
    return x * (1.0 + std::tanh(s)) / 2.0;
}

struct PlilConstants {
    double delta, omega, K, t1, Ja, Jb;
};

PlilConstants plil_constants(const PlilSpec& spec) {
    spec.validate();
    PlilConstants c;
    c.delta = spec.width().convert_to<double>();
    double tau = spec.tau.convert_to<double>();
    double a = spec.I.a.convert_to<double>();
    double b = spec.I.b.convert_to<double>();
    c.omega = 2.0 * M_PI / tau;
    c.K = spec.K().convert_to<double>();
    c.t1 = (a + b) / 2.0 - tau / 4.0;
    c.Ja = std::sin(c.omega * (a - c.t1));
    c.Jb = std::sin(c.omega * (a + c.delta / 4.0 - c.t1));
    if (!(c.Ja < c.Jb))
        throw ParameterError("plil: window orientation J=[f(a), f(a+delta/4)] is degenerate");
    return c;
}

} // namespace

GadgetValue plil_eval(const PlilSpec& spec, double t, double mu, double x) {
    if (mu < 0) throw ParameterError("plil: mu must be nonnegative");
    PlilConstants c = plil_constants(spec);
    double nu = mu + 2.0 + std::log1p(x * x);
    double f = std::sin(c.omega * (t - c.t1));
    GadgetValue out;
    out.phi = lxh_closed(c.Ja, c.Jb, f, nu, c.K);
    out.value = out.phi * x;
    return out;
}

std::pair<double, double> sample_precisions(const SampleSpec& spec, double mu) {
    spec.validate();
    double width = spec.width().convert_to<double>();
    double tau = spec.tau.convert_to<double>();
    double mu_check = (mu + 1.0) / std::min(1.0, width);
    double mu_hat = mu + std::max(0.0, std::log(tau - width));
    return {mu_check, mu_hat};
}

GadgetValue sample_eval(const SampleSpec& spec, double t, double mu, double x, double g) {
    auto [mu_check, mu_hat] = sample_precisions(spec, mu);
    return plil_eval(spec, t, mu_hat, reach_eval(mu_check, x, g));
}

// ----- expression forms ---------------------------------------------------

ExprPtr reach_expr(ExprPtr phi, ExprPtr y, ExprPtr g) {
    // 2 phi ((g-y) + (g-y)^3)
    MultiPoly p(3); // args: phi, y, g
    p.add_term({1, 0, 1}, 2);
    p.add_term({1, 1, 0}, -2);
    // 2 phi (g - y)^3 = 2 phi (g^3 - 3 g^2 y + 3 g y^2 - y^3)
    p.add_term({1, 0, 3}, 2);
    p.add_term({1, 1, 2}, -6);
    p.add_term({1, 2, 1}, 6);
    p.add_term({1, 3, 0}, -2);
    return make_poly(std::move(p), {std::move(phi), std::move(y), std::move(g)});
}

ExprPtr plil_expr(const PlilSpec& spec, ExprPtr t, ExprPtr mu, ExprPtr x) {
    PlilConstants c = plil_constants(spec);
    int arity = t->arity;
    // f = sin(omega (t - t1)); the frequency is pinned to a rational at
    // 2^-80 (phase drift is far below every inequality margin).
    Rational omega_r = rational_from_double_bits(c.omega, 80, true);
    Rational t1_r = (spec.I.a + spec.I.b) / 2 - spec.tau / 4;
    MultiPoly lin(1);
    lin.add_term({1}, omega_r);
    lin.add_term({0}, -omega_r * t1_r);
    ExprPtr f = make_sin(make_poly(std::move(lin), {t}));
    // J endpoints rounded inward so both lxh window inequalities survive.
    RationalInterval J{rational_from_double_bits(c.Ja, 80, true),
                       rational_from_double_bits(c.Jb, 80, false)};
    ExprPtr nu = make_add(mu, make_add(make_const(arity, 2),
                                       build_primitive(PrimKind::Log1pSq, {}, {x})));
    ExprPtr gate = make_lxh(J, f, nu, make_const(arity, spec.K()));
    return make_mul(gate, x);
}

ExprPtr sample_expr(const SampleSpec& spec, ExprPtr t, ExprPtr mu, ExprPtr x, ExprPtr g) {
    spec.validate();
    int arity = t->arity;
    Rational width = spec.width();
    Rational mu_check_scale = Rational(1) / std::min(Rational(1), width);
    ExprPtr mu_check =
        make_scale(mu_check_scale, make_add(mu, make_const(arity, 1)));
    double hold = (spec.tau - width).convert_to<double>();
    Rational hold_log = hold > 1.0 ? rational_from_double_bits(std::log(hold), 80, true) : Rational(0);
    ExprPtr mu_hat = make_add(mu, make_const(arity, hold_log));
    return plil_expr(spec, std::move(t), std::move(mu_hat),
                     reach_expr(std::move(mu_check), std::move(x), std::move(g)));
}

ExprPtr freeze_expr(ExprPtr a) {
    int arity = a->arity;
    return make_scale(Rational(1, 2), make_add(make_const(arity, 1), make_tanh(std::move(a))));
}

Pivp build_slowstop(const SlowStopSpec& spec, const PolyVector& p, const std::vector<Rational>& y0,
                    bool with_meter) {
    spec.validate();
    int d = p.size();
    if (p.arity() != d) throw DimensionError("slow-stop: p must be a square autonomous field");
    if (static_cast<int>(y0.size()) != d) throw DimensionError("slow-stop: y0 size mismatch");

    // States: y(0..d-1), A(d) [, psi(d+1)]; inputs: e_y(0..d-1), e_A(d).
    int dim = d + 1 + (with_meter ? 1 : 0);
    int m = d + 1;
    int arity = dim + m;
    std::vector<ExprPtr> rhs;
    ExprPtr freeze = freeze_expr(make_var(arity, d));
    for (int i = 0; i < d; ++i) {
        std::vector<int> map(d);
        for (int j = 0; j < d; ++j) map[j] = j;
        ExprPtr field = make_poly(p[i].remap(arity, map), [&] {
            std::vector<ExprPtr> vars;
            for (int j = 0; j < arity; ++j) vars.push_back(make_var(arity, j));
            return vars;
        }());
        rhs.push_back(make_add(make_mul(freeze, field), make_var(arity, dim + i)));
    }
    rhs.push_back(make_add(make_const(arity, -1), make_var(arity, dim + d))); // A'
    if (with_meter) rhs.push_back(freeze);                                    // psi'

    PolyVector init(0);
    for (const auto& v : y0) init.push_back(MultiPoly::constant(0, v));
    init.push_back(MultiPoly::constant(0, spec.T + 2));
    if (with_meter) init.push_back(MultiPoly::constant(0, 0));

    auto lowered = lower_to_pivp(rhs, init, m);
    Pivp out = std::move(lowered.pivp);
    out.outputs.clear();
    for (int i = 0; i < d; ++i) out.outputs.push_back(i);
    return out;
}

double reach_bound(double eta, const InputSignal& E_profile, const InputSignal& phi_profile,
                   double horizon) {
    if (eta < 0) throw ParameterError("reach bound: eta must be nonnegative");
    if (horizon <= 0) throw ParameterError("reach bound: horizon must be positive");

    std::vector<double> grid{0.0, horizon};
    phi_profile.collect_breakpoints(horizon, grid);
    E_profile.collect_breakpoints(horizon, grid);
    std::sort(grid.begin(), grid.end());

    double phi_min = std::numeric_limits<double>::infinity();
    double e_max = 0;
    for (size_t i = 0; i + 1 < grid.size(); ++i) {
        double a = grid[i], b = grid[i + 1];
        for (int k = 0; k <= 64; ++k) {
            double t = a + (b - a) * k / 64.0;
            if (t >= horizon) t = std::nextafter(horizon, 0.0);
            double ph = phi_profile.value(t);
            if (ph < 0) throw ParameterError("reach bound: phi profile must be nonnegative");
            phi_min = std::min(phi_min, ph);
            e_max = std::max(e_max, std::abs(E_profile.value(t)));
        }
    }
    double int_phi = adaptive_simpson([&](double t) { return phi_profile.value(t); }, 0, horizon, 1e-12);
    double int_e =
        adaptive_simpson([&](double t) { return std::abs(E_profile.value(t)); }, 0, horizon, 1e-12);

    bool integral_ok = int_phi >= 1.0;
    bool worst_ok = phi_min > 0.0;
    if (!integral_ok && !worst_ok)
        throw InapplicableBoundError("reach bound: int phi < 1 and phi has zeros");

    double best = std::numeric_limits<double>::infinity();
    if (integral_ok) best = std::min(best, eta + int_e + std::exp(-int_phi));
    if (worst_ok) {
        // 1/sqrt(e^{2I} - 1), overflow-safe.
        double tail = 2.0 * int_phi > 700.0 ? std::exp(-int_phi)
                                            : 1.0 / std::sqrt(std::expm1(2.0 * int_phi));
        best = std::min(best, eta + e_max / phi_min + tail);
    }
    return best;
}

} // namespace polyode
