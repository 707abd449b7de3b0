#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "polyode/solver.hpp"
#include "test_util.hpp"

#include <cmath>

using namespace polyode;

namespace {

Pivp sine_system() {
    // y1' = y2, y2' = -y1, y(0) = (0, 1)  ->  (sin, cos)
    Pivp p;
    p.dim = 2;
    PolyVector rhs(2);
    rhs.push_back(MultiPoly::variable(2, 1));
    rhs.push_back(-MultiPoly::variable(2, 0));
    p.rhs = rhs;
    PolyVector init(0);
    init.push_back(MultiPoly::constant(0, 0));
    init.push_back(MultiPoly::constant(0, 1));
    p.init = init;
    p.outputs = {0};
    return p;
}

Pivp scalar_system(const MultiPoly& f, const Rational& y0) {
    Pivp p;
    p.dim = 1;
    p.rhs = PolyVector(1, {f});
    p.init = PolyVector(0, {MultiPoly::constant(0, y0)});
    p.outputs = {0};
    return p;
}

} // namespace

TEST_CASE("sine system tracks sin/cos to 1e-10 over [0,20]") {
    SolverConfig cfg;
    cfg.order = 20;
    cfg.abs_tol = cfg.rel_tol = 1e-12;
    Trace tr = integrate(sine_system(), {}, {}, {}, 20.0, cfg);
    REQUIRE(tr.status == TraceStatus::ok);
    double worst = 0;
    for (double t = 0; t <= 20.0; t += 0.1) {
        auto y = tr.state_at(t);
        worst = std::max(worst, std::abs(y[0] - std::sin(t)));
        worst = std::max(worst, std::abs(y[1] - std::cos(t)));
    }
    CHECK(worst <= 1e-10);
}

TEST_CASE("zero field: constant trace with zero length") {
    Pivp p = scalar_system(MultiPoly::zero(1), Rational(-7, 2));
    SolverConfig cfg;
    Trace tr = integrate(p, {}, {}, {}, 3.0, cfg);
    REQUIRE(tr.status == TraceStatus::ok);
    CHECK(tr.final_state()[0] == doctest::Approx(-3.5).epsilon(1e-15));
    auto m = trace_metrics(tr, 3.0);
    CHECK(m.length == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(m.space == doctest::Approx(3.5).epsilon(1e-15));
}

TEST_CASE("exponential growth: value and curve length against closed forms") {
    Pivp p = scalar_system(MultiPoly::variable(1, 0), 1);
    SolverConfig cfg;
    cfg.abs_tol = cfg.rel_tol = 1e-13;
    Trace tr = integrate(p, {}, {}, {}, 5.0, cfg);
    REQUIRE(tr.status == TraceStatus::ok);
    double e5 = std::exp(5.0);
    CHECK(std::abs(tr.final_state()[0] - e5) / e5 <= 1e-9);
    auto m = trace_metrics(tr, 5.0);
    CHECK(std::abs(m.length - (e5 - 1.0)) <= 1e-8 * e5);
}

TEST_CASE("taylor_coefficients: sine series, geometric series, zero field") {
    PolyVector sine(2);
    sine.push_back(MultiPoly::variable(2, 1));
    sine.push_back(-MultiPoly::variable(2, 0));
    PrecisionGuard guard(128);
    auto c = taylor_coefficients(sine, {Real(0), Real(1)}, 6, 128);
    CHECK(c[0][0] == 0);
    CHECK(c[0][1] == 1);
    CHECK(c[0][2] == 0);
    CHECK(abs(c[0][3] + Real(1) / 6) < Real("1e-30"));
    CHECK(abs(c[0][5] - Real(1) / 120) < Real("1e-30"));

    // y' = y^2 at y=1: coefficients of 1/(1-t) are all 1.
    PolyVector sq(1);
    MultiPoly y2(1);
    y2.add_term({2}, 1);
    sq.push_back(y2);
    auto g = taylor_coefficients(sq, {Real(1)}, 8, 128);
    for (int j = 0; j <= 8; ++j) CHECK(abs(g[0][j] - 1) < Real("1e-30"));

    PolyVector zero(1);
    zero.push_back(MultiPoly::zero(1));
    auto z = taylor_coefficients(zero, {Real(4)}, 5, 128);
    CHECK(z[0][0] == 4);
    for (int j = 1; j <= 5; ++j) CHECK(z[0][j] == 0);
}

TEST_CASE("curve length of the sine trajectory at pi/2 is sqrt(2)") {
    SolverConfig cfg;
    cfg.abs_tol = cfg.rel_tol = 1e-12;
    Trace tr = integrate(sine_system(), {}, {}, {}, 2.0, cfg);
    auto m = trace_metrics(tr, M_PI_2);
    // integral_0^{pi/2} max(|cos|,|sin|) = sqrt(2) (high-resolution quadrature)
    CHECK(std::abs(m.length - std::sqrt(2.0)) <= 1e-6);
    CHECK(trace_metrics(tr, 0.0).length == 0.0);
    CHECK_THROWS_AS(trace_metrics(tr, 2.5), ParameterError);
}

TEST_CASE("meter consistency: length increment bounded by sup-derivative") {
    SolverConfig cfg;
    cfg.abs_tol = cfg.rel_tol = 1e-10;
    Trace tr = integrate(sine_system(), {}, {}, {}, 10.0, cfg);
    for (size_t k = 1; k < tr.samples.size(); ++k) {
        const auto& a = tr.samples[k - 1];
        const auto& b = tr.samples[k];
        CHECK(b.length >= a.length);
        CHECK(b.space >= a.space);
        // sup over the step is at most 1 for the sine system
        CHECK(b.length - a.length <= (b.t - a.t) * 1.0 + 1e-9);
    }
}

TEST_CASE("fixed-order convergence: halving the step cap gains >= 2^(order-1)") {
    SolverConfig cfg;
    cfg.order = 4;
    cfg.abs_tol = cfg.rel_tol = 1e-2; // loose so max_step binds
    auto global_err = [&](double cap) {
        SolverConfig c = cfg;
        c.max_step = cap;
        Trace tr = integrate(sine_system(), {}, {}, {}, 5.0, c);
        auto y = tr.final_state();
        return std::max(std::abs(y[0] - std::sin(5.0)), std::abs(y[1] - std::cos(5.0)));
    };
    double e1 = global_err(0.2);
    double e2 = global_err(0.1);
    CHECK(e1 / e2 >= std::pow(2.0, cfg.order - 1));
}

TEST_CASE("determinism: identical configs produce bit-identical traces") {
    SolverConfig cfg;
    cfg.abs_tol = cfg.rel_tol = 1e-11;
    std::vector<InputSignal> noise = {InputSignal::held_noise(1234, 0.01, 0.25),
                                      InputSignal::held_noise(99, 0.02, 0.5)};
    Trace a = integrate(sine_system(), {}, noise, {}, 6.0, cfg);
    Trace b = integrate(sine_system(), {}, noise, {}, 6.0, cfg);
    REQUIRE(a.samples.size() == b.samples.size());
    for (size_t k = 0; k < a.samples.size(); ++k) {
        CHECK(a.samples[k].t == b.samples[k].t);
        CHECK(a.samples[k].y == b.samples[k].y);
        CHECK(a.samples[k].length == b.samples[k].length);
        CHECK(a.samples[k].budget == b.samples[k].budget);
    }
}

TEST_CASE("zero perturbation keeps the budget at ||e0||") {
    SolverConfig cfg;
    std::vector<double> e0 = {1e-3, -2e-3};
    Trace tr = integrate(sine_system(), {}, {}, {}, 4.0, cfg, e0);
    for (const auto& s : tr.samples) CHECK(s.budget == doctest::Approx(2e-3).epsilon(1e-12));
}

TEST_CASE("held-noise perturbation accumulates its integral in the budget") {
    SolverConfig cfg;
    cfg.abs_tol = cfg.rel_tol = 1e-10;
    std::vector<InputSignal> e = {InputSignal::constant(0.25), InputSignal::zero()};
    Trace tr = integrate(sine_system(), {}, e, {}, 4.0, cfg);
    auto m = trace_metrics(tr, 4.0);
    CHECK(m.budget == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("blowup detection on y' = y^2") {
    MultiPoly y2(1);
    y2.add_term({2}, 1);
    Pivp p = scalar_system(y2, 2); // finite-time blowup at t = 1/2
    SolverConfig cfg;
    cfg.blowup_threshold = 1e6;
    Trace tr = integrate(p, {}, {}, {}, 1.0, cfg);
    CHECK(tr.status == TraceStatus::blowup);
    CHECK(tr.t_end() < 0.51);
}

TEST_CASE("external input: y' = x(t) integrates a sine input accurately") {
    Pivp p;
    p.dim = 1;
    p.input_arity = 1;
    PolyVector rhs(2);
    rhs.push_back(MultiPoly::variable(2, 1)); // dy = x(t)
    p.rhs = rhs;
    p.init = PolyVector(0, {MultiPoly::constant(0, 0)});
    p.outputs = {0};
    SolverConfig cfg;
    cfg.abs_tol = cfg.rel_tol = 1e-12;
    std::vector<InputSignal> in = {InputSignal::sine(1.0, 1.0, 0.0)};
    Trace tr = integrate(p, in, {}, {}, 6.0, cfg);
    for (double t = 0.5; t <= 6.0; t += 0.5) {
        double expect = 1.0 - std::cos(t);
        CHECK(std::abs(tr.state_at(t)[0] - expect) <= 1e-8);
    }
}

TEST_CASE("piecewise-constant input forces breakpoints and exact segments") {
    Pivp p;
    p.dim = 1;
    p.input_arity = 1;
    PolyVector rhs(2);
    rhs.push_back(MultiPoly::variable(2, 1));
    p.rhs = rhs;
    p.init = PolyVector(0, {MultiPoly::constant(0, 0)});
    p.outputs = {0};
    SignalPiece a;
    a.t_begin = 0;
    a.coeffs = {1.0};
    SignalPiece b;
    b.t_begin = 1.5;
    b.coeffs = {-2.0};
    std::vector<InputSignal> in = {InputSignal::piecewise({a, b})};
    SolverConfig cfg;
    Trace tr = integrate(p, in, {}, {}, 3.0, cfg);
    CHECK(std::abs(tr.state_at(1.5)[0] - 1.5) <= 1e-12);
    CHECK(std::abs(tr.state_at(3.0)[0] - (1.5 - 2.0 * 1.5)) <= 1e-12);
}

TEST_CASE("embedded pair agrees with taylor on the sine system") {
    SolverConfig rk;
    rk.method = SolverConfig::Method::embedded_pair;
    rk.order = 5;
    rk.abs_tol = rk.rel_tol = 1e-11;
    Trace tr = integrate(sine_system(), {}, {}, {}, 10.0, rk);
    REQUIRE(tr.status == TraceStatus::ok);
    CHECK(std::abs(tr.final_state()[0] - std::sin(10.0)) <= 1e-8);
    CHECK(std::abs(tr.final_state()[1] - std::cos(10.0)) <= 1e-8);
}

TEST_CASE("mpfr path matches the double path on the sine system") {
    SolverConfig hi;
    hi.precision_bits = 128;
    hi.abs_tol = hi.rel_tol = 1e-13;
    Trace tr = integrate(sine_system(), {}, {}, {}, 5.0, hi);
    CHECK(std::abs(tr.final_state()[0] - std::sin(5.0)) <= 1e-12);
    CHECK(std::abs(tr.final_state()[1] - std::cos(5.0)) <= 1e-12);
}

TEST_CASE("technical condition report: min derivative norm") {
    SolverConfig cfg;
    Trace tr = integrate(sine_system(), {}, {}, {}, 10.0, cfg);
    // max(|sin|,|cos|) ranges over [cos(pi/4), 1]
    CHECK(tr.min_deriv_norm() >= 0.7);
    CHECK(tr.min_deriv_norm() <= 1.0);
}

TEST_CASE("dimension errors on malformed calls") {
    SolverConfig cfg;
    CHECK_THROWS_AS(integrate(sine_system(), {InputSignal::zero()}, {}, {}, 1.0, cfg),
                    DimensionError);
    CHECK_THROWS_AS(integrate(sine_system(), {}, {InputSignal::zero()}, {}, 1.0, cfg),
                    DimensionError);
    CHECK_THROWS_AS(integrate(sine_system(), {}, {}, {Rational(1)}, 1.0, cfg), DimensionError);
}
