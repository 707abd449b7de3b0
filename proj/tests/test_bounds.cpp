#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "polyode/bounds.hpp"
#include "test_util.hpp"

#include <cmath>

using namespace polyode;

namespace {

Pivp linear_system() {
    Pivp p;
    p.dim = 1;
    p.rhs = PolyVector(1, {MultiPoly::variable(1, 0)});
    p.init = PolyVector(0, {MultiPoly::constant(0, 1)});
    p.outputs = {0};
    return p;
}

} // namespace

TEST_CASE("dependency bound: linear case reproduces d0 * e^t") {
    double d0 = 1e-6;
    SolverConfig cfg;
    cfg.abs_tol = cfg.rel_tol = 1e-13;
    Pivp sys = linear_system();
    Trace y = integrate(sys, {}, {}, {}, 3.0, cfg);
    Trace z = integrate(sys, {}, {}, {}, 3.0, cfg, {d0});
    BoundReport r = dependency_bound(sys.rhs, y, {}, {}, {}, d0, 1.0, &z);
    REQUIRE(r.applicable);
    CHECK(r.pass);
    for (const auto& [t, mu] : r.bound_samples) {
        double expect = d0 * std::exp(t);
        CHECK(std::abs(mu - expect) <= 1e-9 * expect);
    }
    // The linear deviation saturates the bound exactly.
    for (size_t i = 0; i < r.deviation_samples.size(); ++i) {
        CHECK(std::abs(r.deviation_samples[i].second - r.bound_samples[i].second) <=
              1e-7 * r.bound_samples[i].second + 1e-18);
    }
}

TEST_CASE("dependency bound: clean pairing gives mu identically zero") {
    SolverConfig cfg;
    Pivp sys = linear_system();
    Trace y = integrate(sys, {}, {}, {}, 2.0, cfg);
    BoundReport r = dependency_bound(sys.rhs, y, {}, {}, {}, 0.0, 1.0, &y);
    REQUIRE(r.applicable);
    CHECK(r.pass);
    for (const auto& [t, mu] : r.bound_samples) CHECK(mu == 0.0);
}

TEST_CASE("dependency bound: perturbed sine stays within mu(t)") {
    auto g = testutil::rng(2);
    for (int trial = 0; trial < 10; ++trial) {
        DependencyScenario sc;
        double amp = testutil::uniform(g, 1e-8, 1e-5);
        sc.e = {InputSignal::constant(amp), InputSignal::constant(-amp)};
        sc.z0_offset = {testutil::uniform(g, -1e-6, 1e-6), testutil::uniform(g, -1e-6, 1e-6)};
        sc.horizon = testutil::uniform(g, 1.0, 3.0);
        BoundReport r = verify_bound(sc);
        REQUIRE(r.applicable);
        CHECK(r.pass);
        CHECK(r.min_margin >= -1e-15); // saturated at t=0 where mu(0) = ||z0-y0||
    }
}

TEST_CASE("dependency bound: mu is monotone in each perturbation source") {
    SolverConfig cfg;
    Pivp sys = linear_system();
    Trace y = integrate(sys, {}, {}, {}, 2.0, cfg);
    auto mu_end = [&](double z0, double eamp) {
        std::vector<InputSignal> e;
        if (eamp > 0) e.push_back(InputSignal::constant(eamp));
        BoundReport r = dependency_bound(sys.rhs, y, {}, {}, e, z0, 10.0);
        return r.bound_samples.back().second;
    };
    CHECK(mu_end(1e-6, 0) < mu_end(2e-6, 0));
    CHECK(mu_end(1e-6, 0) < mu_end(1e-6, 1e-6));
}

TEST_CASE("dependency bound: independent quadrature agrees within 1%") {
    SolverConfig cfg;
    cfg.abs_tol = cfg.rel_tol = 1e-12;
    // Nonlinear system so M(t) varies: y' = y^2/4 on [0,2], y(0)=1.
    Pivp sys;
    sys.dim = 1;
    MultiPoly f(1);
    f.add_term({2}, Rational(1, 4));
    sys.rhs = PolyVector(1, {f});
    sys.init = PolyVector(0, {MultiPoly::constant(0, 1)});
    sys.outputs = {0};
    Trace y = integrate(sys, {}, {}, {}, 2.0, cfg);
    double eamp = 1e-7;
    BoundReport r =
        dependency_bound(sys.rhs, y, {}, {}, {InputSignal::constant(eamp)}, 0.0, 1.0);
    double mu_adaptive = r.bound_samples.back().second;

    auto ds = degree_and_sigma(sys.rhs);
    double ksigma = static_cast<double>(ds.k) * ds.sigma.convert_to<double>();
    auto riemann = [&](int n) {
        double I1 = 0, I2 = 0;
        for (int i = 0; i < n; ++i) {
            double t = 2.0 * (i + 0.5) / n;
            double M = 1.0 + inf_norm(y.state_at(t));
            I1 += (eamp) * 2.0 / n;
            I2 += std::pow(M, ds.k - 1.0) * 2.0 / n;
        }
        return I1 * std::exp(ksigma * I2);
    };
    CHECK(std::abs(riemann(4096) - mu_adaptive) <= 0.01 * mu_adaptive);
    CHECK(std::abs(riemann(8192) - mu_adaptive) <= 0.01 * mu_adaptive);
}

TEST_CASE("continuity bound: pinned cases") {
    ContinuityWitness tanh_w;
    tanh_w.f = make_tanh(make_var(1, 0));
    tanh_w.q = MultiPoly::constant(1, 1); // |tanh'| <= 1
    std::vector<double> p = {0.3}, q = {0.3};
    CHECK(continuity_bound(tanh_w, p, q) == 0.0);

    auto g = testutil::rng(3);
    for (int i = 0; i < 50; ++i) {
        double x1 = testutil::uniform(g, -4, 4);
        double x2 = testutil::uniform(g, -4, 4);
        std::vector<double> a = {x1}, b = {x2};
        double bound = continuity_bound(tanh_w, a, b);
        CHECK(std::abs(std::tanh(x1) - std::tanh(x2)) <= bound + 1e-15);
        CHECK(std::abs(std::sin(x1) - std::sin(x2)) <= bound + 1e-15); // sin is 1-Lipschitz too
    }

    ContinuityWitness missing;
    missing.f = make_sin(make_var(1, 0));
    CHECK_THROWS_AS(continuity_bound(missing, p, q), UnsupportedError);
}

TEST_CASE("verify_bound: tanh grid check passes with margin") {
    BoundReport r = verify_bound(TanhScenario{});
    CHECK(r.applicable);
    CHECK(r.pass);
    CHECK(r.min_margin >= 0);
    CHECK(r.recheck());
}

TEST_CASE("verify_bound: reach with zero phi is inapplicable") {
    ReachScenario sc;
    sc.phi = InputSignal::zero();
    BoundReport r = verify_bound(sc);
    CHECK(!r.applicable);
    CHECK(!r.pass);
}

TEST_CASE("verify_bound: reach default scenario passes") {
    BoundReport r = verify_bound(ReachScenario{});
    CHECK(r.applicable);
    CHECK(r.pass);
}

TEST_CASE("verify_bound: plil default scenario passes") {
    BoundReport r = verify_bound(PlilScenario{});
    CHECK(r.pass);
    CHECK(r.min_margin >= 0);
}

TEST_CASE("verify_bound: sample with admissible noise passes") {
    SampleScenario sc;
    sc.e = InputSignal::held_noise(7, 5e-4, 0.5);
    BoundReport r = verify_bound(sc);
    CHECK(r.applicable);
    CHECK(r.pass);
}

TEST_CASE("verify_bound: slow-stop default scenario passes") {
    BoundReport r = verify_bound(SlowStopScenario{});
    CHECK(r.applicable);
    CHECK(r.pass);
}
