#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "polyode/polynomial.hpp"
#include "test_util.hpp"

#include <cmath>

using namespace polyode;
using testutil::random_poly;
using testutil::random_rational_point;

namespace {

MultiPoly xy_minus_y3() {
    // x1*x2 - x2^3, arity 2
    MultiPoly p(2);
    p.add_term({1, 1}, 1);
    p.add_term({0, 3}, -1);
    return p;
}

} // namespace

TEST_CASE("eval: pinned examples") {
    MultiPoly p = xy_minus_y3();
    std::vector<Real> pt = {Real(2), Real(1)};
    CHECK(p.eval(pt, 64) == 1);

    MultiPoly z = MultiPoly::zero(2);
    std::vector<Real> pt2 = {Real(7.3), Real(-2)};
    CHECK(z.eval(pt2, 53) == 0);
}

TEST_CASE("eval: arity mismatch raises dimension error") {
    MultiPoly p = xy_minus_y3();
    std::vector<Real> pt = {Real(1)};
    CHECK_THROWS_AS(p.eval(pt, 64), DimensionError);
}

TEST_CASE("eval: matches exact rational oracle on random degree-5 polynomials") {
    auto g = testutil::rng(42);
    for (int trial = 0; trial < 20; ++trial) {
        MultiPoly p = random_poly(g, 3, 5, 8);
        auto pt = random_rational_point(g, 3);
        // Independent oracle: term-by-term summation in exact rationals.
        Rational expect = 0;
        for (const auto& [e, c] : p.terms()) {
            Rational term = c;
            for (int i = 0; i < 3; ++i)
                for (uint32_t k = 0; k < e[i]; ++k) term *= pt[i];
            expect += term;
        }
        std::vector<Real> rp;
        PrecisionGuard guard(256);
        for (const auto& q : pt) rp.push_back(Real(q));
        Real got = p.eval(rp, 256);
        Real want(expect);
        CHECK(abs(got - want) <= abs(want) * Real("1e-70") + Real("1e-70"));
    }
}

TEST_CASE("eval: higher precision stays within the lower precision rounding bound") {
    auto g = testutil::rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        MultiPoly p = random_poly(g, 2, 4, 6);
        std::vector<Real> pt;
        {
            PrecisionGuard guard(512);
            pt = {Real(testutil::uniform(g, -2, 2)), Real(testutil::uniform(g, -2, 2))};
        }
        for (unsigned bits : {64u, 128u, 256u}) {
            Real lo = p.eval(pt, bits);
            Real hi = p.eval(pt, 512);
            // Each of the <= n_ops additions/multiplications contributes at
            // most one ulp relative to the magnitude of the running values.
            PrecisionGuard guard(512);
            Real scale(0);
            for (const auto& [e, c] : p.terms()) {
                Real term = abs(scalar_from_rational<Real>(c));
                for (int i = 0; i < 2; ++i)
                    for (uint32_t k = 0; k < e[i]; ++k) term *= abs(pt[i]);
                scale += term;
            }
            Real ops(static_cast<double>(4 * p.term_count() * (p.degree() + 2)));
            Real bound = scale * ops * pow(Real(2), -static_cast<int>(bits) + 1);
            CHECK(abs(Real(lo) - hi) <= bound + Real("1e-150"));
        }
    }
}

TEST_CASE("combine: pinned examples") {
    // (x1 + 1) * (x1 - 1) = x1^2 - 1
    MultiPoly a(1), b(1);
    a.add_term({1}, 1);
    a.add_term({0}, 1);
    b.add_term({1}, 1);
    b.add_term({0}, -1);
    MultiPoly prod = a * b;
    MultiPoly expect(1);
    expect.add_term({2}, 1);
    expect.add_term({0}, -1);
    CHECK(prod == expect);

    auto g = testutil::rng(3);
    MultiPoly p = random_poly(g, 2, 3, 5);
    CHECK(p + MultiPoly::zero(2) == p);
}

TEST_CASE("combine: arity mismatch raises") {
    CHECK_THROWS_AS(MultiPoly::zero(2) + MultiPoly::zero(3), DimensionError);
    CHECK_THROWS_AS(MultiPoly::zero(2) * MultiPoly::zero(1), DimensionError);
}

TEST_CASE("combine: evaluation homomorphism for mul on rational points") {
    auto g = testutil::rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        MultiPoly a = random_poly(g, 2, 3, 5);
        MultiPoly b = random_poly(g, 2, 3, 5);
        auto pt = random_rational_point(g, 2);
        CHECK((a * b).eval_exact(pt) == a.eval_exact(pt) * b.eval_exact(pt));
        CHECK((a + b).eval_exact(pt) == a.eval_exact(pt) + b.eval_exact(pt));
        CHECK((a - b).eval_exact(pt) == a.eval_exact(pt) - b.eval_exact(pt));
    }
}

TEST_CASE("ring axioms hold exactly on random triples") {
    auto g = testutil::rng(100);
    for (int trial = 0; trial < 20; ++trial) {
        MultiPoly a = random_poly(g, 2, 3, 4);
        MultiPoly b = random_poly(g, 2, 3, 4);
        MultiPoly c = random_poly(g, 2, 3, 4);
        CHECK(a + b == b + a);
        CHECK(a * b == b * a);
        CHECK((a + b) + c == a + (b + c));
        CHECK((a * b) * c == a * (b * c));
        CHECK(a * (b + c) == a * b + a * c);
    }
}

TEST_CASE("degree_and_sigma: pinned examples") {
    // sine system p = (y2, -y1)
    PolyVector sine(2);
    sine.push_back(MultiPoly::variable(2, 1));
    sine.push_back(-MultiPoly::variable(2, 0));
    auto ds = degree_and_sigma(sine);
    CHECK(ds.k == 1);
    CHECK(ds.sigma == 2);

    auto z = degree_and_sigma(MultiPoly::zero(3));
    CHECK(z.k == 0);
    CHECK(z.sigma == 0);

    MultiPoly p(2);
    p.add_term({2, 1}, 3);
    p.add_term({0, 1}, Rational(-1, 2));
    auto d = degree_and_sigma(p);
    CHECK(d.k == 3);
    CHECK(d.sigma == Rational(7, 2));
}

TEST_CASE("degree adds under multiplication for nonzero operands") {
    auto g = testutil::rng(55);
    for (int trial = 0; trial < 20; ++trial) {
        MultiPoly a = random_poly(g, 2, 4, 3);
        MultiPoly b = random_poly(g, 2, 4, 3);
        if (a.is_zero() || b.is_zero()) continue;
        MultiPoly prod = a * b;
        if (prod.is_zero()) continue; // cancellation cannot happen over an integral domain
        CHECK(prod.degree() == a.degree() + b.degree());
    }
}

TEST_CASE("partial_derivative: pinned examples") {
    MultiPoly p(2);
    p.add_term({2, 1}, 1); // x1^2 x2
    MultiPoly d = p.partial_derivative(0);
    MultiPoly expect(2);
    expect.add_term({1, 1}, 2);
    CHECK(d == expect);

    MultiPoly q(2);
    q.add_term({1, 0}, 1);
    q.add_term({0, 0}, 5);
    CHECK(q.partial_derivative(1).is_zero());

    CHECK_THROWS_AS(p.partial_derivative(2), DimensionError);
}

TEST_CASE("partial_derivative: central difference oracle") {
    auto g = testutil::rng(23);
    const double h = 1e-6;
    for (int trial = 0; trial < 10; ++trial) {
        MultiPoly p = random_poly(g, 3, 4, 6);
        int var = testutil::uniform_int(g, 0, 2);
        MultiPoly dp = p.partial_derivative(var);
        std::vector<double> pt = {testutil::uniform(g, -1, 1), testutil::uniform(g, -1, 1),
                                  testutil::uniform(g, -1, 1)};
        std::vector<double> plus = pt, minus = pt;
        plus[var] += h;
        minus[var] -= h;
        double fd = (p.eval_as<double>(plus) - p.eval_as<double>(minus)) / (2 * h);
        double exact = dp.eval_as<double>(pt);
        CHECK(std::abs(fd - exact) <= 1e-6 * (1.0 + std::abs(exact)));
    }
}

TEST_CASE("canonical text syntax round-trips") {
    MultiPoly p(2);
    p.add_term({2, 1}, 3);
    p.add_term({0, 1}, Rational(-1, 2));
    std::string text = p.to_string();
    CHECK(text == "3*x1^2*x2 - 1/2*x2");
    CHECK(parse_poly(text, 2) == p);

    CHECK(parse_poly("0", 3).is_zero());
    CHECK(parse_poly("x1*x1 - x2^2", 2) == parse_poly("x1^2 - x2^2", 2));
    CHECK(parse_poly("2.5*x1", 1) == MultiPoly::variable(1, 0).scaled(Rational(5, 2)));

    auto g = testutil::rng(77);
    for (int trial = 0; trial < 10; ++trial) {
        MultiPoly q = random_poly(g, 3, 4, 5);
        CHECK(parse_poly(q.to_string(), 3) == q);
    }
}

TEST_CASE("compose substitutes exactly") {
    // p(x1,x2) = x1^2 + x2, composed with (x1+1, x1*x2)
    MultiPoly p(2);
    p.add_term({2, 0}, 1);
    p.add_term({0, 1}, 1);
    std::vector<MultiPoly> args;
    args.push_back(parse_poly("x1 + 1", 2));
    args.push_back(parse_poly("x1*x2", 2));
    MultiPoly got = p.compose(args);
    CHECK(got == parse_poly("x1^2 + 2*x1 + x1*x2 + 1", 2));
}
