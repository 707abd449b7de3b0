#pragma once

#include "polyode/gadgets.hpp"
#include "polyode/pivp.hpp"
#include "polyode/signals.hpp"
#include "polyode/solver.hpp"

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace polyode {

/// Outcome of checking one quantitative lemma against simulation. pass
/// implies min_margin >= 0 wherever the lemma's hypotheses held.
struct BoundReport {
    std::string kind;
    std::vector<std::pair<double, double>> bound_samples;     // (t, bound(t))
    std::vector<std::pair<double, double>> deviation_samples; // (t, observed)
    double min_margin = 0;
    bool applicable = false;
    bool pass = false;
    std::string detail;

    /// Re-asserts the pass flag from the stored samples.
    bool recheck() const;
};

/// Parameter-dependency bound of the perturbed system
///   z' = e(t) + p(z, x(t) + delta(t)),  z(0) = y(0) + (z0 offset)
/// against the clean trajectory y. mu(t) is evaluated along y; the report
/// marks each sample applicable iff mu(t) < epsilon. When z_trace is
/// given, deviations and margins are filled in.
BoundReport dependency_bound(const PolyVector& p, const Trace& y_trace,
                             const std::vector<InputSignal>& x,
                             const std::vector<InputSignal>& delta,
                             const std::vector<InputSignal>& e, double z0_dev, double epsilon,
                             const Trace* z_trace = nullptr,
                             const std::optional<MultiPoly>& upsilon = std::nullopt);

/// Modulus-of-continuity witness: a function handle plus the polynomial q
/// of the lemma (q is existential in the statement, so witnesses carry it
/// explicitly and the harness validates it empirically).
struct ContinuityWitness {
    ExprPtr f;                     // evaluator, arity n
    std::optional<MultiPoly> q;    // univariate
};

double continuity_bound(const ContinuityWitness& w, std::span<const double> x1,
                        std::span<const double> x2);

// ----- verify_bound scenarios -------------------------------------------

struct TanhScenario {};

struct ReachScenario {
    double eta = 0.1;
    double g_inf = 1.0;
    double wobble_freq = 3.0; // g(t) = g_inf + eta sin(wobble_freq t)
    double y0 = 0.0;
    double horizon = 4.0;
    InputSignal phi = InputSignal::constant(1.0);
    InputSignal E = InputSignal::zero();
    double solver_tol = 1e-10;
};

struct PlilScenario {
    PlilSpec spec{{2, 3}, 4};
    double mu = 3.0;
    double x = 1.5;
    int grid = 1000;
};

struct SampleScenario {
    SampleSpec spec{{1, 2}, 4};
    double mu = 3.0;        // constant precision signal
    double target = 1.0;    // constant target
    double y0 = 0.0;
    InputSignal e = InputSignal::zero();
    int windows = 3;
    double solver_tol = 1e-10;
};

struct SlowStopScenario {
    SlowStopSpec spec{3, 2};
    PolyVector p = PolyVector(1, {MultiPoly::variable(1, 0).scaled(Rational(-1))});
    std::vector<Rational> y0 = {Rational(1)};
    double e0_scale = 0.3;   // fraction of the budget placed on y(0), A(0)
    double e_scale = 0.6;    // fraction spent as a constant burst on [0,1]
    double solver_tol = 1e-10;
};

struct DependencyScenario {
    PolyVector p = PolyVector(2, {MultiPoly::variable(2, 1),
                                  MultiPoly::variable(2, 0).scaled(Rational(-1))});
    PolyVector init = PolyVector(0, {MultiPoly::constant(0, 0), MultiPoly::constant(0, 1)});
    std::vector<InputSignal> x;      // external inputs (may be empty)
    std::vector<InputSignal> delta;  // input perturbations
    std::vector<InputSignal> e;      // dynamics perturbations
    std::vector<double> z0_offset = {1e-6, 0};
    double epsilon = 1.0;
    double horizon = 3.0;
    double solver_tol = 1e-12;
};

using VerifyScenario = std::variant<TanhScenario, ReachScenario, PlilScenario, SampleScenario,
                                    SlowStopScenario, DependencyScenario>;

/// Simulates the scenario, evaluates the lemma bound pointwise and reports
/// margins. Hypothesis violations yield applicable=false with a reason,
/// not an exception.
BoundReport verify_bound(const VerifyScenario& scenario);

} // namespace polyode
