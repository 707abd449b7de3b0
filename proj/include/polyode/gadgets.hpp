#pragma once

#include "polyode/expr.hpp"
#include "polyode/pivp.hpp"
#include "polyode/signals.hpp"

#include <utility>

namespace polyode {

using Interval = RationalInterval;

/// Periodic low-integral-low gadget parameters: a window I inside one
/// period [0, tau].
struct PlilSpec {
    Interval I;
    Rational tau;

    void validate() const {
        I.validate();
        if (!(I.a >= 0 && I.b <= tau)) throw ParameterError("plil window must lie inside [0, tau]");
        if (!(I.b - I.a < tau)) throw ParameterError("plil window must be shorter than the period");
    }
    Rational width() const { return I.b - I.a; }
    Rational K() const { return Rational(1, 4) + Rational(2) / width(); }
};

using SampleSpec = PlilSpec;

struct SlowStopSpec {
    Rational T;
    Rational theta;

    void validate() const {
        if (T < 0 || theta < 0) throw ParameterError("slow-stop needs T, theta >= 0");
    }
};

/// reach(phi, y, g) = 2 phi X3(g - y), X3(u) = u + u^3.
double reach_eval(double phi, double y, double g);

struct GadgetValue {
    double value = 0;
    double phi = 0; // the multiplier, so integral properties are checkable
};

/// plil_{I,tau}(t, mu, x) = lxh_J(sin(omega (t - t1)), nu, K) * x with the
/// constants of the construction; phi is the lxh factor.
GadgetValue plil_eval(const PlilSpec& spec, double t, double mu, double x);

/// sample_{I,tau}(t, mu, x, g) = plil_{I,tau}(t, mu_hat, reach(mu_check, x, g)).
GadgetValue sample_eval(const SampleSpec& spec, double t, double mu, double x, double g);

/// The derived precisions of the sample gadget:
/// mu_check = (mu+1)/min(1,|I|), mu_hat = mu + max(0, ln(tau - |I|)).
std::pair<double, double> sample_precisions(const SampleSpec& spec, double mu);

/// Expression forms of the gadgets (for lowering and witness assembly).
ExprPtr reach_expr(ExprPtr phi, ExprPtr y, ExprPtr g);
ExprPtr plil_expr(const PlilSpec& spec, ExprPtr t, ExprPtr mu, ExprPtr x);
ExprPtr sample_expr(const SampleSpec& spec, ExprPtr t, ExprPtr mu, ExprPtr x, ExprPtr g);
/// (1 + tanh(a)) / 2, the slow-stop freeze factor.
ExprPtr freeze_expr(ExprPtr a);

/// Slow-stop augmentation of y' = p(y):
///   y' = ((1 + tanh A)/2) p(y) + e_y,  A' = -1 + e_A,  A(0) = T + 2.
/// The perturbations (e_y, e_A) are the system's external inputs, so the
/// auxiliary tanh state stays exactly consistent with A. When with_meter
/// is set an extra state accumulates psi = integral of (1 + tanh A)/2.
Pivp build_slowstop(const SlowStopSpec& spec, const PolyVector& p, const std::vector<Rational>& y0,
                    bool with_meter = false);

/// Tightest applicable reach-lemma bound for |y(t) - g_inf| at the end of
/// [0, horizon]:
///   integral-error form  eta + int|E| + exp(-int phi)   (needs int phi >= 1)
///   worst-error form     eta + E_max/phi_min + 1/sqrt(exp(2 int phi) - 1)
///                                                       (needs phi >= phi_min > 0)
/// Raises InapplicableBoundError when neither variant applies.
double reach_bound(double eta, const InputSignal& E_profile, const InputSignal& phi_profile,
                   double horizon);

} // namespace polyode
