#pragma once

#include "polyode/bounds.hpp"
#include "polyode/witness.hpp"

#include <cstdint>

namespace polyode {

// ----- class transformers -------------------------------------------------

/// ATSP -> ALP: appends an inert clock (z' = 1) so the curve length grows
/// at least linearly, and recomputes the modulus as
///   Omega*(alpha, mu) = Omega (1 + sigma_p (1 + Upsilon(alpha, Omega))^k).
/// Requires monotone bound polynomials (nonnegative coefficients).
ComputabilityWitness atsp_to_alp(const ComputabilityWitness& w);

/// ALP -> ATSP: length-rescales the system through g = norm_{inf,1}(p):
///   yh' = wh p(yh),  zh' = wh r(zh) p(yh),  wh' = -wh^3 r_1(zh) p(yh)
/// where (z, r) is the generable realization of g with polynomial
/// Jacobian r and wh(0) = 1/g(q(x)). The technical condition ||y'|| >= 1
/// is checked empirically on domain samples before transforming.
ComputabilityWitness alp_to_atsp(const ComputabilityWitness& w, int precondition_samples = 5,
                                 uint64_t seed = 20240801);

struct OnlineParams {
    Rational tau;    // 0: use omega + 2 as in the construction
    double horizon_hint = 0;
};

/// AXP-style core -> AOP: input smoothing x*' = reach(phi(t), x*, x(t)),
/// the core driven by (x*, mu(t)) with mu(t) = t/tau, and an output
/// sample-and-hold stage over the window [omega+1, omega+2] per period
/// tau = omega+2. The core must have a constant Omega and no auxiliary
/// states. The returned witness carries the semantic expression system in
/// generable_rhs for robust simulation.
ComputabilityWitness build_online_pipeline(const ComputabilityWitness& core,
                                           const OnlineParams& params = {});

/// AWP -> ARP: slow-stop composition. Assemble-only: the emitted witness
/// is verified against its headline inequalities (settling and
/// boundedness), not the full proof.
ComputabilityWitness awp_to_arp(const ComputabilityWitness& w);

/// ARP -> ASP: the (1 + tanh Delta)/2 governor with the running length
/// variable ell. Assemble-only, as above.
ComputabilityWitness arp_to_asp(const ComputabilityWitness& w);

// ----- concrete demo witnesses ---------------------------------------------

/// ATSP witness computing the constant 1 as the converged squared
/// amplitude of a sine-style oscillator:
///   rho' = 2 rho (1 - rho), u' = -v + u(1 - rho), v' = u + v(1 - rho),
///   (rho, u, v)(0) = (x^2, x, 0), output rho -> 1.
ComputabilityWitness make_amplitude_atsp_witness();

/// AXP core computing the identity through the reach pattern:
///   y' = reach(1 + mu(t), y, x(t)).
ComputabilityWitness make_identity_axp_core();

/// AWP witness computing the identity: a held copy of x is reached from 0.
ComputabilityWitness make_identity_awp_witness();

// ----- witness simulation & verification -----------------------------------

/// Simulates the generable (semantic) form of a witness: closed-form
/// evaluation of generable_rhs, which stays well-conditioned for sharp
/// gadget dynamics. init_args are the values of the init arguments;
/// inputs drive the external channels.
Trace simulate_generable(const ComputabilityWitness& w, const std::vector<double>& init_args,
                         const std::vector<InputSignal>& inputs, double horizon, double tol,
                         const std::vector<InputSignal>& perturbation = {},
                         const std::vector<double>& init_offset = {});

/// Curve length of a contiguous state block [lo, hi) up to time t.
double block_length(const Trace& tr, int lo, int hi, double t);

/// Checks the witness's defining inequalities by simulation on sampled
/// arguments. Supported tags: ALP, ATSP, AWP, AOP.
BoundReport verify_witness(const ComputabilityWitness& w, int trials = 5,
                           uint64_t seed = 20240802, double mu_max = 4.0);

/// Settling time of an online pipeline for target precision mu_bar:
/// (1 + mu_bar + ln 2) tau + tau + |I|.
double online_settle_time(const ComputabilityWitness& aop, double mu_bar);

} // namespace polyode
