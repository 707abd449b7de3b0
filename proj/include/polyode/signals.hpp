#pragma once

#include "polyode/errors.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace polyode {

/// One piece of a piecewise input / perturbation signal. Pieces are C^1
/// inside their span; discontinuities only happen at breakpoints.
struct SignalPiece {
    enum class Kind { Polynomial, Sine, HeldNoise };

    Kind kind = Kind::Polynomial;
    double t_begin = 0;

    // Polynomial: value(t) = sum_k coeffs[k] * (t - t_begin)^k
    std::vector<double> coeffs;

    // Sine: value(t) = offset + amplitude * sin(omega * t + phase)
    double offset = 0, amplitude = 0, omega = 0, phase = 0;

    // HeldNoise: piecewise-constant on a grid of width dt starting at
    // t_begin; cell k holds amplitude * u_k with u_k in [-1,1] drawn from
    // a splitmix64 stream keyed by (seed, k). Fully reproducible.
    uint64_t seed = 0;
    double noise_amplitude = 0;
    double noise_dt = 0;
};

/// Local expansion of a signal around t0: a cubic in s = t - t0, valid up
/// to the next breakpoint, with an accuracy-driven cap on the step size
/// (finite when the piece is not exactly cubic).
struct SignalFit {
    std::array<double, 4> c{0, 0, 0, 0};
    double valid_until = 0; // absolute time of next breakpoint
    double step_cap = 0;    // max h keeping the fit error below tol
};

class InputSignal {
public:
    InputSignal() { pieces_.push_back(SignalPiece{}); } // zero signal

    static InputSignal zero() { return constant(0.0); }
    static InputSignal constant(double c);
    /// coeffs[k] multiplies t^k (absolute time, piece starts at 0).
    static InputSignal polynomial(std::vector<double> coeffs);
    static InputSignal sine(double amplitude, double omega, double phase, double offset = 0);
    static InputSignal held_noise(uint64_t seed, double amplitude, double dt);
    /// Pieces keyed by strictly increasing start times; first must be 0.
    static InputSignal piecewise(std::vector<SignalPiece> pieces);

    double value(double t) const;
    double derivative(double t) const;

    SignalFit local_fit(double t0, double tol) const;

    /// All discontinuity / kink times in (0, horizon], sorted.
    void collect_breakpoints(double horizon, std::vector<double>& out) const;

    /// Exact pointwise sum where representable (polynomial pieces merge;
    /// sine shifts by constants). Throws UnsupportedError otherwise.
    InputSignal plus(const InputSignal& other) const;

    const std::vector<SignalPiece>& pieces() const { return pieces_; }

private:
    const SignalPiece& piece_at(double t) const;
    static double binom(size_t n, size_t k);
    std::vector<SignalPiece> pieces_; // sorted by t_begin, front at 0
};

} // namespace polyode
