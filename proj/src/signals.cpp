#include "polyode/signals.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace polyode {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

double noise_cell_value(const SignalPiece& p, int64_t cell) {
    uint64_t r = splitmix64(p.seed ^ (0x2545f4914f6cdd1dull * static_cast<uint64_t>(cell + 1)));
    double u = static_cast<double>(r >> 11) * 0x1.0p-53; // [0,1)
    return p.noise_amplitude * (2.0 * u - 1.0);
}

} // namespace

InputSignal InputSignal::constant(double c) {
    return polynomial({c});
}

InputSignal InputSignal::polynomial(std::vector<double> coeffs) {
    SignalPiece p;
    p.kind = SignalPiece::Kind::Polynomial;
    p.t_begin = 0;
    p.coeffs = std::move(coeffs);
    if (p.coeffs.empty()) p.coeffs.push_back(0.0);
    InputSignal s;
    s.pieces_ = {std::move(p)};
    return s;
}

InputSignal InputSignal::sine(double amplitude, double omega, double phase, double offset) {
    SignalPiece p;
    p.kind = SignalPiece::Kind::Sine;
    p.t_begin = 0;
    p.amplitude = amplitude;
    p.omega = omega;
    p.phase = phase;
    p.offset = offset;
    InputSignal s;
    s.pieces_ = {std::move(p)};
    return s;
}

InputSignal InputSignal::held_noise(uint64_t seed, double amplitude, double dt) {
    if (dt <= 0) throw ParameterError("held-noise grid width must be positive");
    SignalPiece p;
    p.kind = SignalPiece::Kind::HeldNoise;
    p.t_begin = 0;
    p.seed = seed;
    p.noise_amplitude = amplitude;
    p.noise_dt = dt;
    InputSignal s;
    s.pieces_ = {std::move(p)};
    return s;
}

InputSignal InputSignal::piecewise(std::vector<SignalPiece> pieces) {
    if (pieces.empty()) throw ParameterError("piecewise signal needs at least one piece");
    for (size_t i = 1; i < pieces.size(); ++i)
        if (!(pieces[i - 1].t_begin < pieces[i].t_begin))
            throw ParameterError("piecewise breakpoints must be strictly increasing");
    if (pieces.front().t_begin != 0) throw ParameterError("first piece must start at t = 0");
    InputSignal s;
    s.pieces_ = std::move(pieces);
    return s;
}

const SignalPiece& InputSignal::piece_at(double t) const {
    // Last piece with t_begin <= t; times before 0 clamp to the first piece.
    size_t lo = 0;
    for (size_t i = 1; i < pieces_.size(); ++i) {
        if (pieces_[i].t_begin <= t) lo = i;
        else break;
    }
    return pieces_[lo];
}

double InputSignal::value(double t) const {
    const SignalPiece& p = piece_at(t);
    switch (p.kind) {
        case SignalPiece::Kind::Polynomial: {
            double s = t - p.t_begin, acc = 0;
            for (size_t k = p.coeffs.size(); k-- > 0;) acc = acc * s + p.coeffs[k];
            return acc;
        }
        case SignalPiece::Kind::Sine:
            return p.offset + p.amplitude * std::sin(p.omega * t + p.phase);
        case SignalPiece::Kind::HeldNoise: {
            int64_t cell = static_cast<int64_t>(std::floor((t - p.t_begin) / p.noise_dt));
            if (cell < 0) cell = 0;
            return noise_cell_value(p, cell);
        }
    }
    return 0;
}

double InputSignal::derivative(double t) const {
    const SignalPiece& p = piece_at(t);
    switch (p.kind) {
        case SignalPiece::Kind::Polynomial: {
            double s = t - p.t_begin, acc = 0;
            for (size_t k = p.coeffs.size(); k-- > 1;) acc = acc * s + p.coeffs[k] * static_cast<double>(k);
            return acc;
        }
        case SignalPiece::Kind::Sine:
            return p.amplitude * p.omega * std::cos(p.omega * t + p.phase);
        case SignalPiece::Kind::HeldNoise:
            return 0;
    }
    return 0;
}

SignalFit InputSignal::local_fit(double t0, double tol) const {
    const SignalPiece& p = piece_at(t0);
    SignalFit fit;
    fit.valid_until = kInf;
    for (const auto& q : pieces_)
        if (q.t_begin > t0) {
            fit.valid_until = q.t_begin;
            break;
        }
    fit.step_cap = kInf;
    switch (p.kind) {
        case SignalPiece::Kind::Polynomial: {
            // Rebase the polynomial at t0 by synthetic division (Taylor shift).
            std::vector<double> c = p.coeffs;
            double s0 = t0 - p.t_begin;
            size_t n = c.size();
            std::vector<double> shifted(n, 0.0);
            // shifted[k] = value of k-th derivative / k! at s0
            for (size_t k = 0; k < n; ++k) {
                double acc = 0;
                for (size_t j = n; j-- > k;) acc = acc * s0 + c[j] * binom(j, k);
                shifted[k] = acc;
            }
            for (size_t k = 0; k < std::min<size_t>(4, n); ++k) fit.c[k] = shifted[k];
            if (n > 4) {
                // Remainder starts with the quartic term; bound h so the
                // dropped tail stays below tol for |s| <= h <= 1.
                double tail = 0;
                for (size_t k = 4; k < n; ++k) tail += std::abs(shifted[k]);
                if (tail > 0) fit.step_cap = std::min(1.0, std::pow(tol / tail, 0.25));
            }
            break;
        }
        case SignalPiece::Kind::Sine: {
            double a = p.omega * t0 + p.phase;
            double s = std::sin(a), co = std::cos(a), w = p.omega;
            fit.c = {p.offset + p.amplitude * s, p.amplitude * w * co, -p.amplitude * w * w * s / 2,
                     -p.amplitude * w * w * w * co / 6};
            double lead = std::abs(p.amplitude) * w * w * w * w / 24.0;
            if (lead > 0) fit.step_cap = std::pow(tol / lead, 0.25);
            break;
        }
        case SignalPiece::Kind::HeldNoise: {
            double rel = t0 - p.t_begin;
            int64_t cell = static_cast<int64_t>(std::floor(rel / p.noise_dt));
            if (cell < 0) cell = 0;
            fit.c = {noise_cell_value(p, cell), 0, 0, 0};
            double next_edge = p.t_begin + (static_cast<double>(cell) + 1) * p.noise_dt;
            fit.valid_until = std::min(fit.valid_until, next_edge);
            break;
        }
    }
    return fit;
}

double InputSignal::binom(size_t nn, size_t kk) {
    double r = 1;
    for (size_t i = 0; i < kk; ++i) r = r * static_cast<double>(nn - i) / static_cast<double>(i + 1);
    return r;
}

void InputSignal::collect_breakpoints(double horizon, std::vector<double>& out) const {
    for (size_t i = 1; i < pieces_.size(); ++i)
        if (pieces_[i].t_begin > 0 && pieces_[i].t_begin < horizon) out.push_back(pieces_[i].t_begin);
    for (size_t i = 0; i < pieces_.size(); ++i) {
        const auto& p = pieces_[i];
        if (p.kind != SignalPiece::Kind::HeldNoise) continue;
        double end = (i + 1 < pieces_.size()) ? pieces_[i + 1].t_begin : horizon;
        end = std::min(end, horizon);
        for (double edge = p.t_begin + p.noise_dt; edge < end; edge += p.noise_dt) out.push_back(edge);
    }
}

InputSignal InputSignal::plus(const InputSignal& other) const {
    // Merge breakpoints; each merged segment must combine to a closed form.
    std::vector<double> starts{0.0};
    for (const auto& p : pieces_) starts.push_back(p.t_begin);
    for (const auto& p : other.pieces_) starts.push_back(p.t_begin);
    std::sort(starts.begin(), starts.end());
    starts.erase(std::unique(starts.begin(), starts.end()), starts.end());

    std::vector<SignalPiece> merged;
    for (double t0 : starts) {
        const SignalPiece& a = piece_at(t0);
        const SignalPiece& b = other.piece_at(t0);
        SignalPiece out;
        out.t_begin = t0;
        auto is_poly = [](const SignalPiece& p) { return p.kind == SignalPiece::Kind::Polynomial; };
        auto is_const = [&](const SignalPiece& p) { return is_poly(p) && p.coeffs.size() <= 1; };
        if (is_poly(a) && is_poly(b)) {
            out.kind = SignalPiece::Kind::Polynomial;
            out.coeffs.assign(std::max(a.coeffs.size(), b.coeffs.size()), 0.0);
            // Rebase both at t0 before adding.
            for (const SignalPiece* src : {&a, &b}) {
                double s0 = t0 - src->t_begin;
                size_t n = src->coeffs.size();
                for (size_t k = 0; k < n; ++k) {
                    double acc = 0;
                    for (size_t j = n; j-- > k;) acc = acc * s0 + src->coeffs[j] * binom(j, k);
                    out.coeffs[k] += acc;
                }
            }
        } else if ((a.kind == SignalPiece::Kind::Sine && is_const(b)) ||
                   (b.kind == SignalPiece::Kind::Sine && is_const(a))) {
            const SignalPiece& sine = a.kind == SignalPiece::Kind::Sine ? a : b;
            const SignalPiece& cst = a.kind == SignalPiece::Kind::Sine ? b : a;
            out = sine;
            out.t_begin = t0;
            out.offset += cst.coeffs.empty() ? 0.0 : cst.coeffs[0];
        } else {
            throw UnsupportedError("signal sum not representable in closed form");
        }
        merged.push_back(std::move(out));
    }
    return piecewise(std::move(merged));
}

} // namespace polyode
