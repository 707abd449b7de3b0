#pragma once

#include "polyode/pivp.hpp"
#include "polyode/signals.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace polyode {

struct SolverConfig {
    enum class Method { taylor, embedded_pair };

    Method method = Method::taylor;
    int order = 20;            // taylor: highest kept power; embedded_pair: 5
    double abs_tol = 1e-12;
    double rel_tol = 1e-12;
    double max_step = 1.0;
    double min_step = 1e-13;
    unsigned precision_bits = 53; // > 53 switches the taylor path to mpfr
    double blowup_threshold = 1e12;
    bool dense = true; // keep per-step coefficients for interpolation

    void validate() const;
};

enum class TraceStatus { ok, blowup, stalled };

struct TraceSample {
    double t = 0;
    std::vector<double> y;
    double deriv_norm = 0; // ||y'(t)||_inf
    double length = 0;     // integral of ||y'||_inf up to t
    double space = 0;      // sup of ||y||_inf up to t
    double budget = 0;     // ||e0|| + integral of ||e|| up to t
};

/// Per-step dense polynomial y_i(t0 + s) = sum_j coeffs[i*(order+1)+j] s^j.
struct DenseStep {
    double t0 = 0, h = 0;
    int order = 0;
    std::vector<double> coeffs;
};

struct TraceMetrics {
    double time = 0, length = 0, space = 0, budget = 0;
};

class Trace {
public:
    int dim = 0;
    std::vector<int> outputs;
    std::vector<TraceSample> samples;
    std::vector<DenseStep> dense;
    TraceStatus status = TraceStatus::ok;
    std::string message;

    double t_end() const { return samples.empty() ? 0.0 : samples.back().t; }
    const std::vector<double>& final_state() const { return samples.back().y; }

    /// State by dense interpolation (falls back to linear between samples).
    std::vector<double> state_at(double t) const;
    std::vector<double> deriv_at(double t) const;

    /// Interpolated meter values; throws if t is outside the trace.
    TraceMetrics metrics_at(double t) const;

    double min_deriv_norm() const;
    double max_abs_state() const;
};

/// trace_metrics operation (meter readout at time t).
inline TraceMetrics trace_metrics(const Trace& trace, double t) { return trace.metrics_at(t); }

/// Integrates a PIVP under external inputs and additive perturbations.
///  - inputs.size() must equal system.input_arity
///  - perturbation is empty or one signal per state (added to y')
///  - x_arg are the formal init arguments (exact rationals)
///  - init_offset, when present, is added to y(0) and its norm seeds the
///    error budget meter
Trace integrate(const Pivp& system, const std::vector<InputSignal>& inputs,
                const std::vector<InputSignal>& perturbation, const std::vector<Rational>& x_arg,
                double horizon, const SolverConfig& cfg,
                const std::vector<double>& init_offset = {});

/// Right-hand side callback form used for expression systems and test
/// oracles: f(t, y, dy). Integrated with the embedded Dormand-Prince 5(4)
/// pair; perturbations are added on top of f.
using RhsFn = std::function<void(double, const std::vector<double>&, std::vector<double>&)>;

Trace integrate_rhs(const RhsFn& f, int dim, const std::vector<double>& y0,
                    const std::vector<InputSignal>& perturbation, double horizon,
                    const SolverConfig& cfg, const std::vector<double>& init_offset = {},
                    const std::vector<double>& extra_breakpoints = {});

/// Taylor coefficients y^(j)/j! for j <= order of the autonomous system
/// y' = p(y) at the given state, via the polynomial recursion.
std::vector<std::vector<Real>> taylor_coefficients(const PolyVector& p, const std::vector<Real>& state,
                                                   int order, unsigned precision_bits = 256);

/// Adaptive Simpson quadrature (also used by the bounds module so meters
/// and lemma integrals share one accuracy model).
double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol,
                        int max_depth = 40);

} // namespace polyode
