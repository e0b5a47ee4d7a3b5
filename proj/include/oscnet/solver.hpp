#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "oscnet/core.hpp"

namespace oscnet {

/// Two consecutive position samples per observed oscillator.
struct SolverState {
    std::vector<double> x_prev;  ///< positions at t - delta
    std::vector<double> x_curr;  ///< positions at t
};

inline void validate(const SolverState& s) {
    if (s.x_prev.size() != s.x_curr.size())
        throw std::invalid_argument("SolverState: length mismatch");
    for (const auto* v : {&s.x_prev, &s.x_curr})
        for (double x : *v)
            if (!std::isfinite(x)) throw std::invalid_argument("SolverState: non-finite value");
}

/// One second-order finite-difference step of the damped oscillator:
/// x(t+delta) = (-b delta/m)(x_t - x_{t-delta}) - (k delta^2/m) x_t + 2 x_t - x_{t-delta}.
inline double step_single(const CanonicalWeights& w, double x_prev, double x_curr, double delta) {
    return (-w.damping * delta / w.mass) * (x_curr - x_prev) -
           (w.spring * delta * delta / w.mass) * x_curr + 2.0 * x_curr - x_prev;
}

inline double step_single(const CanonicalWeights& w, const SolverState& s, double delta) {
    if (!(delta > 0.0)) throw std::invalid_argument("step_single: delta must be > 0");
    return step_single(w, s.x_prev.at(0), s.x_curr.at(0), delta);
}

/// Single-filter variant: damping is structurally absent, so the step is the
/// plain position-Verlet map and conserves its discrete energy exactly.
inline double step_single_conservative(const CanonicalWeights& w, double x_prev, double x_curr,
                                       double delta) {
    return 2.0 * x_curr - x_prev - (w.spring * delta * delta / w.mass) * x_curr;
}

inline double step_single_conservative(const CanonicalWeights& w, const SolverState& s,
                                       double delta) {
    if (!(delta > 0.0))
        throw std::invalid_argument("step_single_conservative: delta must be > 0");
    return step_single_conservative(w, s.x_prev.at(0), s.x_curr.at(0), delta);
}

/// Discrete (Verlet) energy of the conservative map; constant along its
/// iterates up to floating-point rounding.
inline double verlet_energy(const CanonicalWeights& w, double x_prev, double x_curr,
                            double delta) {
    const double vel = (x_curr - x_prev) / delta;
    return 0.5 * w.mass * vel * vel + 0.5 * w.spring * x_curr * x_prev;
}

/// Coupled two-oscillator step in canonical weights.
inline std::array<double, 2> step_coupled(const CanonicalWeights& w1, const CanonicalWeights& w2,
                                          double x1_prev, double x1_curr, double x2_prev,
                                          double x2_curr, double delta) {
    const double d2 = delta * delta;
    const double x1n = (-w1.damping * delta / w1.mass) * (x1_curr - x1_prev) -
                       (d2 / w1.mass) * (w1.spring + w2.spring) * x1_curr +
                       (w2.spring * d2 / w1.mass) * x2_curr + 2.0 * x1_curr - x1_prev;
    const double x2n = (-w2.damping * delta / w2.mass) * (x2_curr - x2_prev) +
                       (w2.spring * d2 / w2.mass) * (x1_curr - x2_curr) + 2.0 * x2_curr - x2_prev;
    return {x1n, x2n};
}

inline std::array<double, 2> step_coupled(const CanonicalWeights& w1, const CanonicalWeights& w2,
                                          const SolverState& s, double delta) {
    if (!(delta > 0.0)) throw std::invalid_argument("step_coupled: delta must be > 0");
    if (s.x_curr.size() != 2) throw std::invalid_argument("step_coupled: need a 2-oscillator state");
    return step_coupled(w1, w2, s.x_prev[0], s.x_curr[0], s.x_prev[1], s.x_curr[1], delta);
}

/// The same coupled step written purely in the combined parameters; no delta
/// appears because it is folded into the weights.
inline std::array<double, 2> step_combined(const CombinedWeights& u, double x1_prev,
                                           double x1_curr, double x2_prev, double x2_curr) {
    const double x1n =
        -u.c * (x1_curr - x1_prev) - u.a * u.e * x1_curr + u.a * x2_curr + 2.0 * x1_curr - x1_prev;
    const double x2n =
        -u.d * (x2_curr - x2_prev) + u.b * (x1_curr - x2_curr) + 2.0 * x2_curr - x2_prev;
    return {x1n, x2n};
}

inline std::array<double, 2> step_combined(const CombinedWeights& u, const SolverState& s) {
    if (s.x_curr.size() != 2)
        throw std::invalid_argument("step_combined: need a 2-oscillator state");
    return step_combined(u, s.x_prev[0], s.x_curr[0], s.x_prev[1], s.x_curr[1]);
}

/// First-order residual baseline: x_{l+1} = x_l + d * (gain * x_l).
inline double step_euler_resnet(double gain, double x, double d) {
    if (!(d > 0.0)) throw std::invalid_argument("step_euler_resnet: layer step must be > 0");
    return x + d * (gain * x);
}

namespace detail {

inline double max_abs(const std::vector<Trajectory>& trs) {
    double m = 0.0;
    for (const auto& tr : trs)
        for (double v : tr.samples) m = std::max(m, std::abs(v));
    return m;
}

}  // namespace detail

/// Free-running multi-step forecast driven by an arbitrary step map. Each
/// produced point becomes part of the state for the next step. `step` maps
/// (x_prev, x_curr) spans of channel values to the next values. Throws
/// ForecastDivergedError when any |x| exceeds 1000x the seed amplitude.
template <class StepFn>
std::vector<Trajectory> free_forecast_steps(StepFn&& step, const std::vector<Trajectory>& seed,
                                            long horizon) {
    if (seed.empty()) throw std::invalid_argument("free_forecast_steps: no seed channels");
    const std::size_t channels = seed.size();
    for (const auto& tr : seed) validate_trajectory(tr, 2);
    const double guard = 1000.0 * detail::max_abs(seed);

    std::vector<double> x_prev(channels), x_curr(channels), x_next(channels);
    for (std::size_t c = 0; c < channels; ++c) {
        const auto& s = seed[c].samples;
        x_prev[c] = s[s.size() - 2];
        x_curr[c] = s[s.size() - 1];
    }

    std::vector<Trajectory> out(channels);
    for (std::size_t c = 0; c < channels; ++c) {
        out[c].delta = seed[c].delta;
        out[c].t0 = seed[c].time_at(seed[c].size());
        out[c].samples.reserve(static_cast<std::size_t>(horizon > 0 ? horizon : 0));
    }

    for (long h = 0; h < horizon; ++h) {
        step(x_prev, x_curr, x_next);
        for (std::size_t c = 0; c < channels; ++c) {
            if (!std::isfinite(x_next[c]) || std::abs(x_next[c]) > guard)
                throw ForecastDivergedError(
                    h, "forecast diverged at step " + std::to_string(h));
            out[c].samples.push_back(x_next[c]);
        }
        std::swap(x_prev, x_curr);
        std::swap(x_curr, x_next);
    }
    return out;
}

}  // namespace oscnet
