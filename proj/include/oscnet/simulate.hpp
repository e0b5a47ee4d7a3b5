#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "oscnet/core.hpp"

namespace oscnet {

/// Positions and velocities at t = 0, one entry per oscillator.
struct InitialState {
    std::vector<double> positions;   // m
    std::vector<double> velocities;  // m/s
};

inline void validate(const InitialState& s, std::size_t n_oscillators) {
    if (s.positions.size() != n_oscillators || s.velocities.size() != n_oscillators)
        throw std::invalid_argument("InitialState: length mismatch with chain");
    for (double v : s.positions)
        if (!std::isfinite(v)) throw std::invalid_argument("InitialState: non-finite position");
    for (double v : s.velocities)
        if (!std::isfinite(v)) throw std::invalid_argument("InitialState: non-finite velocity");
}

/// Optional additive Gaussian measurement noise, deterministic given the seed.
struct NoiseSpec {
    double sigma = 0.0;
    std::uint64_t seed = 0;
};

namespace detail {

/// Accelerations of the wall-to-free chain. Spring i pulls mass i toward mass
/// i-1 (the wall for i = 0); damping acts against absolute velocity.
inline void chain_accel(const ChainSystem& chain, const std::vector<double>& x,
                        const std::vector<double>& v, std::vector<double>& a) {
    const std::size_t n = chain.size();
    for (std::size_t i = 0; i < n; ++i) {
        double f = -chain[i].damping * v[i];
        f -= chain[i].spring * (x[i] - (i > 0 ? x[i - 1] : 0.0));
        if (i + 1 < n) f += chain[i + 1].spring * (x[i + 1] - x[i]);
        a[i] = f / chain[i].mass;
    }
}

// Box-Muller on a raw mt19937_64 stream; std::normal_distribution is not
// bit-portable across standard libraries.
class GaussianStream {
  public:
    explicit GaussianStream(std::uint64_t seed) : rng_(seed) {}
    double next(double sigma) {
        if (have_spare_) {
            have_spare_ = false;
            return spare_ * sigma;
        }
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.141592653589793238462643383279502884 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta) * sigma;
    }

  private:
    double uniform() {
        return (static_cast<double>(rng_()) + 0.5) * (1.0 / 18446744073709551616.0);
    }
    std::mt19937_64 rng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace detail

/// Positions and velocities of every oscillator at the sample times.
struct ChainStates {
    std::vector<Trajectory> positions;
    std::vector<Trajectory> velocities;
};

namespace detail {

// Simulation tolerates a detached spring (k = 0, the decoupled limit), which
// the trainable-weight invariant does not.
inline void validate_for_simulation(const ChainSystem& chain) {
    if (chain.empty()) throw std::invalid_argument("ChainSystem: empty");
    for (const auto& w : chain) {
        if (!(w.mass > 0.0) || !std::isfinite(w.mass))
            throw std::invalid_argument("simulate: mass must be > 0");
        if (!(w.damping >= 0.0) || !std::isfinite(w.damping))
            throw std::invalid_argument("simulate: damping must be >= 0");
        if (!(w.spring >= 0.0) || !std::isfinite(w.spring))
            throw std::invalid_argument("simulate: spring must be >= 0");
    }
}

}  // namespace detail

/// Integrates the chain ODE with classical RK4 at `substeps` internal steps per
/// output sample.
inline ChainStates simulate_chain_states(const ChainSystem& chain, const InitialState& init,
                                         double delta, long n, int substeps = 100) {
    detail::validate_for_simulation(chain);
    validate(init, chain.size());
    if (!(delta > 0.0)) throw std::invalid_argument("simulate_chain: delta must be > 0");
    if (n < 3) throw std::invalid_argument("simulate_chain: need n >= 3 samples");
    if (substeps < 1) throw std::invalid_argument("simulate_chain: substeps must be >= 1");

    const std::size_t N = chain.size();
    std::vector<double> x = init.positions, v = init.velocities;
    std::vector<double> k1x(N), k1v(N), k2x(N), k2v(N), k3x(N), k3v(N), k4x(N), k4v(N), tx(N),
        tv(N);

    ChainStates out;
    out.positions.resize(N);
    out.velocities.resize(N);
    for (std::size_t i = 0; i < N; ++i) {
        for (auto* tr : {&out.positions[i], &out.velocities[i]}) {
            tr->samples.resize(static_cast<std::size_t>(n));
            tr->delta = delta;
            tr->t0 = 0.0;
        }
        out.positions[i].samples[0] = x[i];
        out.velocities[i].samples[0] = v[i];
    }

    const double h = delta / substeps;
    for (long s = 1; s < n; ++s) {
        for (int sub = 0; sub < substeps; ++sub) {
            detail::chain_accel(chain, x, v, k1v);
            k1x = v;
            for (std::size_t i = 0; i < N; ++i) {
                tx[i] = x[i] + 0.5 * h * k1x[i];
                tv[i] = v[i] + 0.5 * h * k1v[i];
            }
            detail::chain_accel(chain, tx, tv, k2v);
            k2x = tv;
            for (std::size_t i = 0; i < N; ++i) {
                tx[i] = x[i] + 0.5 * h * k2x[i];
                tv[i] = v[i] + 0.5 * h * k2v[i];
            }
            detail::chain_accel(chain, tx, tv, k3v);
            k3x = tv;
            for (std::size_t i = 0; i < N; ++i) {
                tx[i] = x[i] + h * k3x[i];
                tv[i] = v[i] + h * k3v[i];
            }
            detail::chain_accel(chain, tx, tv, k4v);
            k4x = tv;
            for (std::size_t i = 0; i < N; ++i) {
                x[i] += (h / 6.0) * (k1x[i] + 2.0 * k2x[i] + 2.0 * k3x[i] + k4x[i]);
                v[i] += (h / 6.0) * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i]);
            }
        }
        for (std::size_t i = 0; i < N; ++i) {
            out.positions[i].samples[static_cast<std::size_t>(s)] = x[i];
            out.velocities[i].samples[static_cast<std::size_t>(s)] = v[i];
        }
    }
    return out;
}

/// Position trajectories only, with optional additive measurement noise.
inline std::vector<Trajectory> simulate_chain(const ChainSystem& chain, const InitialState& init,
                                              double delta, long n,
                                              const NoiseSpec& noise = NoiseSpec{},
                                              int substeps = 100) {
    auto states = simulate_chain_states(chain, init, delta, n, substeps);
    if (noise.sigma > 0.0) {
        detail::GaussianStream g(noise.seed);
        for (auto& tr : states.positions)
            for (auto& s : tr.samples) s += g.next(noise.sigma);
    }
    return std::move(states.positions);
}

/// Single damped oscillator sampled at spacing delta.
inline Trajectory simulate_single(const CanonicalWeights& w, const InitialState& init, double delta,
                                  long n, const NoiseSpec& noise = NoiseSpec{}, int substeps = 100) {
    return simulate_chain(ChainSystem{w}, init, delta, n, noise, substeps)[0];
}

/// Two coupled oscillators in the wall-to-free topology.
inline std::pair<Trajectory, Trajectory> simulate_coupled(const ChainSystem& chain,
                                                          const InitialState& init, double delta,
                                                          long n,
                                                          const NoiseSpec& noise = NoiseSpec{},
                                                          int substeps = 100) {
    if (chain.size() != 2) throw std::invalid_argument("simulate_coupled: need exactly 2 oscillators");
    auto trajs = simulate_chain(chain, init, delta, n, noise, substeps);
    return {std::move(trajs[0]), std::move(trajs[1])};
}

/// Closed-form underdamped solution x(t) = e^{-g t}(x0 cos wd t + ((v0+g x0)/wd) sin wd t),
/// g = b/2m, wd = sqrt(k/m - g^2). Independent oracle for the integrator.
inline double analytic_single(const CanonicalWeights& w, const InitialState& init, double t) {
    validate(w);
    validate(init, 1);
    const double g = w.damping / (2.0 * w.mass);
    const double w0sq = w.spring / w.mass;
    if (!(w0sq > g * g))
        throw std::domain_error("analytic_single: requires the underdamped regime b^2 < 4 m k");
    const double wd = std::sqrt(w0sq - g * g);
    const double x0 = init.positions[0];
    const double v0 = init.velocities[0];
    return std::exp(-g * t) * (x0 * std::cos(wd * t) + (v0 + g * x0) / wd * std::sin(wd * t));
}

/// Kinetic plus spring potential energy of the chain state.
inline double chain_energy(const ChainSystem& chain, const std::vector<double>& x,
                           const std::vector<double>& v) {
    double e = 0.0;
    for (std::size_t i = 0; i < chain.size(); ++i) {
        e += 0.5 * chain[i].mass * v[i] * v[i];
        const double stretch = x[i] - (i > 0 ? x[i - 1] : 0.0);
        e += 0.5 * chain[i].spring * stretch * stretch;
    }
    return e;
}

}  // namespace oscnet
