#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "oscnet/core.hpp"
#include "oscnet/stencil.hpp"

namespace oscnet {

namespace detail {

/// Raw causal/valid convolution with an arbitrary coefficient vector
/// (index 0 = oldest tap).
inline Trajectory convolve(const Trajectory& x, const std::vector<double>& coeffs,
                           Padding padding) {
    const std::size_t L = coeffs.size();
    if (L == 0) throw std::invalid_argument("convolve: empty kernel");
    if (padding == Padding::valid && x.samples.size() < L)
        throw std::invalid_argument("convolve: input shorter than kernel in valid mode");

    Trajectory out;
    out.delta = x.delta;
    if (padding == Padding::valid) {
        out.t0 = x.t0 + static_cast<double>(L - 1) * x.delta;
        out.samples.resize(x.samples.size() - (L - 1));
        for (std::size_t t = 0; t < out.samples.size(); ++t) {
            double acc = 0.0;
            for (std::size_t j = 0; j < L; ++j) acc += coeffs[j] * x.samples[t + j];
            out.samples[t] = acc;
        }
    } else {
        out.t0 = x.t0;
        out.samples.resize(x.samples.size());
        for (std::size_t t = 0; t < out.samples.size(); ++t) {
            double acc = 0.0;
            for (std::size_t j = 0; j < L; ++j) {
                const std::ptrdiff_t idx = static_cast<std::ptrdiff_t>(t) -
                                           static_cast<std::ptrdiff_t>(L - 1) +
                                           static_cast<std::ptrdiff_t>(j);
                if (idx >= 0) acc += coeffs[j] * x.samples[static_cast<std::size_t>(idx)];
            }
            out.samples[t] = acc;
        }
    }
    return out;
}

}  // namespace detail

/// Reconstructs the hidden oscillator's trajectory from the observed one.
///
/// Projection mode evaluates alpha*D2(x1) + beta*D1(x1) + gamma*x1 with the
/// bank's backward stencils; wide mode convolves x1 with the free kernel.
/// In valid mode the output is trimmed to indices where the longest stencil is
/// fully supported (its t0 advances past the trimmed region).
inline Trajectory map_to_hidden(const Trajectory& x1, const MappingParams& params,
                                const StencilBank& bank) {
    validate(params);
    validate_trajectory(x1, 1);

    if (!params.is_projection()) return detail::convolve(x1, params.kernel(), params.padding);

    if (bank.accuracy_order != params.stencil_accuracy)
        throw std::invalid_argument("map_to_hidden: bank does not match stencil_accuracy");
    const auto& p = params.projection();
    Trajectory d1 = apply_stencil(x1, bank.d1, params.padding);
    Trajectory d2 = apply_stencil(x1, bank.d2, params.padding);

    Trajectory out;
    out.delta = x1.delta;
    if (params.padding == Padding::valid) {
        // d2 has the shorter support; shift d1 and x1 onto it
        const std::size_t off = bank.d2.length() - 1;
        const std::size_t shift = bank.d2.length() - bank.d1.length();
        out.t0 = d2.t0;
        out.samples.resize(d2.samples.size());
        for (std::size_t t = 0; t < out.samples.size(); ++t)
            out.samples[t] = p.alpha * d2.samples[t] + p.beta * d1.samples[t + shift] +
                             p.gamma * x1.samples[t + off];
    } else {
        out.t0 = x1.t0;
        out.samples.resize(x1.samples.size());
        for (std::size_t t = 0; t < out.samples.size(); ++t)
            out.samples[t] =
                p.alpha * d2.samples[t] + p.beta * d1.samples[t] + p.gamma * x1.samples[t];
    }
    return out;
}

/// Recovers oscillator i (1-based, i >= 2) of a chain from its predecessors:
/// x_i = (1/k_i) [ m_{i-1} D2(x_{i-1})/delta^2 + b_{i-1} D1(x_{i-1})/delta
///                 + k_{i-1} (x_{i-1} - x_{i-2}) ] + x_{i-1},   x_0 == 0.
/// For i = 2 this agrees with map_to_hidden under projection_from_canonical.
inline Trajectory recover_xi(const std::vector<Trajectory>& prefix, const ChainSystem& chain,
                             const StencilBank& bank, Padding padding) {
    const std::size_t i = prefix.size() + 1;  // oscillator being recovered, 1-based
    if (i < 2) throw std::invalid_argument("recover_xi: need at least one observed predecessor");
    if (chain.size() < i) throw std::invalid_argument("recover_xi: chain shorter than index");
    validate(chain);

    const Trajectory& xp = prefix[i - 2];  // x_{i-1}
    validate_trajectory(xp, 1);
    const double delta = xp.delta;
    const CanonicalWeights& wp = chain[i - 2];  // weights of oscillator i-1
    const double k_i = chain[i - 1].spring;

    const Trajectory* xpp = (i >= 3) ? &prefix[i - 3] : nullptr;  // x_{i-2}, null means wall
    if (xpp && (xpp->samples.size() != xp.samples.size() || xpp->delta != xp.delta))
        throw std::invalid_argument("recover_xi: predecessor trajectories misaligned");

    Trajectory d1 = apply_stencil(xp, bank.d1, padding);
    Trajectory d2 = apply_stencil(xp, bank.d2, padding);

    const double inv_d1 = 1.0 / delta;
    const double inv_d2 = 1.0 / (delta * delta);

    Trajectory out;
    out.delta = delta;
    if (padding == Padding::valid) {
        const std::size_t off = bank.d2.length() - 1;
        const std::size_t shift = bank.d2.length() - bank.d1.length();
        out.t0 = d2.t0;
        out.samples.resize(d2.samples.size());
        for (std::size_t t = 0; t < out.samples.size(); ++t) {
            const double xprev_here = xpp ? xpp->samples[t + off] : 0.0;
            const double accel = wp.mass * d2.samples[t] * inv_d2;
            const double vel = wp.damping * d1.samples[t + shift] * inv_d1;
            const double stretch = wp.spring * (xp.samples[t + off] - xprev_here);
            out.samples[t] = (accel + vel + stretch) / k_i + xp.samples[t + off];
        }
    } else {
        out.t0 = xp.t0;
        out.samples.resize(xp.samples.size());
        for (std::size_t t = 0; t < out.samples.size(); ++t) {
            const double xprev_here = xpp ? xpp->samples[t] : 0.0;
            const double accel = wp.mass * d2.samples[t] * inv_d2;
            const double vel = wp.damping * d1.samples[t] * inv_d1;
            const double stretch = wp.spring * (xp.samples[t] - xprev_here);
            out.samples[t] = (accel + vel + stretch) / k_i + xp.samples[t];
        }
    }
    return out;
}

}  // namespace oscnet
