#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "oscnet/core.hpp"

namespace oscnet {

/// Backward finite-difference coefficients on the integer grid
/// {-(n-1), ..., -1, 0} with n = derivative_order + accuracy_order points.
///
/// Coefficient j is the derivative of the j-th Lagrange basis polynomial at 0.
/// The basis numerators have integer coefficients and integer denominators, so
/// each output value is a single exact integer division; the low-order tables
/// (e.g. [1/2, -2, 3/2]) come out bit-exact.
inline Stencil make_backward_stencil(int derivative_order, int accuracy_order) {
    if (derivative_order != 1 && derivative_order != 2)
        throw std::invalid_argument("make_backward_stencil: derivative_order must be 1 or 2");
    if (accuracy_order < 1 || accuracy_order > 8)
        throw std::invalid_argument("make_backward_stencil: accuracy_order must be in [1, 8]");

    const int n = derivative_order + accuracy_order;
    std::vector<double> coeffs(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
        const std::int64_t node_j = -(n - 1) + j;
        // numerator polynomial prod_{i != j} (x - s_i), lowest degree first
        std::vector<std::int64_t> poly{1};
        std::int64_t denom = 1;
        for (int i = 0; i < n; ++i) {
            if (i == j) continue;
            const std::int64_t node_i = -(n - 1) + i;
            poly.push_back(0);
            for (std::size_t p = poly.size() - 1; p > 0; --p)
                poly[p] = poly[p - 1] - node_i * poly[p];
            poly[0] = -node_i * poly[0];
            denom *= node_j - node_i;
        }
        const std::int64_t factorial_d = derivative_order == 1 ? 1 : 2;
        const std::int64_t numer = factorial_d * poly[static_cast<std::size_t>(derivative_order)];
        coeffs[static_cast<std::size_t>(j)] =
            static_cast<double>(numer) / static_cast<double>(denom);
    }
    return Stencil{derivative_order, accuracy_order, std::move(coeffs)};
}

/// Bank of matching first- and second-derivative stencils.
struct StencilBank {
    Stencil d1;
    Stencil d2;
    int accuracy_order;

    static StencilBank make(int accuracy_order) {
        return StencilBank{make_backward_stencil(1, accuracy_order),
                           make_backward_stencil(2, accuracy_order), accuracy_order};
    }
};

/// Convolves the trajectory with the raw stencil coefficients (no 1/delta^k
/// scaling). causal: the input is left zero-padded so the output has the input
/// length, with the first length-1 values corrupted by the padding. valid: the
/// output keeps only fully supported positions and its t0 advances accordingly.
inline Trajectory apply_stencil(const Trajectory& x, const Stencil& s, Padding padding) {
    const std::size_t L = s.length();
    if (padding == Padding::valid && x.samples.size() < L)
        throw std::invalid_argument("apply_stencil: input shorter than stencil in valid mode");
    validate_trajectory(x, padding == Padding::valid ? L : 1);

    Trajectory out;
    out.delta = x.delta;
    if (padding == Padding::valid) {
        out.t0 = x.t0 + static_cast<double>(L - 1) * x.delta;
        out.samples.resize(x.samples.size() - (L - 1));
        for (std::size_t t = 0; t < out.samples.size(); ++t) {
            double acc = 0.0;
            for (std::size_t j = 0; j < L; ++j) acc += s.coefficients[j] * x.samples[t + j];
            out.samples[t] = acc;
        }
    } else {
        out.t0 = x.t0;
        out.samples.resize(x.samples.size());
        for (std::size_t t = 0; t < out.samples.size(); ++t) {
            double acc = 0.0;
            for (std::size_t j = 0; j < L; ++j) {
                // input index t - (L-1) + j, zero left of the window
                const std::ptrdiff_t idx =
                    static_cast<std::ptrdiff_t>(t) - static_cast<std::ptrdiff_t>(L - 1) +
                    static_cast<std::ptrdiff_t>(j);
                if (idx >= 0) acc += s.coefficients[j] * x.samples[static_cast<std::size_t>(idx)];
            }
            out.samples[t] = acc;
        }
    }
    return out;
}

}  // namespace oscnet
