#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "oscnet/core.hpp"
#include "oscnet/mapping.hpp"
#include "oscnet/solver.hpp"
#include "oscnet/stencil.hpp"
#include "oscnet/training.hpp"

namespace oscnet {

/// Mapping + solver composition trained on the observed oscillator only.
///
/// shared == true ties the size-1 projection kernel to the solver weights, so
/// the only gradients that survive the algebra are those of b1/m1 (canonical)
/// or c (combined); the spring constants cancel exactly and keep their
/// initialization. shared == false trains a free wide kernel alongside the
/// solver-side weights.
struct PartialModel {
    Parametrization parametrization = Parametrization::canonical;
    Padding padding = Padding::valid;
    int stencil_accuracy = 5;
    bool shared = true;
    std::vector<double> params;  ///< canonical [m1,m2,b1,b2,k1,k2] | combined [a,b,c,d,e]
    std::vector<double> kernel;  ///< wide-mode taps, oldest first; empty when shared
};

namespace detail {

inline void validate_partial(const PartialModel& m) {
    const std::size_t want = m.parametrization == Parametrization::canonical ? 6 : 5;
    if (m.params.size() != want)
        throw std::invalid_argument("PartialModel: expected " + std::to_string(want) + " params");
    if (m.shared && !m.kernel.empty())
        throw std::invalid_argument("PartialModel: shared mode carries no kernel");
    if (!m.shared && m.kernel.empty())
        throw std::invalid_argument("PartialModel: wide mode needs a kernel");
    if (m.stencil_accuracy < 1 || m.stencil_accuracy > 8)
        throw std::invalid_argument("PartialModel: stencil_accuracy must be in [1, 8]");
}

inline ProjectionParams shared_projection(const PartialModel& m, double delta) {
    if (m.parametrization == Parametrization::canonical) {
        const double m1 = m.params[0], b1 = m.params[2], k1 = m.params[4], k2 = m.params[5];
        return projection_from_canonical(CanonicalWeights{m1, b1, k1}, k2, delta);
    }
    const double a = m.params[0], c = m.params[2], e = m.params[4];
    return ProjectionParams{1.0 / a, c / a, e};
}

}  // namespace detail

/// Mapping configuration equivalent to the model's current weights.
inline MappingParams mapping_params(const PartialModel& m, double delta) {
    detail::validate_partial(m);
    MappingParams p;
    p.padding = m.padding;
    p.stencil_accuracy = m.stencil_accuracy;
    if (m.shared)
        p.weights = detail::shared_projection(m, delta);
    else
        p.weights = m.kernel;
    return p;
}

/// Reconstruction of the hidden channel over an observed window.
inline Trajectory map_hidden(const PartialModel& m, const Trajectory& x1) {
    const auto bank = StencilBank::make(m.stencil_accuracy);
    return map_to_hidden(x1, mapping_params(m, x1.delta), bank);
}

/// Wide kernel that reproduces the shared projection at the given weights, so
/// the two modes coincide at initialization.
inline std::vector<double> embed_projection_kernel(const ProjectionParams& p,
                                                   const StencilBank& bank,
                                                   std::size_t kernel_len = 25) {
    const std::size_t L2 = bank.d2.length(), L1 = bank.d1.length();
    if (kernel_len < L2)
        throw std::invalid_argument("embed_projection_kernel: kernel shorter than stencil");
    std::vector<double> k(kernel_len, 0.0);
    for (std::size_t j = 0; j < L2; ++j)
        k[kernel_len - L2 + j] += p.alpha * bank.d2.coefficients[j];
    for (std::size_t j = 0; j < L1; ++j)
        k[kernel_len - L1 + j] += p.beta * bank.d1.coefficients[j];
    k[kernel_len - 1] += p.gamma;
    return k;
}

inline PartialModel make_shared_partial_model(Parametrization parametrization,
                                              std::vector<double> params, Padding padding,
                                              int stencil_accuracy) {
    PartialModel m{parametrization, padding, stencil_accuracy, true, std::move(params), {}};
    detail::validate_partial(m);
    return m;
}

inline PartialModel make_wide_partial_model(Parametrization parametrization,
                                            std::vector<double> params, Padding padding,
                                            int stencil_accuracy, double delta,
                                            std::size_t kernel_len = 25) {
    PartialModel m{parametrization, padding, stencil_accuracy, true, std::move(params), {}};
    detail::validate_partial(m);
    const auto bank = StencilBank::make(stencil_accuracy);
    m.kernel = embed_projection_kernel(detail::shared_projection(m, delta), bank, kernel_len);
    m.shared = false;
    return m;
}

namespace detail {

struct PartialLossContext {
    const Trajectory& x1;
    Padding padding;
    bool shared;
    bool canonical;
    Trajectory d1v, d2v;       // shared mode stencil features
    std::size_t d1_len, d2_len;
    std::size_t kernel_len;    // wide mode
    std::size_t t_start;       // first prediction index in x1 space
};

inline PartialLossContext make_partial_context(const PartialModel& m, const Trajectory& x1,
                                               const StencilBank& bank) {
    PartialLossContext ctx{x1,
                           m.padding,
                           m.shared,
                           m.parametrization == Parametrization::canonical,
                           {},
                           {},
                           bank.d1.length(),
                           bank.d2.length(),
                           m.kernel.size(),
                           1};
    if (m.shared) {
        ctx.d1v = apply_stencil(x1, bank.d1, m.padding);
        ctx.d2v = apply_stencil(x1, bank.d2, m.padding);
        if (m.padding == Padding::valid) ctx.t_start = ctx.d2_len - 1;
    } else {
        if (m.padding == Padding::valid) {
            if (x1.samples.size() < ctx.kernel_len + 2)
                throw std::invalid_argument("fit_partial: window shorter than kernel");
            ctx.t_start = ctx.kernel_len - 1;
        }
    }
    ctx.t_start = std::max<std::size_t>(ctx.t_start, 1);
    if (x1.samples.size() < ctx.t_start + 2)
        throw std::invalid_argument("fit_partial: window too short for configuration");
    return ctx;
}

/// One-step loss of the composed mapping+solver model over the observed
/// channel and its exact gradient in the packed parameter vector
/// (solver params followed by kernel taps in wide mode).
inline double partial_loss_grad(const std::vector<double>& p, const PartialLossContext& ctx,
                                double* grad) {
    const auto& x = ctx.x1.samples;
    const double delta = ctx.x1.delta;
    const std::size_t n = x.size();
    const double T = static_cast<double>(n - 1 - ctx.t_start);
    double loss = 0.0;

    if (ctx.shared) {
        // collapsed form: pred = c (D1 - (x_t - x_{t-1})) + D2 + 2 x_t - x_{t-1};
        // every spring term cancels identically, so only c (= b1 delta / m1)
        // carries gradient.
        const double c = ctx.canonical ? p[2] * delta / p[0] : p[2];
        double gc = 0.0;
        for (std::size_t t = ctx.t_start; t + 1 < n; ++t) {
            const double d1 =
                ctx.padding == Padding::valid
                    ? ctx.d1v.samples[t - (ctx.d1_len - 1)]
                    : ctx.d1v.samples[t];
            const double d2 =
                ctx.padding == Padding::valid
                    ? ctx.d2v.samples[t - (ctx.d2_len - 1)]
                    : ctx.d2v.samples[t];
            const double dd = x[t] - x[t - 1];
            const double feat = d1 - dd;
            const double pred = c * feat + d2 + 2.0 * x[t] - x[t - 1];
            const double err = pred - x[t + 1];
            loss += err * err;
            if (grad) gc += 2.0 * err * feat;
        }
        if (grad) {
            gc /= T;
            if (ctx.canonical) {
                grad[0] = gc * (-p[2] * delta / (p[0] * p[0]));  // d c / d m1
                grad[2] = gc * (delta / p[0]);                   // d c / d b1
                // m2, b2, k1, k2 cancel exactly: gradients are identically zero
            } else {
                grad[2] = gc;
            }
        }
        return loss / T;
    }

    // wide kernel mode
    const std::size_t K = ctx.kernel_len;
    const double* kern = p.data() + (ctx.canonical ? 6 : 5);
    for (std::size_t t = ctx.t_start; t + 1 < n; ++t) {
        double x2h = 0.0;
        for (std::size_t j = 0; j < K; ++j) {
            const std::ptrdiff_t idx = static_cast<std::ptrdiff_t>(t) -
                                       static_cast<std::ptrdiff_t>(K - 1) +
                                       static_cast<std::ptrdiff_t>(j);
            if (idx >= 0) x2h += kern[j] * x[static_cast<std::size_t>(idx)];
        }
        const double dd = x[t] - x[t - 1];
        double pred, couple;  // couple = d pred / d x2h
        if (ctx.canonical) {
            const double m1 = p[0], b1 = p[2], k1 = p[4], k2 = p[5];
            const double d2 = delta * delta;
            couple = k2 * d2 / m1;
            pred = (-b1 * delta / m1) * dd - (d2 / m1) * (k1 + k2) * x[t] + couple * x2h +
                   2.0 * x[t] - x[t - 1];
        } else {
            const double a = p[0], c = p[2], e = p[4];
            couple = a;
            pred = -c * dd - a * e * x[t] + a * x2h + 2.0 * x[t] - x[t - 1];
        }
        const double err = pred - x[t + 1];
        loss += err * err;
        if (grad) {
            const double e2 = 2.0 * err;
            if (ctx.canonical) {
                const double m1 = p[0], b1 = p[2], k1 = p[4], k2 = p[5];
                const double d2 = delta * delta;
                grad[0] += e2 * ((b1 * delta / (m1 * m1)) * dd +
                                 (d2 / (m1 * m1)) * (k1 + k2) * x[t] -
                                 (k2 * d2 / (m1 * m1)) * x2h);
                grad[2] += e2 * (-(delta / m1) * dd);
                grad[4] += e2 * (-(d2 / m1) * x[t]);
                grad[5] += e2 * ((d2 / m1) * (x2h - x[t]));
            } else {
                const double a = p[0], e = p[4];
                grad[0] += e2 * (x2h - e * x[t]);
                grad[2] += e2 * (-dd);
                grad[4] += e2 * (-a * x[t]);
            }
            const std::size_t base = ctx.canonical ? 6 : 5;
            for (std::size_t j = 0; j < K; ++j) {
                const std::ptrdiff_t idx = static_cast<std::ptrdiff_t>(t) -
                                           static_cast<std::ptrdiff_t>(K - 1) +
                                           static_cast<std::ptrdiff_t>(j);
                if (idx >= 0)
                    grad[base + j] += e2 * couple * x[static_cast<std::size_t>(idx)];
            }
        }
    }
    if (grad) {
        const std::size_t total = (ctx.canonical ? 6 : 5) + K;
        for (std::size_t i = 0; i < total; ++i) grad[i] /= T;
    }
    return loss / T;
}

}  // namespace detail

/// One-step loss of the composed model at its current weights.
inline double partial_one_step_loss(const PartialModel& model, const Trajectory& x1) {
    detail::validate_partial(model);
    validate_trajectory(x1);
    const auto bank = StencilBank::make(model.stencil_accuracy);
    const auto ctx = detail::make_partial_context(model, x1, bank);
    std::vector<double> packed = model.params;
    packed.insert(packed.end(), model.kernel.begin(), model.kernel.end());
    return detail::partial_loss_grad(packed, ctx, nullptr);
}

/// Exact gradient of partial_one_step_loss in the packed parameter order
/// (solver params, then kernel taps in wide mode).
inline std::vector<double> partial_gradient(const PartialModel& model, const Trajectory& x1) {
    detail::validate_partial(model);
    validate_trajectory(x1);
    const auto bank = StencilBank::make(model.stencil_accuracy);
    const auto ctx = detail::make_partial_context(model, x1, bank);
    std::vector<double> packed = model.params;
    packed.insert(packed.end(), model.kernel.begin(), model.kernel.end());
    std::vector<double> grad(packed.size(), 0.0);
    detail::partial_loss_grad(packed, ctx, grad.data());
    return grad;
}

/// Fits the partial-observation model on the observed channel only. Parameters
/// outside the reachable subset (m2, b2 canonically; b, d combined) stay at
/// their initialization bit-exactly; in shared mode the spring constants do
/// too, because their gradients vanish identically.
inline FitReport fit_partial(PartialModel& model, const Trajectory& x1, const FitConfig& cfg,
                             const std::vector<double>* truth = nullptr) {
    detail::validate_partial(model);
    validate_trajectory(x1);
    const auto bank = StencilBank::make(model.stencil_accuracy);
    const auto ctx = detail::make_partial_context(model, x1, bank);

    std::vector<double> packed = model.params;
    packed.insert(packed.end(), model.kernel.begin(), model.kernel.end());

    const bool canonical = model.parametrization == Parametrization::canonical;
    std::vector<bool> trainable(packed.size(), true);
    if (canonical) {
        trainable[1] = false;  // m2
        trainable[3] = false;  // b2
    } else {
        trainable[1] = false;  // param_b
        trainable[3] = false;  // param_d
    }

    auto report = detail::optimize(
        packed,
        [&](const std::vector<double>& p, std::vector<double>& g) {
            return detail::partial_loss_grad(p, ctx, g.data());
        },
        cfg, trainable);

    if (canonical)
        report.names = {"m1", "m2", "b1", "b2", "k1", "k2"};
    else
        report.names = {"param_a", "param_b", "param_c", "param_d", "param_e"};
    for (std::size_t j = 0; j < model.kernel.size(); ++j)
        report.names.push_back("kernel_" + std::to_string(j));

    if (truth) {
        report.truth = *truth;
        report.rel_error.resize(truth->size());
        for (std::size_t i = 0; i < truth->size(); ++i)
            report.rel_error[i] =
                std::abs(report.learned[i] - (*truth)[i]) / std::abs((*truth)[i]);
    }

    const std::size_t n_solver = model.params.size();
    model.params.assign(report.learned.begin(), report.learned.begin() + n_solver);
    model.kernel.assign(report.learned.begin() + n_solver, report.learned.end());
    return report;
}

namespace detail {

/// Mapping output at the newest window position only.
inline double mapped_last(const PartialModel& m, const std::vector<double>& win, double delta,
                          const StencilBank& bank) {
    auto tail_dot = [&](const std::vector<double>& coeffs) {
        const std::size_t L = coeffs.size();
        if (m.padding == Padding::valid && win.size() < L)
            throw std::invalid_argument("forecast_partial: window shorter than stencil");
        double acc = 0.0;
        for (std::size_t j = 0; j < L; ++j) {
            const std::ptrdiff_t idx = static_cast<std::ptrdiff_t>(win.size()) -
                                       static_cast<std::ptrdiff_t>(L) +
                                       static_cast<std::ptrdiff_t>(j);
            if (idx >= 0) acc += coeffs[j] * win[static_cast<std::size_t>(idx)];
        }
        return acc;
    };
    if (m.shared) {
        const auto p = shared_projection(m, delta);
        return p.alpha * tail_dot(bank.d2.coefficients) + p.beta * tail_dot(bank.d1.coefficients) +
               p.gamma * win.back();
    }
    return tail_dot(m.kernel);
}

}  // namespace detail

/// Free forecast of the observed channel. Without the inner feedback loop the
/// hidden channel is held at the last mapped value; with it, the mapping is
/// re-evaluated on the growing (partially forecast) window before every step.
inline Trajectory forecast_partial(const PartialModel& model, const Trajectory& x1_window,
                                   long horizon, bool ifl) {
    detail::validate_partial(model);
    validate_trajectory(x1_window, 2);
    const double delta = x1_window.delta;
    const auto bank = StencilBank::make(model.stencil_accuracy);

    Trajectory out{{}, delta, x1_window.time_at(x1_window.size())};
    if (horizon <= 0) return out;
    const double guard = 1000.0 * detail::max_abs({x1_window});

    auto step_x1 = [&](double xp, double xc, double x2h) {
        if (model.parametrization == Parametrization::canonical) {
            const double m1 = model.params[0], b1 = model.params[2], k1 = model.params[4],
                         k2 = model.params[5];
            const double d2 = delta * delta;
            return (-b1 * delta / m1) * (xc - xp) - (d2 / m1) * (k1 + k2) * xc +
                   (k2 * d2 / m1) * x2h + 2.0 * xc - xp;
        }
        const double a = model.params[0], c = model.params[2], e = model.params[4];
        return -c * (xc - xp) - a * e * xc + a * x2h + 2.0 * xc - xp;
    };

    std::vector<double> win = x1_window.samples;
    const double frozen = detail::mapped_last(model, win, delta, bank);
    for (long h = 0; h < horizon; ++h) {
        const double x2h = ifl ? detail::mapped_last(model, win, delta, bank) : frozen;
        const double xn = step_x1(win[win.size() - 2], win[win.size() - 1], x2h);
        if (!std::isfinite(xn) || std::abs(xn) > guard)
            throw ForecastDivergedError(h, "forecast diverged at step " + std::to_string(h));
        out.samples.push_back(xn);
        win.push_back(xn);
    }
    return out;
}

}  // namespace oscnet
