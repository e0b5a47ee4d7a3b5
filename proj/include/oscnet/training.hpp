#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "oscnet/core.hpp"
#include "oscnet/solver.hpp"

namespace oscnet {

enum class OptimizerKind { plain_gd, adaptive_moments };
enum class Parametrization { canonical, combined };

inline Parametrization parametrization_from_string(const std::string& s) {
    if (s == "canonical") return Parametrization::canonical;
    if (s == "combined") return Parametrization::combined;
    throw std::invalid_argument("unknown parametrization: " + s);
}

struct FitConfig {
    double learning_rate = 1e-2;
    long max_iterations = 5000;
    double tolerance = 1e-12;  ///< loss-change stop; <= 0 disables
    OptimizerKind optimizer = OptimizerKind::adaptive_moments;
    std::uint64_t seed = 0;
    Parametrization parametrization = Parametrization::canonical;
};

inline void validate(const FitConfig& c) {
    if (!(c.learning_rate > 0.0)) throw std::invalid_argument("FitConfig: learning_rate must be > 0");
    if (c.max_iterations < 1) throw std::invalid_argument("FitConfig: max_iterations must be >= 1");
}

struct FitReport {
    std::vector<std::string> names;
    std::vector<double> init;
    std::vector<double> learned;
    std::vector<double> truth;      ///< empty when unknown
    std::vector<double> rel_error;  ///< |learned - truth| / |truth|, parallel to truth
    std::vector<double> loss_history;
    long loss_stride = 1;  ///< iterations between recorded losses
    long iterations = 0;
    double final_loss = 0.0;
};

namespace detail {

/// Shared optimizer loop. `loss_grad(p, g)` fills g (same length as p) and
/// returns the loss. Entries with trainable[i] == false are never updated.
template <class LossGrad>
FitReport optimize(std::vector<double> params, LossGrad&& loss_grad, const FitConfig& cfg,
                   const std::vector<bool>& trainable) {
    validate(cfg);
    const std::size_t n = params.size();
    std::vector<double> grad(n, 0.0), m1(n, 0.0), m2(n, 0.0);
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    FitReport report;
    report.init = params;
    report.loss_stride = std::max<long>(1, cfg.max_iterations / 10000);
    double prev_loss = 0.0;
    bool have_prev = false;
    long t = 0;
    for (t = 1; t <= cfg.max_iterations; ++t) {
        std::fill(grad.begin(), grad.end(), 0.0);
        const double loss = loss_grad(params, grad);
        if (!std::isfinite(loss))
            throw TrainingDivergedError(t, "non-finite loss at iteration " + std::to_string(t));
        if ((t - 1) % report.loss_stride == 0) report.loss_history.push_back(loss);
        report.final_loss = loss;

        if (cfg.optimizer == OptimizerKind::adaptive_moments) {
            const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
            const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
            for (std::size_t i = 0; i < n; ++i) {
                if (!trainable[i]) continue;
                m1[i] = beta1 * m1[i] + (1.0 - beta1) * grad[i];
                m2[i] = beta2 * m2[i] + (1.0 - beta2) * grad[i] * grad[i];
                params[i] -= cfg.learning_rate * (m1[i] / c1) / (std::sqrt(m2[i] / c2) + eps);
            }
        } else {
            for (std::size_t i = 0; i < n; ++i)
                if (trainable[i]) params[i] -= cfg.learning_rate * grad[i];
        }

        if (have_prev && cfg.tolerance > 0.0 && std::abs(prev_loss - loss) < cfg.tolerance) break;
        prev_loss = loss;
        have_prev = true;
    }
    report.iterations = std::min(t, cfg.max_iterations);
    report.learned = std::move(params);
    return report;
}

inline void attach_truth(FitReport& r, const std::vector<double>& truth) {
    r.truth = truth;
    r.rel_error.resize(truth.size());
    for (std::size_t i = 0; i < truth.size(); ++i)
        r.rel_error[i] = std::abs(r.learned[i] - truth[i]) / std::abs(truth[i]);
}

// ---- single oscillator, canonical weights [m, b, k] ----

inline double single_loss_grad(const std::vector<double>& p, const Trajectory& x, double* grad) {
    const double m = p[0], b = p[1], k = p[2];
    const double delta = x.delta;
    const std::size_t n = x.samples.size();
    const double T = static_cast<double>(n - 2);
    const double cb = -b * delta / m;
    const double ck = k * delta * delta / m;
    double loss = 0.0, gm = 0.0, gb = 0.0, gk = 0.0;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double xp = x.samples[i - 1], xc = x.samples[i];
        const double d = xc - xp;
        const double pred = cb * d - ck * xc + 2.0 * xc - xp;
        const double err = pred - x.samples[i + 1];
        loss += err * err;
        if (grad) {
            gb += 2.0 * err * (-(delta / m) * d);
            gk += 2.0 * err * (-(delta * delta / m) * xc);
            gm += 2.0 * err * ((b * delta / (m * m)) * d + (k * delta * delta / (m * m)) * xc);
        }
    }
    if (grad) {
        grad[0] = gm / T;
        grad[1] = gb / T;
        grad[2] = gk / T;
    }
    return loss / T;
}

// ---- coupled oscillators, canonical weights [m1, m2, b1, b2, k1, k2] ----

inline double coupled_loss_grad(const std::vector<double>& p, const Trajectory& x1,
                                const Trajectory& x2, double* grad) {
    const double m1 = p[0], m2 = p[1], b1 = p[2], b2 = p[3], k1 = p[4], k2 = p[5];
    const double delta = x1.delta;
    const double d2 = delta * delta;
    const std::size_t n = x1.samples.size();
    const double T = static_cast<double>(n - 2);
    double loss = 0.0;
    double g[6] = {0, 0, 0, 0, 0, 0};
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double a1 = x1.samples[i - 1], c1 = x1.samples[i];
        const double a2 = x2.samples[i - 1], c2 = x2.samples[i];
        const double dd1 = c1 - a1, dd2 = c2 - a2;
        const double p1 = (-b1 * delta / m1) * dd1 - (d2 / m1) * (k1 + k2) * c1 +
                          (k2 * d2 / m1) * c2 + 2.0 * c1 - a1;
        const double p2 =
            (-b2 * delta / m2) * dd2 + (k2 * d2 / m2) * (c1 - c2) + 2.0 * c2 - a2;
        const double e1 = p1 - x1.samples[i + 1];
        const double e2 = p2 - x2.samples[i + 1];
        loss += e1 * e1 + e2 * e2;
        if (grad) {
            g[0] += 2.0 * e1 *
                    ((b1 * delta / (m1 * m1)) * dd1 + (d2 / (m1 * m1)) * (k1 + k2) * c1 -
                     (k2 * d2 / (m1 * m1)) * c2);
            g[2] += 2.0 * e1 * (-(delta / m1) * dd1);
            g[4] += 2.0 * e1 * (-(d2 / m1) * c1);
            g[5] += 2.0 * e1 * ((d2 / m1) * (c2 - c1));
            g[1] += 2.0 * e2 *
                    ((b2 * delta / (m2 * m2)) * dd2 - (k2 * d2 / (m2 * m2)) * (c1 - c2));
            g[3] += 2.0 * e2 * (-(delta / m2) * dd2);
            g[5] += 2.0 * e2 * ((d2 / m2) * (c1 - c2));
        }
    }
    if (grad)
        for (int i = 0; i < 6; ++i) grad[i] = g[i] / T;
    return loss / T;
}

// ---- coupled oscillators, combined weights [a, b, c, d, e] ----

inline double combined_loss_grad(const std::vector<double>& p, const Trajectory& x1,
                                 const Trajectory& x2, double* grad) {
    const double a = p[0], b = p[1], c = p[2], d = p[3], e = p[4];
    const std::size_t n = x1.samples.size();
    const double T = static_cast<double>(n - 2);
    double loss = 0.0;
    double g[5] = {0, 0, 0, 0, 0};
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double a1 = x1.samples[i - 1], c1 = x1.samples[i];
        const double a2 = x2.samples[i - 1], c2 = x2.samples[i];
        const double dd1 = c1 - a1, dd2 = c2 - a2;
        const double p1 = -c * dd1 - a * e * c1 + a * c2 + 2.0 * c1 - a1;
        const double p2 = -d * dd2 + b * (c1 - c2) + 2.0 * c2 - a2;
        const double e1 = p1 - x1.samples[i + 1];
        const double e2 = p2 - x2.samples[i + 1];
        loss += e1 * e1 + e2 * e2;
        if (grad) {
            g[0] += 2.0 * e1 * (c2 - e * c1);
            g[2] += 2.0 * e1 * (-dd1);
            g[4] += 2.0 * e1 * (-a * c1);
            g[1] += 2.0 * e2 * (c1 - c2);
            g[3] += 2.0 * e2 * (-dd2);
        }
    }
    if (grad)
        for (int i = 0; i < 5; ++i) grad[i] = g[i] / T;
    return loss / T;
}

}  // namespace detail

/// Mean squared one-step prediction error over the window, summed over channels.
inline double one_step_loss(const CanonicalWeights& w, const Trajectory& x) {
    validate_trajectory(x);
    return detail::single_loss_grad({w.mass, w.damping, w.spring}, x, nullptr);
}

inline double one_step_loss(const CanonicalWeights& w1, const CanonicalWeights& w2,
                            const Trajectory& x1, const Trajectory& x2) {
    validate_trajectory(x1);
    validate_trajectory(x2);
    if (x1.samples.size() != x2.samples.size() || x1.delta != x2.delta)
        throw std::invalid_argument("one_step_loss: misaligned channels");
    return detail::coupled_loss_grad(
        {w1.mass, w2.mass, w1.damping, w2.damping, w1.spring, w2.spring}, x1, x2, nullptr);
}

inline double one_step_loss(const CombinedWeights& u, const Trajectory& x1, const Trajectory& x2) {
    validate_trajectory(x1);
    validate_trajectory(x2);
    if (x1.samples.size() != x2.samples.size() || x1.delta != x2.delta)
        throw std::invalid_argument("one_step_loss: misaligned channels");
    return detail::combined_loss_grad({u.a, u.b, u.c, u.d, u.e}, x1, x2, nullptr);
}

/// Exact partial derivatives of one_step_loss; fields mirror CanonicalWeights.
struct SingleGradient {
    double d_mass, d_damping, d_spring;
};

inline SingleGradient gradient(const CanonicalWeights& w, const Trajectory& x) {
    validate_trajectory(x);
    std::vector<double> p{w.mass, w.damping, w.spring};
    double g[3];
    detail::single_loss_grad(p, x, g);
    return SingleGradient{g[0], g[1], g[2]};
}

/// Order: [m1, m2, b1, b2, k1, k2].
inline std::array<double, 6> gradient(const CanonicalWeights& w1, const CanonicalWeights& w2,
                                      const Trajectory& x1, const Trajectory& x2) {
    std::vector<double> p{w1.mass, w2.mass, w1.damping, w2.damping, w1.spring, w2.spring};
    std::array<double, 6> g{};
    detail::coupled_loss_grad(p, x1, x2, g.data());
    return g;
}

/// Order: [a, b, c, d, e].
inline std::array<double, 5> gradient(const CombinedWeights& u, const Trajectory& x1,
                                      const Trajectory& x2) {
    std::vector<double> p{u.a, u.b, u.c, u.d, u.e};
    std::array<double, 5> g{};
    detail::combined_loss_grad(p, x1, x2, g.data());
    return g;
}

/// Fits a single oscillator's canonical weights to one observed trajectory.
inline FitReport fit(const CanonicalWeights& init, const Trajectory& observed,
                     const FitConfig& cfg, const CanonicalWeights* truth = nullptr) {
    validate(init);
    validate_trajectory(observed);
    auto report = detail::optimize(
        {init.mass, init.damping, init.spring},
        [&](const std::vector<double>& p, std::vector<double>& g) {
            return detail::single_loss_grad(p, observed, g.data());
        },
        cfg, std::vector<bool>(3, true));
    report.names = {"mass", "damping", "spring"};
    if (truth) detail::attach_truth(report, {truth->mass, truth->damping, truth->spring});
    return report;
}

/// Fits both oscillators' canonical weights to the two observed trajectories.
inline FitReport fit(const ChainSystem& init, const Trajectory& x1, const Trajectory& x2,
                     const FitConfig& cfg, const ChainSystem* truth = nullptr) {
    if (init.size() != 2) throw std::invalid_argument("fit: need a 2-oscillator chain");
    validate(init);
    validate_trajectory(x1);
    validate_trajectory(x2);
    if (x1.samples.size() != x2.samples.size() || x1.delta != x2.delta)
        throw std::invalid_argument("fit: misaligned channels");
    auto report = detail::optimize(
        {init[0].mass, init[1].mass, init[0].damping, init[1].damping, init[0].spring,
         init[1].spring},
        [&](const std::vector<double>& p, std::vector<double>& g) {
            return detail::coupled_loss_grad(p, x1, x2, g.data());
        },
        cfg, std::vector<bool>(6, true));
    report.names = {"m1", "m2", "b1", "b2", "k1", "k2"};
    if (truth) {
        if (truth->size() != 2) throw std::invalid_argument("fit: truth must have 2 oscillators");
        detail::attach_truth(report,
                             {(*truth)[0].mass, (*truth)[1].mass, (*truth)[0].damping,
                              (*truth)[1].damping, (*truth)[0].spring, (*truth)[1].spring});
    }
    return report;
}

/// Fits the combined parametrization to the two observed trajectories.
inline FitReport fit(const CombinedWeights& init, const Trajectory& x1, const Trajectory& x2,
                     const FitConfig& cfg, const CombinedWeights* truth = nullptr) {
    validate_trajectory(x1);
    validate_trajectory(x2);
    auto report = detail::optimize(
        {init.a, init.b, init.c, init.d, init.e},
        [&](const std::vector<double>& p, std::vector<double>& g) {
            return detail::combined_loss_grad(p, x1, x2, g.data());
        },
        cfg, std::vector<bool>(5, true));
    report.names = {"param_a", "param_b", "param_c", "param_d", "param_e"};
    if (truth) detail::attach_truth(report, {truth->a, truth->b, truth->c, truth->d, truth->e});
    return report;
}

/// Least-squares spring ratio k/m for the single-filter (conservative) step
/// x_{t+1} = 2 x_t - x_{t-1} - (k/m) delta^2 x_t fitted to the window.
inline double fit_conservative_spring(const Trajectory& x) {
    validate_trajectory(x);
    const double d2 = x.delta * x.delta;
    double num = 0.0, den = 0.0;
    for (std::size_t i = 1; i + 1 < x.samples.size(); ++i) {
        const double xc = x.samples[i];
        num += xc * (2.0 * xc - x.samples[i - 1] - x.samples[i + 1]);
        den += xc * xc;
    }
    if (den == 0.0) return 0.0;
    return num / (den * d2);
}

/// Least-squares gain for the first-order residual baseline x_{t+1} = x_t + d g x_t.
inline double fit_euler_resnet(const Trajectory& x, double layer_step) {
    validate_trajectory(x, 2);
    if (!(layer_step > 0.0)) throw std::invalid_argument("fit_euler_resnet: layer step must be > 0");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i + 1 < x.samples.size(); ++i) {
        num += x.samples[i] * (x.samples[i + 1] - x.samples[i]);
        den += x.samples[i] * x.samples[i];
    }
    if (den == 0.0) return 0.0;
    return num / (layer_step * den);
}

/// What to do between free-forecast points.
struct RetrainPolicy {
    enum class Kind { none, per_step };
    Kind kind = Kind::none;
    int iterations = 50;  ///< optimizer iterations on the ground-truth window per step
};

/// Free forecast of a single oscillator. With the per_step policy the weights
/// are re-fit on the original ground-truth window between forecast points;
/// fed-back predictions are only ever step inputs, never targets.
inline Trajectory free_forecast(CanonicalWeights w, const Trajectory& seed, long horizon,
                                const RetrainPolicy& policy = {},
                                const FitConfig& retrain_cfg = {}) {
    validate(w);
    validate_trajectory(seed, 2);
    if (horizon <= 0) return Trajectory{{}, seed.delta, seed.time_at(seed.size())};
    const double delta = seed.delta;

    if (policy.kind == RetrainPolicy::Kind::none) {
        auto out = free_forecast_steps(
            [&](const std::vector<double>& xp, const std::vector<double>& xc,
                std::vector<double>& xn) { xn[0] = step_single(w, xp[0], xc[0], delta); },
            {seed}, horizon);
        return out[0];
    }

    const double guard = 1000.0 * detail::max_abs({seed});
    Trajectory out{{}, delta, seed.time_at(seed.size())};
    double xp = seed.samples[seed.size() - 2];
    double xc = seed.samples[seed.size() - 1];
    FitConfig step_cfg = retrain_cfg;
    step_cfg.max_iterations = std::max(1, policy.iterations);
    step_cfg.tolerance = 0.0;
    for (long h = 0; h < horizon; ++h) {
        const double xn = step_single(w, xp, xc, delta);
        if (!std::isfinite(xn) || std::abs(xn) > guard)
            throw ForecastDivergedError(h, "forecast diverged at step " + std::to_string(h));
        out.samples.push_back(xn);
        xp = xc;
        xc = xn;
        const auto r = fit(w, seed, step_cfg);
        w = CanonicalWeights{r.learned[0], r.learned[1], r.learned[2]};
    }
    return out;
}

/// Free forecast of the coupled pair; same retraining contract as above.
inline std::pair<Trajectory, Trajectory> free_forecast(ChainSystem chain, const Trajectory& seed1,
                                                       const Trajectory& seed2, long horizon,
                                                       const RetrainPolicy& policy = {},
                                                       const FitConfig& retrain_cfg = {}) {
    if (chain.size() != 2) throw std::invalid_argument("free_forecast: need a 2-oscillator chain");
    validate(chain);
    validate_trajectory(seed1, 2);
    validate_trajectory(seed2, 2);
    const double delta = seed1.delta;
    if (horizon <= 0) {
        Trajectory e1{{}, delta, seed1.time_at(seed1.size())};
        Trajectory e2{{}, delta, seed2.time_at(seed2.size())};
        return {e1, e2};
    }

    if (policy.kind == RetrainPolicy::Kind::none) {
        auto out = free_forecast_steps(
            [&](const std::vector<double>& xp, const std::vector<double>& xc,
                std::vector<double>& xn) {
                const auto s = step_coupled(chain[0], chain[1], xp[0], xc[0], xp[1], xc[1], delta);
                xn[0] = s[0];
                xn[1] = s[1];
            },
            {seed1, seed2}, horizon);
        return {out[0], out[1]};
    }

    const double guard = 1000.0 * detail::max_abs({seed1, seed2});
    Trajectory o1{{}, delta, seed1.time_at(seed1.size())};
    Trajectory o2{{}, delta, seed2.time_at(seed2.size())};
    double x1p = seed1.samples[seed1.size() - 2], x1c = seed1.samples[seed1.size() - 1];
    double x2p = seed2.samples[seed2.size() - 2], x2c = seed2.samples[seed2.size() - 1];
    FitConfig step_cfg = retrain_cfg;
    step_cfg.max_iterations = std::max(1, policy.iterations);
    step_cfg.tolerance = 0.0;
    for (long h = 0; h < horizon; ++h) {
        const auto s = step_coupled(chain[0], chain[1], x1p, x1c, x2p, x2c, delta);
        for (double v : s)
            if (!std::isfinite(v) || std::abs(v) > guard)
                throw ForecastDivergedError(h, "forecast diverged at step " + std::to_string(h));
        o1.samples.push_back(s[0]);
        o2.samples.push_back(s[1]);
        x1p = x1c;
        x1c = s[0];
        x2p = x2c;
        x2c = s[1];
        const auto r = fit(chain, seed1, seed2, step_cfg);
        chain = ChainSystem{{r.learned[0], r.learned[2], r.learned[4]},
                            {r.learned[1], r.learned[3], r.learned[5]}};
    }
    return {o1, o2};
}

}  // namespace oscnet
