#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "oscnet/mapping.hpp"
#include "oscnet/partial.hpp"
#include "oscnet/simulate.hpp"
#include "oscnet/training.hpp"

using namespace oscnet;

namespace {
constexpr double kDelta = 0.0667;
const CanonicalWeights kSingleTruth{2.0, 1.5, 40.0};
const ChainSystem kChainTruth{{1.5, 0.5, 14.0}, {0.9, 0.3, 35.0}};
const InitialState kChainInit{{1.0, 0.5}, {0.0, 0.0}};

Trajectory single_data(long n = 60) {
    return simulate_single(kSingleTruth, {{1.0}, {0.0}}, kDelta, n);
}

std::pair<Trajectory, Trajectory> coupled_data(long n = 60) {
    return simulate_coupled(kChainTruth, kChainInit, kDelta, n);
}
}  // namespace

TEST_CASE("loss at the true weights sits on the discretization floor") {
    // measured truncation floors at this delta: 1.3e-6 single, 5.9e-6 coupled
    CHECK(one_step_loss(kSingleTruth, single_data()) <= 1e-5);
    const auto [x1, x2] = coupled_data();
    CHECK(one_step_loss(kChainTruth[0], kChainTruth[1], x1, x2) <= 1e-5);

    // the fitted optimum absorbs the discretization bias and lands far lower
    FitConfig cfg;
    cfg.tolerance = 0.0;
    const auto r = fit(ChainSystem{{1.0, 1.0, 15.0}, {1.0, 1.0, 15.0}}, x1, x2, cfg);
    CHECK(r.final_loss <= 1e-6);
}

TEST_CASE("zero trajectory gives zero loss and zero gradient") {
    Trajectory z{std::vector<double>(20, 0.0), kDelta, 0.0};
    CHECK(one_step_loss(kSingleTruth, z) == 0.0);
    const auto g = gradient(kSingleTruth, z);
    CHECK((g.d_mass == 0.0 && g.d_damping == 0.0 && g.d_spring == 0.0));
}

TEST_CASE("loss is invariant under uniform canonical scaling") {
    const auto x = single_data();
    const double base = one_step_loss(kSingleTruth, x);
    for (double c : {0.5, 2.0, 7.3}) {
        const CanonicalWeights scaled{c * kSingleTruth.mass, c * kSingleTruth.damping,
                                      c * kSingleTruth.spring};
        CHECK_THAT(one_step_loss(scaled, x), Catch::Matchers::WithinRel(base, 1e-9));
    }
}

TEST_CASE("analytic gradients match central finite differences") {
    const auto x = single_data();
    const auto [x1, x2] = coupled_data();
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> mass(0.5, 3.0), damp(0.1, 2.0), spring(5.0, 50.0);

    auto check = [](double analytic, double fd) {
        if (std::abs(analytic) < 1e-12) {
            CHECK_THAT(fd, Catch::Matchers::WithinAbs(0.0, 1e-8));
        } else {
            CHECK_THAT(fd, Catch::Matchers::WithinRel(analytic, 1e-5));
        }
    };

    for (int trial = 0; trial < 100; ++trial) {
        const CanonicalWeights w{mass(rng), damp(rng), spring(rng)};
        const auto g = gradient(w, x);
        const double ga[3] = {g.d_mass, g.d_damping, g.d_spring};
        const double base[3] = {w.mass, w.damping, w.spring};
        for (int j = 0; j < 3; ++j) {
            const double h = 1e-6 * std::abs(base[j]);
            double lo[3] = {base[0], base[1], base[2]}, hi[3] = {base[0], base[1], base[2]};
            lo[j] -= h;
            hi[j] += h;
            const double fd = (one_step_loss({hi[0], hi[1], hi[2]}, x) -
                               one_step_loss({lo[0], lo[1], lo[2]}, x)) /
                              (2.0 * h);
            check(ga[j], fd);
        }
    }

    // coupled parametrization, a few samples of the 6-dim gradient
    for (int trial = 0; trial < 25; ++trial) {
        const CanonicalWeights w1{mass(rng), damp(rng), spring(rng)};
        const CanonicalWeights w2{mass(rng), damp(rng), spring(rng)};
        const auto g = gradient(w1, w2, x1, x2);
        double p[6] = {w1.mass, w2.mass, w1.damping, w2.damping, w1.spring, w2.spring};
        for (int j = 0; j < 6; ++j) {
            const double h = 1e-6 * std::abs(p[j]);
            double lo[6], hi[6];
            for (int q = 0; q < 6; ++q) lo[q] = hi[q] = p[q];
            lo[j] -= h;
            hi[j] += h;
            const double fd = (one_step_loss({hi[0], hi[2], hi[4]}, {hi[1], hi[3], hi[5]}, x1, x2) -
                               one_step_loss({lo[0], lo[2], lo[4]}, {lo[1], lo[3], lo[5]}, x1, x2)) /
                              (2.0 * h);
            check(g[j], fd);
        }
    }

    // combined parametrization
    std::uniform_real_distribution<double> small(0.01, 0.3), ee(1.1, 3.0);
    for (int trial = 0; trial < 25; ++trial) {
        const CombinedWeights u{small(rng), small(rng), small(rng), small(rng), ee(rng)};
        const auto g = gradient(u, x1, x2);
        double p[5] = {u.a, u.b, u.c, u.d, u.e};
        for (int j = 0; j < 5; ++j) {
            const double h = 1e-6 * std::abs(p[j]);
            double lo[5], hi[5];
            for (int q = 0; q < 5; ++q) lo[q] = hi[q] = p[q];
            lo[j] -= h;
            hi[j] += h;
            const double fd =
                (one_step_loss(CombinedWeights{hi[0], hi[1], hi[2], hi[3], hi[4]}, x1, x2) -
                 one_step_loss(CombinedWeights{lo[0], lo[1], lo[2], lo[3], lo[4]}, x1, x2)) /
                (2.0 * h);
            check(g[j], fd);
        }
    }
}

TEST_CASE("gradient is tiny at the true weights on noiseless data") {
    const auto g = gradient(kSingleTruth, single_data());
    CHECK(std::abs(g.d_mass) <= 1e-5);
    CHECK(std::abs(g.d_damping) <= 1e-5);
    CHECK(std::abs(g.d_spring) <= 1e-5);
}

TEST_CASE("fit converges to the loss floor and is deterministic") {
    const auto x = single_data();
    FitConfig cfg;
    cfg.tolerance = 0.0;
    const auto a = fit({1.0, 1.0, 15.0}, x, cfg, &kSingleTruth);
    const auto b = fit({1.0, 1.0, 15.0}, x, cfg, &kSingleTruth);
    CHECK(a.learned == b.learned);
    CHECK(a.loss_history == b.loss_history);
    CHECK(a.final_loss <= 1e-12);
    // identifiable ratios land on the exact sampled-recursion values
    CHECK_THAT(a.learned[1] / a.learned[0], Catch::Matchers::WithinAbs(0.7315, 5e-3));
    CHECK_THAT(a.learned[2] / a.learned[0], Catch::Matchers::WithinAbs(19.364, 5e-2));
    CHECK(a.names.size() == 3);
    CHECK(a.rel_error.size() == 3);
}

TEST_CASE("plain gradient descent decreases the loss monotonically") {
    const auto x = single_data();
    FitConfig cfg;
    cfg.optimizer = OptimizerKind::plain_gd;
    cfg.learning_rate = 30.0;  // gradients are delta^4-scaled, so this is conservative
    cfg.max_iterations = 2000;
    cfg.tolerance = 0.0;
    const auto r = fit({1.0, 1.0, 15.0}, x, cfg);
    REQUIRE(r.loss_history.size() > 100);
    const std::size_t warmup = r.loss_history.size() / 10;
    for (std::size_t i = warmup + 1; i < r.loss_history.size(); ++i)
        CHECK(r.loss_history[i] <= r.loss_history[i - 1] * (1.0 + 1e-12));
}

TEST_CASE("initialization scale only sets the gauge, not the ratios") {
    const auto x = single_data();
    FitConfig cfg;
    cfg.tolerance = 0.0;
    const auto a = fit({1.0, 1.0, 15.0}, x, cfg);
    const auto b = fit({3.0, 3.0, 45.0}, x, cfg);
    CHECK_THAT(b.learned[1] / b.learned[0],
               Catch::Matchers::WithinRel(a.learned[1] / a.learned[0], 1e-2));
    CHECK_THAT(b.learned[2] / b.learned[0],
               Catch::Matchers::WithinRel(a.learned[2] / a.learned[0], 1e-2));
}

TEST_CASE("coupled fit reaches the floor and recovers the ratios") {
    const auto [x1, x2] = coupled_data();
    FitConfig cfg;
    cfg.tolerance = 0.0;
    const auto r = fit(ChainSystem{{1.0, 1.0, 15.0}, {1.0, 1.0, 15.0}}, x1, x2, cfg, &kChainTruth);
    CHECK(r.final_loss <= 1e-6);
    // ratios of channel-2 parameters are identifiable: b2/m2, k2/m2
    CHECK_THAT(r.learned[3] / r.learned[1],
               Catch::Matchers::WithinRel(0.3 / 0.9, 0.05));
    CHECK_THAT(r.learned[5] / r.learned[1],
               Catch::Matchers::WithinRel(35.0 / 0.9, 0.05));
}

TEST_CASE("training diverges loudly on an absurd learning rate") {
    const auto x = single_data();
    FitConfig cfg;
    cfg.optimizer = OptimizerKind::plain_gd;
    cfg.learning_rate = 1e18;
    cfg.max_iterations = 1000;
    cfg.tolerance = 0.0;
    CHECK_THROWS_AS(fit({1.0, 1.0, 15.0}, x, cfg), TrainingDivergedError);
}

TEST_CASE("fit validates inputs") {
    const auto x = single_data();
    FitConfig bad;
    bad.learning_rate = 0.0;
    CHECK_THROWS_AS(fit({1.0, 1.0, 15.0}, x, bad), std::invalid_argument);

    Trajectory tiny{{1.0, 0.9}, kDelta, 0.0};
    CHECK_THROWS_AS(fit({1.0, 1.0, 15.0}, tiny, FitConfig{}), std::invalid_argument);

    const auto [x1, x2] = coupled_data();
    Trajectory short2{std::vector<double>(x2.samples.begin(), x2.samples.begin() + 30), kDelta,
                      0.0};
    CHECK_THROWS_AS(fit(ChainSystem{{1, 1, 15}, {1, 1, 15}}, x1, short2, FitConfig{}),
                    std::invalid_argument);
}

TEST_CASE("combined fit tracks the canonical one through the conversion") {
    const auto [x1, x2] = coupled_data();
    FitConfig cfg;
    cfg.tolerance = 0.0;
    const auto ut = canonical_to_combined(kChainTruth[0], kChainTruth[1], kDelta);
    const auto u0 = canonical_to_combined({1, 1, 15}, {1, 1, 15}, kDelta);
    const auto r = fit(u0, x1, x2, cfg, &ut);
    CHECK(r.final_loss <= 1e-6);
    CHECK(r.names[4] == "param_e");
    // e is scale-free and identifiable, so it must approach the truth
    CHECK_THAT(r.learned[4], Catch::Matchers::WithinRel(ut.e, 0.05));
}

// ---- partial observation ----

TEST_CASE("shared kernel-1 training freezes everything but m1 and b1") {
    const auto [x1, x2] = coupled_data();
    auto model = make_shared_partial_model(Parametrization::canonical,
                                           {1.0, 1.0, 1.0, 1.0, 15.0, 15.0}, Padding::valid, 5);
    FitConfig cfg;
    cfg.tolerance = 0.0;
    const auto r = fit_partial(model, x1, cfg);
    // bit-exact freezes: the spring gradients cancel identically, m2/b2 never
    // enter the prediction
    CHECK(r.learned[1] == 1.0);
    CHECK(r.learned[3] == 1.0);
    CHECK(r.learned[4] == 15.0);
    CHECK(r.learned[5] == 15.0);
    CHECK(r.learned[0] != 1.0);
    CHECK(r.learned[2] != 1.0);

    // the learned damping ratio must agree with the closed-form least squares
    // optimum of the collapsed model
    const auto bank = StencilBank::make(5);
    const auto d1 = apply_stencil(x1, bank.d1, Padding::valid);
    const auto d2 = apply_stencil(x1, bank.d2, Padding::valid);
    const std::size_t off = bank.d2.length() - 1;
    double num = 0.0, den = 0.0;
    for (std::size_t t = off; t + 1 < x1.samples.size(); ++t) {
        const double feat = d1.samples[t - (bank.d1.length() - 1)] -
                            (x1.samples[t] - x1.samples[t - 1]);
        const double base = d2.samples[t - off] + 2.0 * x1.samples[t] - x1.samples[t - 1];
        num += feat * (x1.samples[t + 1] - base);
        den += feat * feat;
    }
    const double c_star = num / den;
    const double c_learned = r.learned[2] * kDelta / r.learned[0];
    CHECK_THAT(c_learned, Catch::Matchers::WithinRel(c_star, 1e-3));
}

TEST_CASE("collapsed prediction equals the composed mapping plus solver route") {
    const auto [x1, x2] = coupled_data();
    auto model = make_shared_partial_model(Parametrization::canonical,
                                           {1.3, 1.0, 0.6, 1.0, 12.0, 18.0}, Padding::valid, 5);
    // composed route: build the mapped hidden series, then run the coupled
    // x1-row against the observed history
    const auto mapped = map_hidden(model, x1);
    const auto bank = StencilBank::make(5);
    const std::size_t off = bank.d2.length() - 1;
    const double m1 = model.params[0], b1 = model.params[2], k1 = model.params[4],
                 k2 = model.params[5];
    double composed_loss = 0.0;
    std::size_t count = 0;
    for (std::size_t t = off; t + 1 < x1.samples.size(); ++t) {
        const double d2c = kDelta * kDelta;
        const double pred = (-b1 * kDelta / m1) * (x1.samples[t] - x1.samples[t - 1]) -
                            (d2c / m1) * (k1 + k2) * x1.samples[t] +
                            (k2 * d2c / m1) * mapped.samples[t - off] + 2.0 * x1.samples[t] -
                            x1.samples[t - 1];
        const double err = pred - x1.samples[t + 1];
        composed_loss += err * err;
        ++count;
    }
    composed_loss /= static_cast<double>(count);
    CHECK_THAT(partial_one_step_loss(model, x1),
               Catch::Matchers::WithinRel(composed_loss, 1e-9));

    // spring gradients vanish identically in the collapsed form, and a finite
    // difference across the composed route confirms the cancellation
    const auto g = partial_gradient(model, x1);
    CHECK(g[4] == 0.0);
    CHECK(g[5] == 0.0);
    const double h = 1e-5;
    auto pert = model;
    pert.params[4] += h;
    const double up = partial_one_step_loss(pert, x1);
    pert.params[4] -= 2.0 * h;
    const double dn = partial_one_step_loss(pert, x1);
    CHECK_THAT((up - dn) / (2.0 * h), Catch::Matchers::WithinAbs(0.0, 1e-6));
}

TEST_CASE("combined shared mode trains only c") {
    const auto [x1, x2] = coupled_data();
    const CombinedWeights u0{0.0667, 0.074, 0.0667, 0.0222, 2.0};
    auto model = make_shared_partial_model(Parametrization::combined,
                                           {u0.a, u0.b, u0.c, u0.d, u0.e}, Padding::valid, 5);
    FitConfig cfg;
    cfg.tolerance = 0.0;
    const auto r = fit_partial(model, x1, cfg);
    CHECK(r.learned[0] == u0.a);  // zero gradient by cancellation
    CHECK(r.learned[1] == u0.b);  // masked
    CHECK(r.learned[3] == u0.d);  // masked
    CHECK(r.learned[4] == u0.e);  // zero gradient by cancellation
    CHECK(r.learned[2] != u0.c);
    CHECK(r.learned[2] < 0.03);   // moved from 0.0667 toward the collapsed optimum
}

TEST_CASE("wide kernel reproduces the shared mapping at initialization") {
    const auto [x1, x2] = coupled_data();
    const std::vector<double> p0{1.0, 1.0, 1.0, 1.0, 15.0, 15.0};
    const auto shared = make_shared_partial_model(Parametrization::canonical, p0, Padding::valid, 5);
    const auto wide =
        make_wide_partial_model(Parametrization::canonical, p0, Padding::valid, 5, kDelta);
    const auto a = map_hidden(shared, x1);
    const auto b = map_hidden(wide, x1);
    const std::size_t shift = a.samples.size() - b.samples.size();
    for (std::size_t i = 0; i < b.samples.size(); ++i)
        CHECK_THAT(b.samples[i], Catch::Matchers::WithinRel(a.samples[i + shift], 1e-9));
}

TEST_CASE("wide-kernel training keeps the hidden-side weights frozen") {
    const auto [x1, x2] = coupled_data();
    auto model = make_wide_partial_model(Parametrization::canonical,
                                         {1.0, 1.0, 1.0, 1.0, 15.0, 15.0}, Padding::valid, 5,
                                         kDelta);
    FitConfig cfg;
    cfg.tolerance = 0.0;
    const auto loss0 = partial_one_step_loss(model, x1);
    const auto r = fit_partial(model, x1, cfg);
    CHECK(r.learned[1] == 1.0);
    CHECK(r.learned[3] == 1.0);
    CHECK(r.learned[4] != 15.0);  // springs do train in the unshared mode
    CHECK(r.final_loss < loss0);

    // gradient check on the packed vector, against finite differences
    auto fresh = make_wide_partial_model(Parametrization::canonical,
                                         {1.1, 1.0, 0.8, 1.0, 14.0, 16.0}, Padding::valid, 5,
                                         kDelta);
    const auto g = partial_gradient(fresh, x1);
    for (std::size_t j : {std::size_t{0}, std::size_t{2}, std::size_t{5}, std::size_t{8},
                          std::size_t{30}}) {
        const bool is_kernel = j >= 6;
        auto pert = fresh;
        double& slot = is_kernel ? pert.kernel[j - 6] : pert.params[j];
        const double h = std::abs(slot) > 1e-3 ? 1e-6 * std::abs(slot) : 1e-8;
        slot += h;
        const double up = partial_one_step_loss(pert, x1);
        slot -= 2.0 * h;
        const double dn = partial_one_step_loss(pert, x1);
        const double fd = (up - dn) / (2.0 * h);
        if (std::abs(g[j]) < 1e-10) {
            CHECK_THAT(fd, Catch::Matchers::WithinAbs(0.0, 1e-6));
        } else {
            CHECK_THAT(fd, Catch::Matchers::WithinRel(g[j], 1e-4));
        }
    }
}

TEST_CASE("partial forecast edges") {
    const auto [x1, x2] = coupled_data();
    auto model = make_shared_partial_model(Parametrization::canonical,
                                           {1.0, 1.0, 1.0, 1.0, 15.0, 15.0}, Padding::valid, 5);
    FitConfig cfg;
    cfg.tolerance = 0.0;
    fit_partial(model, x1, cfg);
    const auto empty = forecast_partial(model, x1, 0, true);
    CHECK(empty.samples.empty());
    const auto fc = forecast_partial(model, x1, 10, true);
    CHECK(fc.samples.size() == 10);
    CHECK_THAT(fc.t0, Catch::Matchers::WithinAbs(x1.time_at(x1.size()), 1e-12));
}

TEST_CASE("euler resnet baseline cannot follow the oscillation") {
    const auto full = single_data(120);
    Trajectory train{std::vector<double>(full.samples.begin(), full.samples.begin() + 60), kDelta,
                     0.0};
    const double gain = fit_euler_resnet(train, kDelta);
    double x = train.samples.back(), se = 0.0, peak = 0.0;
    for (double v : train.samples) peak = std::max(peak, std::abs(v));
    for (int i = 0; i < 60; ++i) {
        x = step_euler_resnet(gain, x, kDelta);
        const double err = x - full.samples[60 + i];
        se += err * err;
    }
    const double rmse = std::sqrt(se / 60.0);
    INFO("first-order baseline rmse " << rmse);
    CHECK(rmse > 0.2 * peak);  // drifts visibly, unlike the second-order solver
}

TEST_CASE("free forecast with per-step retraining stays close to the truth") {
    const auto full = single_data(120);
    Trajectory train{std::vector<double>(full.samples.begin(), full.samples.begin() + 60), kDelta,
                     0.0};
    FitConfig cfg;
    cfg.tolerance = 0.0;
    const auto r = fit({1.0, 1.0, 15.0}, train, cfg);
    const CanonicalWeights learned{r.learned[0], r.learned[1], r.learned[2]};
    RetrainPolicy policy;
    policy.kind = RetrainPolicy::Kind::per_step;
    policy.iterations = 50;
    const auto fc = free_forecast(learned, train, 20, policy, cfg);
    REQUIRE(fc.samples.size() == 20);
    for (std::size_t i = 0; i < fc.samples.size(); ++i)
        CHECK_THAT(fc.samples[i], Catch::Matchers::WithinAbs(full.samples[60 + i], 0.05));
}
