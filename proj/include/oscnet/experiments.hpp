#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "oscnet/core.hpp"
#include "oscnet/io.hpp"
#include "oscnet/mapping.hpp"
#include "oscnet/partial.hpp"
#include "oscnet/simulate.hpp"
#include "oscnet/solver.hpp"
#include "oscnet/stencil.hpp"
#include "oscnet/training.hpp"

namespace oscnet {

/// How the frozen hidden-side combined parameters are initialized. The bundled
/// reference runs key b and d to the true m2, b2 (they are unreachable by
/// gradients anyway); init_only derives everything from the init chain.
enum class CombinedInitConvention { table_consistent, init_only };

inline CombinedWeights combined_init(const ChainSystem& init, const ChainSystem& truth,
                                     double delta, CombinedInitConvention conv) {
    if (init.size() != 2 || truth.size() != 2)
        throw std::invalid_argument("combined_init: need 2-oscillator chains");
    if (conv == CombinedInitConvention::init_only)
        return canonical_to_combined(init[0], init[1], delta);
    CombinedWeights u = canonical_to_combined(init[0], init[1], delta);
    u.b = delta * delta * init[1].spring / truth[1].mass;
    u.d = delta * truth[1].damping / truth[1].mass;
    return u;
}

/// One bundled experiment: dataset, initialization, optimizer settings and the
/// acceptance checks applied to the run.
struct ExperimentConfig {
    std::string table_id;
    std::string title;
    std::string system;  // "single" | "coupled" | "stencil"
    bool partial = false;
    Parametrization parametrization = Parametrization::canonical;
    double delta = 0.0667;
    long n_train = 60;
    long n_forecast = 60;
    ChainSystem truth;
    ChainSystem init;
    InitialState state0;
    FitConfig fit;
    int kernel = 1;
    Padding padding = Padding::valid;
    int stencil_order = 5;
    bool ifl = false;
    CombinedInitConvention combined_init_convention = CombinedInitConvention::table_consistent;
    double accept_rel_error = 0.0;             // 0 disables the per-parameter check
    std::vector<std::string> accept_frozen;    // names that must stay bit-equal to init
    std::vector<std::string> accept_within;    // "name:target:tol" triplets
    std::vector<double> paper_learned;         // reference values for the report only
};

inline ExperimentConfig load_experiment_config(const std::string& path) {
    const auto kv = KeyValueConfig::load(path);
    ExperimentConfig c;
    c.table_id = kv.get("table");
    c.title = kv.get_or("title", "experiment " + c.table_id);
    c.system = kv.get("system");
    if (c.system == "stencil") return c;

    c.partial = kv.get_bool_or("partial", false);
    c.parametrization = parametrization_from_string(kv.get_or("parametrization", "canonical"));
    c.delta = kv.get_double("delta");
    c.n_train = kv.get_long("n_train");
    c.n_forecast = kv.get_long_or("n_forecast", 60);

    auto chain_from = [&](const std::string& prefix) {
        const auto ms = kv.get_doubles(prefix + "_m");
        const auto bs = kv.get_doubles(prefix + "_b");
        const auto ks = kv.get_doubles(prefix + "_k");
        if (ms.size() != bs.size() || ms.size() != ks.size())
            throw std::runtime_error(path + ": " + prefix + " m/b/k length mismatch");
        ChainSystem chain;
        for (std::size_t i = 0; i < ms.size(); ++i)
            chain.push_back(CanonicalWeights{ms[i], bs[i], ks[i]});
        return chain;
    };
    c.truth = chain_from("truth");
    c.init = chain_from("init");
    c.state0 = InitialState{kv.get_doubles("x0"), kv.get_doubles("v0")};

    const auto opt = kv.get_or("optimizer", "adaptive_moments");
    c.fit.optimizer =
        opt == "plain_gd" ? OptimizerKind::plain_gd : OptimizerKind::adaptive_moments;
    c.fit.learning_rate = kv.get_double_or("learning_rate", 1e-2);
    c.fit.max_iterations = kv.get_long_or("max_iterations", 5000);
    c.fit.tolerance = kv.get_double_or("tolerance", 1e-12);
    c.fit.seed = static_cast<std::uint64_t>(kv.get_long_or("seed", 0));
    c.fit.parametrization = c.parametrization;

    c.kernel = static_cast<int>(kv.get_long_or("kernel", 1));
    c.padding = padding_from_string(kv.get_or("padding", "valid"));
    c.stencil_order = static_cast<int>(kv.get_long_or("stencil_order", 5));
    c.ifl = kv.get_bool_or("ifl", false);
    if (kv.get_or("combined_init", "table_consistent") == "init_only")
        c.combined_init_convention = CombinedInitConvention::init_only;

    c.accept_rel_error = kv.get_double_or("accept_rel_error", 0.0);
    if (kv.has("accept_frozen")) {
        std::stringstream ss(kv.get("accept_frozen"));
        std::string tok;
        while (std::getline(ss, tok, ',')) c.accept_frozen.push_back(tok);
    }
    if (kv.has("accept_within")) {
        std::stringstream ss(kv.get("accept_within"));
        std::string tok;
        while (std::getline(ss, tok, ';')) c.accept_within.push_back(tok);
    }
    if (kv.has("paper_learned")) c.paper_learned = kv.get_doubles("paper_learned");
    return c;
}

struct ExperimentResult {
    FitReport report;
    bool accepted = true;
    std::vector<std::string> checks;
    double elapsed_seconds = 0.0;
};

namespace detail {

inline std::size_t name_index(const FitReport& r, const std::string& name) {
    for (std::size_t i = 0; i < r.names.size(); ++i)
        if (r.names[i] == name) return i;
    throw std::runtime_error("no such parameter in report: " + name);
}

inline void check_rel_errors(const ExperimentConfig& cfg, ExperimentResult& res) {
    if (cfg.accept_rel_error <= 0.0) return;
    for (std::size_t i = 0; i < res.report.rel_error.size(); ++i) {
        const bool ok = res.report.rel_error[i] <= cfg.accept_rel_error;
        char line[160];
        std::snprintf(line, sizeof(line), "%s %s: rel error %.3f%% (tol %.1f%%)",
                      ok ? "PASS" : "FAIL", res.report.names[i].c_str(),
                      res.report.rel_error[i] * 100.0, cfg.accept_rel_error * 100.0);
        res.checks.push_back(line);
        res.accepted = res.accepted && ok;
    }
}

inline void check_frozen(const ExperimentConfig& cfg, ExperimentResult& res) {
    for (const auto& name : cfg.accept_frozen) {
        const auto i = name_index(res.report, name);
        const bool ok = res.report.learned[i] == res.report.init[i];
        res.checks.push_back(std::string(ok ? "PASS " : "FAIL ") + name +
                             " frozen at init (bit-exact)");
        res.accepted = res.accepted && ok;
    }
}

inline void check_within(const ExperimentConfig& cfg, ExperimentResult& res) {
    for (const auto& spec : cfg.accept_within) {
        std::stringstream ss(spec);
        std::string name, target_s, tol_s;
        std::getline(ss, name, ':');
        std::getline(ss, target_s, ':');
        std::getline(ss, tol_s, ':');
        const double target = std::stod(target_s), tol = std::stod(tol_s);
        const auto i = name_index(res.report, name);
        const double rel = std::abs(res.report.learned[i] - target) / std::abs(target);
        const bool ok = rel <= tol;
        char line[160];
        std::snprintf(line, sizeof(line), "%s %s: %.4f within %.1f%% of %.4f", ok ? "PASS" : "FAIL",
                      name.c_str(), res.report.learned[i], tol * 100.0, target);
        res.checks.push_back(line);
        res.accepted = res.accepted && ok;
    }
}

inline std::vector<double> chain_param_vector(const ChainSystem& c) {
    if (c.size() == 1) return {c[0].mass, c[0].damping, c[0].spring};
    return {c[0].mass, c[1].mass, c[0].damping, c[1].damping, c[0].spring, c[1].spring};
}

}  // namespace detail

/// Stencil reproduction: the order-2 backward coefficients must match the
/// reference table bit-exactly and every generated stencil must differentiate
/// monomials exactly.
inline ExperimentResult run_stencil_experiment(const ExperimentConfig& cfg,
                                               const std::string& out_dir) {
    ExperimentResult res;
    const auto d1 = make_backward_stencil(1, 2);
    const auto d2 = make_backward_stencil(2, 2);
    const std::vector<double> want_d1{0.5, -2.0, 1.5};
    const std::vector<double> want_d2{-1.0, 4.0, -5.0, 2.0};
    const bool ok1 = d1.coefficients == want_d1;
    const bool ok2 = d2.coefficients == want_d2;
    res.checks.push_back(std::string(ok1 ? "PASS" : "FAIL") +
                         " order-2 first-derivative stencil equals [1/2, -2, 3/2]");
    res.checks.push_back(std::string(ok2 ? "PASS" : "FAIL") +
                         " order-2 second-derivative stencil equals [-1, 4, -5, 2]");
    res.accepted = ok1 && ok2;

    double worst = 0.0;
    for (int acc = 1; acc <= 5; ++acc) {
        for (int d = 1; d <= 2; ++d) {
            const auto s = make_backward_stencil(d, acc);
            const int n = static_cast<int>(s.length());
            for (int p = 0; p <= acc + d - 1; ++p) {
                double val = 0.0;
                for (int j = 0; j < n; ++j) {
                    const double node = static_cast<double>(-(n - 1) + j);
                    val += s.coefficients[static_cast<std::size_t>(j)] * std::pow(node, p);
                }
                double exact = 0.0;
                if (p == d) exact = d == 1 ? 1.0 : 2.0;  // d-th derivative of t^d at 0 is d!
                worst = std::max(worst, std::abs(val - exact));
            }
        }
    }
    const bool ok3 = worst <= 1e-10;
    char line[128];
    std::snprintf(line, sizeof(line),
                  "%s monomial exactness for orders 1-5: worst residual %.2e (tol 1e-10)",
                  ok3 ? "PASS" : "FAIL", worst);
    res.checks.push_back(line);
    res.accepted = res.accepted && ok3;

    if (!out_dir.empty()) {
        auto f = detail::open_out(out_dir + "/stencils.csv");
        f << "derivative_order,accuracy_order,coefficients\n";
        for (int acc = 1; acc <= 8; ++acc)
            for (int d = 1; d <= 2; ++d) {
                const auto s = make_backward_stencil(d, acc);
                f << d << "," << acc << ",";
                for (std::size_t j = 0; j < s.length(); ++j)
                    f << (j ? " " : "") << detail::fmt_full(s.coefficients[j]);
                f << "\n";
            }
    }
    return res;
}

/// Runs one bundled experiment end to end and applies its acceptance checks.
/// Artifacts (report JSON, tables, CSVs) land in out_dir when non-empty.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::string& out_dir) {
    if (!out_dir.empty()) std::filesystem::create_directories(out_dir);
    if (cfg.system == "stencil") return run_stencil_experiment(cfg, out_dir);

    ExperimentResult res;
    const long n_total = cfg.n_train + cfg.n_forecast;
    const auto data = simulate_chain(cfg.truth, cfg.state0, cfg.delta, n_total);

    auto window = [&](const Trajectory& t, long from, long count) {
        Trajectory w;
        w.delta = t.delta;
        w.t0 = t.time_at(static_cast<std::size_t>(from));
        w.samples.assign(t.samples.begin() + from, t.samples.begin() + from + count);
        return w;
    };

    const auto start = std::chrono::steady_clock::now();

    if (!cfg.partial) {
        if (cfg.system == "single") {
            const auto train = window(data[0], 0, cfg.n_train);
            res.report = fit(cfg.init[0], train, cfg.fit, &cfg.truth[0]);
            detail::check_rel_errors(cfg, res);
            if (!out_dir.empty() && cfg.n_forecast > 0) {
                const CanonicalWeights learned{res.report.learned[0], res.report.learned[1],
                                               res.report.learned[2]};
                const auto fc = free_forecast(learned, train, cfg.n_forecast);
                write_forecast_csv(out_dir + "/forecast.csv",
                                   {window(data[0], cfg.n_train, cfg.n_forecast)}, {fc});
            }
        } else {
            const auto t1 = window(data[0], 0, cfg.n_train);
            const auto t2 = window(data[1], 0, cfg.n_train);
            if (cfg.parametrization == Parametrization::canonical) {
                res.report = fit(cfg.init, t1, t2, cfg.fit, &cfg.truth);
                detail::check_rel_errors(cfg, res);
                if (!out_dir.empty() && cfg.n_forecast > 0) {
                    const ChainSystem learned{
                        {res.report.learned[0], res.report.learned[2], res.report.learned[4]},
                        {res.report.learned[1], res.report.learned[3], res.report.learned[5]}};
                    const auto fc = free_forecast(learned, t1, t2, cfg.n_forecast);
                    write_forecast_csv(out_dir + "/forecast.csv",
                                       {window(data[0], cfg.n_train, cfg.n_forecast),
                                        window(data[1], cfg.n_train, cfg.n_forecast)},
                                       {fc.first, fc.second});
                }
            } else {
                const auto u0 = combined_init(cfg.init, cfg.truth, cfg.delta,
                                              cfg.combined_init_convention);
                const auto ut = canonical_to_combined(cfg.truth[0], cfg.truth[1], cfg.delta);
                res.report = fit(u0, t1, t2, cfg.fit, &ut);
                detail::check_rel_errors(cfg, res);
            }
        }
    } else {
        // partial observation: only x1 enters training
        const auto t1 = window(data[0], 0, cfg.n_train);
        PartialModel model;
        std::vector<double> truth_vec;
        if (cfg.parametrization == Parametrization::canonical) {
            truth_vec = detail::chain_param_vector(cfg.truth);
            const auto p0 = detail::chain_param_vector(cfg.init);
            model = cfg.kernel == 1
                        ? make_shared_partial_model(Parametrization::canonical, p0, cfg.padding,
                                                    cfg.stencil_order)
                        : make_wide_partial_model(Parametrization::canonical, p0, cfg.padding,
                                                  cfg.stencil_order, cfg.delta,
                                                  static_cast<std::size_t>(cfg.kernel));
        } else {
            const auto ut = canonical_to_combined(cfg.truth[0], cfg.truth[1], cfg.delta);
            truth_vec = {ut.a, ut.b, ut.c, ut.d, ut.e};
            const auto u0 =
                combined_init(cfg.init, cfg.truth, cfg.delta, cfg.combined_init_convention);
            const std::vector<double> p0{u0.a, u0.b, u0.c, u0.d, u0.e};
            model = cfg.kernel == 1
                        ? make_shared_partial_model(Parametrization::combined, p0, cfg.padding,
                                                    cfg.stencil_order)
                        : make_wide_partial_model(Parametrization::combined, p0, cfg.padding,
                                                  cfg.stencil_order, cfg.delta,
                                                  static_cast<std::size_t>(cfg.kernel));
        }
        res.report = fit_partial(model, t1, cfg.fit, &truth_vec);
        detail::check_rel_errors(cfg, res);

        if (!out_dir.empty()) {
            const auto mapped = map_hidden(model, t1);
            write_mapping_csv(out_dir + "/mapping.csv", data[0], data[1], mapped,
                              "kernel" + std::to_string(cfg.kernel), cfg.padding);
            for (const bool use_ifl : {false, true}) {
                try {
                    const auto fc = forecast_partial(model, t1, cfg.n_forecast, use_ifl);
                    write_forecast_csv(out_dir + std::string("/forecast_") +
                                           (use_ifl ? "ifl" : "noifl") + ".csv",
                                       {window(data[0], cfg.n_train,
                                               static_cast<long>(fc.samples.size()))},
                                       {fc});
                } catch (const ForecastDivergedError&) {
                    // expected for some configurations; recorded, not fatal
                    res.checks.push_back(std::string("NOTE forecast (") +
                                         (use_ifl ? "ifl" : "no ifl") +
                                         ") hit the divergence guard");
                }
            }
        }
    }

    detail::check_frozen(cfg, res);
    detail::check_within(cfg, res);
    res.elapsed_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    if (!out_dir.empty()) {
        nlohmann::json extra;
        extra["table"] = cfg.table_id;
        extra["title"] = cfg.title;
        extra["accepted"] = res.accepted;
        extra["checks"] = res.checks;
        extra["elapsed_seconds"] = res.elapsed_seconds;
        if (!cfg.paper_learned.empty()) {
            extra["reference_learned"] = cfg.paper_learned;
            std::vector<double> rel;
            for (std::size_t i = 0;
                 i < cfg.paper_learned.size() && i < res.report.learned.size(); ++i)
                rel.push_back(std::abs(res.report.learned[i] - cfg.paper_learned[i]) /
                              std::abs(cfg.paper_learned[i]));
            extra["rel_error_vs_reference"] = rel;
        }
        write_fit_report_json(out_dir + "/report.json", res.report, extra);
        auto f = detail::open_out(out_dir + "/report.txt");
        f << render_fit_table(cfg.title, res.report);
        for (const auto& line : res.checks) f << "  " << line << "\n";
    }
    return res;
}

}  // namespace oscnet
