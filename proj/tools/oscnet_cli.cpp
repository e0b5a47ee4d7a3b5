// Command-line front end: dataset generation, training, forecasting, mapping
// studies, and one-command reproduction of the bundled reference experiments.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "oscnet/experiments.hpp"
#include "oscnet/io.hpp"
#include "oscnet/mapping.hpp"
#include "oscnet/partial.hpp"
#include "oscnet/simulate.hpp"
#include "oscnet/training.hpp"

namespace {

using namespace oscnet;

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitAcceptance = 2;

struct Overrides {
    std::string padding;
    int kernel = 0;
    int stencil_order = 0;
    long seed = -1;
    bool ifl = false;
    bool retrain_per_step = false;
};

void apply_overrides(ExperimentConfig& cfg, const Overrides& ov) {
    if (!ov.padding.empty()) cfg.padding = padding_from_string(ov.padding);
    if (ov.kernel > 0) cfg.kernel = ov.kernel;
    if (ov.stencil_order > 0) cfg.stencil_order = ov.stencil_order;
    if (ov.seed >= 0) cfg.fit.seed = static_cast<std::uint64_t>(ov.seed);
    if (ov.ifl) cfg.ifl = true;
}

int cmd_simulate(const std::string& config_path, const std::string& out_dir) {
    const auto cfg = load_experiment_config(config_path);
    std::filesystem::create_directories(out_dir);
    const long n = cfg.n_train + cfg.n_forecast;
    const auto trajs = simulate_chain(cfg.truth, cfg.state0, cfg.delta, n);
    write_trajectory_csv(out_dir + "/trajectory.csv", trajs);
    std::printf("wrote %s/trajectory.csv (%ld samples, %zu channel%s)\n", out_dir.c_str(), n,
                trajs.size(), trajs.size() == 1 ? "" : "s");
    return kExitOk;
}

int cmd_train(const ExperimentConfig& cfg, const std::string& out_dir) {
    const auto res = run_experiment(cfg, out_dir);
    std::printf("%s", render_fit_table(cfg.title, res.report).c_str());
    for (const auto& line : res.checks) std::printf("  %s\n", line.c_str());
    std::printf("final loss %.3e after %ld iterations (%.2f s)\n", res.report.final_loss,
                res.report.iterations, res.elapsed_seconds);
    return kExitOk;
}

int cmd_forecast(ExperimentConfig cfg, const std::string& out_dir, const Overrides& ov) {
    std::filesystem::create_directories(out_dir);
    const long n_total = cfg.n_train + cfg.n_forecast;
    const auto data = simulate_chain(cfg.truth, cfg.state0, cfg.delta, n_total);
    auto window = [&](const Trajectory& t, long from, long count) {
        Trajectory w{std::vector<double>(t.samples.begin() + from,
                                         t.samples.begin() + from + count),
                     t.delta, t.time_at(static_cast<std::size_t>(from))};
        return w;
    };

    if (cfg.partial) {
        auto res = run_experiment(cfg, out_dir);  // fit + mapping/forecast artifacts
        std::printf("%s", render_fit_table(cfg.title, res.report).c_str());
        std::printf("forecast CSVs written under %s (ifl and no-ifl variants)\n", out_dir.c_str());
        return kExitOk;
    }

    RetrainPolicy policy;
    if (ov.retrain_per_step) policy.kind = RetrainPolicy::Kind::per_step;

    if (cfg.system == "single") {
        const auto train = window(data[0], 0, cfg.n_train);
        const auto r = fit(cfg.init[0], train, cfg.fit, &cfg.truth[0]);
        const CanonicalWeights learned{r.learned[0], r.learned[1], r.learned[2]};
        const auto fc = free_forecast(learned, train, cfg.n_forecast, policy, cfg.fit);
        write_forecast_csv(out_dir + "/forecast.csv",
                           {window(data[0], cfg.n_train, cfg.n_forecast)}, {fc});
    } else {
        const auto t1 = window(data[0], 0, cfg.n_train);
        const auto t2 = window(data[1], 0, cfg.n_train);
        const auto r = fit(cfg.init, t1, t2, cfg.fit, &cfg.truth);
        const ChainSystem learned{{r.learned[0], r.learned[2], r.learned[4]},
                                  {r.learned[1], r.learned[3], r.learned[5]}};
        const auto fc = free_forecast(learned, t1, t2, cfg.n_forecast, policy, cfg.fit);
        write_forecast_csv(out_dir + "/forecast.csv",
                           {window(data[0], cfg.n_train, cfg.n_forecast),
                            window(data[1], cfg.n_train, cfg.n_forecast)},
                           {fc.first, fc.second});
    }
    std::printf("wrote %s/forecast.csv\n", out_dir.c_str());
    return kExitOk;
}

int cmd_map(ExperimentConfig cfg, const std::string& out_dir) {
    if (cfg.truth.size() != 2)
        throw std::runtime_error("map: config must describe the coupled system");
    std::filesystem::create_directories(out_dir);
    const auto data = simulate_chain(cfg.truth, cfg.state0, cfg.delta, cfg.n_train);

    const auto bank = StencilBank::make(cfg.stencil_order);
    MappingParams params;
    params.padding = cfg.padding;
    params.stencil_accuracy = cfg.stencil_order;
    const auto proj = projection_from_canonical(cfg.truth[0], cfg.truth[1].spring, cfg.delta);
    if (cfg.kernel <= 1)
        params.weights = proj;
    else
        params.weights =
            embed_projection_kernel(proj, bank, static_cast<std::size_t>(cfg.kernel));

    const auto mapped = map_to_hidden(data[0], params, bank);
    write_mapping_csv(out_dir + "/mapping.csv", data[0], data[1], mapped,
                      "kernel" + std::to_string(cfg.kernel <= 1 ? 1 : cfg.kernel), cfg.padding);

    const auto off = static_cast<std::size_t>((mapped.t0 - data[1].t0) / cfg.delta + 0.5);
    double worst = 0.0, amp = 0.0;
    for (double v : data[1].samples) amp = std::max(amp, std::abs(v));
    for (std::size_t i = 0; i < mapped.samples.size(); ++i)
        worst = std::max(worst, std::abs(mapped.samples[i] - data[1].samples[i + off]));
    std::printf("wrote %s/mapping.csv; max reconstruction error %.4f (%.2f%% of amplitude)\n",
                out_dir.c_str(), worst, 100.0 * worst / amp);
    return kExitOk;
}

int cmd_reproduce(const std::vector<std::string>& tables, const std::string& experiments_dir,
                  const std::string& out_dir, const Overrides& ov) {
    bool all_accepted = true;
    for (const auto& id : tables) {
        auto cfg = load_experiment_config(experiments_dir + "/table" + id + ".cfg");
        apply_overrides(cfg, ov);
        const auto res = run_experiment(cfg, out_dir + "/table" + id);
        std::printf("== table %s: %s ==\n", id.c_str(), cfg.title.c_str());
        if (!res.report.names.empty())
            std::printf("%s", render_fit_table(cfg.title, res.report).c_str());
        for (const auto& line : res.checks) std::printf("  %s\n", line.c_str());
        std::printf("  -> %s (%.2f s)\n", res.accepted ? "ACCEPTED" : "REJECTED",
                    res.elapsed_seconds);
        all_accepted = all_accepted && res.accepted;
    }
    return all_accepted ? kExitOk : kExitAcceptance;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"oscnet: learning dissipative second-order dynamics from trajectories"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out", experiments_dir = "experiments", table;
    bool run_all = false;
    Overrides ov;

    auto add_common = [&](CLI::App* cmd, bool needs_config) {
        if (needs_config)
            cmd->add_option("--config", config_path, "experiment config file")->required();
        cmd->add_option("--out", out_dir, "output directory");
        cmd->add_option("--seed", ov.seed, "override the config seed");
    };

    auto* sim = app.add_subcommand("simulate", "generate ground-truth trajectory CSVs");
    add_common(sim, true);

    auto* train = app.add_subcommand("train", "fit weights to simulated data per config");
    add_common(train, true);

    auto* fc = app.add_subcommand("forecast", "train, then free-forecast past the window");
    add_common(fc, true);
    fc->add_flag("--ifl", ov.ifl, "enable the inner feedback loop (partial models)");
    fc->add_flag("--retrain-per-step", ov.retrain_per_step,
                 "re-fit on the training window between forecast points");

    auto* mp = app.add_subcommand("map", "reconstruct the hidden channel with true weights");
    add_common(mp, true);
    mp->add_option("--padding", ov.padding, "causal|valid");
    mp->add_option("--kernel", ov.kernel, "mapping kernel size (1 or 25)");
    mp->add_option("--stencil-order", ov.stencil_order, "stencil accuracy order");

    auto* rep = app.add_subcommand("reproduce", "run bundled reference experiments");
    rep->add_option("--table", table, "table id (1..8)");
    rep->add_flag("--all", run_all, "run every bundled table");
    rep->add_option("--out", out_dir, "output directory");
    rep->add_option("--experiments-dir", experiments_dir, "directory with tableN.cfg files");
    rep->add_option("--seed", ov.seed, "override the config seed");
    rep->add_flag("--ifl", ov.ifl, "enable the inner feedback loop");
    rep->add_option("--padding", ov.padding, "override padding mode");
    rep->add_option("--kernel", ov.kernel, "override mapping kernel size");
    rep->add_option("--stencil-order", ov.stencil_order, "override stencil accuracy order");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) return cmd_simulate(config_path, out_dir);
        if (train->parsed()) {
            auto cfg = load_experiment_config(config_path);
            apply_overrides(cfg, ov);
            return cmd_train(cfg, out_dir);
        }
        if (fc->parsed()) {
            auto cfg = load_experiment_config(config_path);
            apply_overrides(cfg, ov);
            return cmd_forecast(cfg, out_dir, ov);
        }
        if (mp->parsed()) {
            auto cfg = load_experiment_config(config_path);
            apply_overrides(cfg, ov);
            return cmd_map(cfg, out_dir);
        }
        if (rep->parsed()) {
            std::vector<std::string> tables;
            if (run_all)
                for (int i = 1; i <= 8; ++i) tables.push_back(std::to_string(i));
            else if (!table.empty())
                tables.push_back(table);
            else
                throw std::runtime_error("reproduce: need --table N or --all");
            return cmd_reproduce(tables, experiments_dir, out_dir, ov);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitRuntime;
    }
    return kExitRuntime;
}
