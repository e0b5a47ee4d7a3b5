#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "oscnet/core.hpp"
#include "oscnet/training.hpp"

namespace oscnet {

namespace detail {

/// Shortest decimal that round-trips a double.
inline std::string fmt_full(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    return f;
}

}  // namespace detail

/// `t,x1[,x2,...]` rows at full double precision. All trajectories must share
/// delta and t0.
inline void write_trajectory_csv(const std::string& path,
                                 const std::vector<Trajectory>& channels) {
    if (channels.empty()) throw std::invalid_argument("write_trajectory_csv: no channels");
    auto f = detail::open_out(path);
    f << "t";
    for (std::size_t c = 0; c < channels.size(); ++c) f << ",x" << c + 1;
    f << "\n";
    for (std::size_t i = 0; i < channels[0].samples.size(); ++i) {
        f << detail::fmt_full(channels[0].time_at(i));
        for (const auto& ch : channels) f << "," << detail::fmt_full(ch.samples.at(i));
        f << "\n";
    }
}

/// Same schema plus a trailing `source` column; truth rows precede forecast rows.
inline void write_forecast_csv(const std::string& path, const std::vector<Trajectory>& truth,
                               const std::vector<Trajectory>& forecast) {
    if (truth.empty() || truth.size() != forecast.size())
        throw std::invalid_argument("write_forecast_csv: channel mismatch");
    auto f = detail::open_out(path);
    f << "t";
    for (std::size_t c = 0; c < truth.size(); ++c) f << ",x" << c + 1;
    f << ",source\n";
    auto rows = [&](const std::vector<Trajectory>& chans, const char* tag) {
        for (std::size_t i = 0; i < chans[0].samples.size(); ++i) {
            f << detail::fmt_full(chans[0].time_at(i));
            for (const auto& ch : chans) f << "," << detail::fmt_full(ch.samples.at(i));
            f << "," << tag << "\n";
        }
    };
    rows(truth, "truth");
    rows(forecast, "forecast");
}

/// `t,x1,x2_true,x2_mapped,mode,padding`, restricted to the mapped support.
inline void write_mapping_csv(const std::string& path, const Trajectory& x1,
                              const Trajectory& x2_true, const Trajectory& x2_mapped,
                              const std::string& mode, Padding padding) {
    auto f = detail::open_out(path);
    f << "t,x1,x2_true,x2_mapped,mode,padding\n";
    // the mapped series may start later than x1 (valid padding)
    const double off_f = (x2_mapped.t0 - x1.t0) / x1.delta;
    const auto off = static_cast<std::size_t>(off_f + 0.5);
    for (std::size_t i = 0; i < x2_mapped.samples.size(); ++i) {
        f << detail::fmt_full(x2_mapped.time_at(i)) << ","
          << detail::fmt_full(x1.samples.at(i + off)) << ","
          << detail::fmt_full(x2_true.samples.at(i + off)) << ","
          << detail::fmt_full(x2_mapped.samples[i]) << "," << mode << "," << to_string(padding)
          << "\n";
    }
}

inline nlohmann::json fit_report_to_json(const FitReport& r) {
    nlohmann::json j;
    j["names"] = r.names;
    j["init"] = r.init;
    j["learned"] = r.learned;
    if (!r.truth.empty()) {
        j["truth"] = r.truth;
        j["rel_error"] = r.rel_error;
    }
    j["iterations"] = r.iterations;
    j["final_loss"] = r.final_loss;
    j["loss_stride"] = r.loss_stride;
    j["loss_history"] = r.loss_history;
    return j;
}

inline void write_fit_report_json(const std::string& path, const FitReport& r,
                                  const nlohmann::json& extra = {}) {
    auto j = fit_report_to_json(r);
    for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
    auto f = detail::open_out(path);
    f << j.dump(2) << "\n";
}

/// Plain-text table in the "True value | Learned | Init" layout.
inline std::string render_fit_table(const std::string& title, const FitReport& r,
                                    std::size_t max_rows = 12) {
    std::ostringstream os;
    os << title << "\n";
    os << "  parameter        true        learned     init        rel_err\n";
    const std::size_t rows = std::min(max_rows, r.learned.size());
    for (std::size_t i = 0; i < rows; ++i) {
        char line[160];
        const double tv = i < r.truth.size() ? r.truth[i] : std::nan("");
        const double re = i < r.rel_error.size() ? r.rel_error[i] : std::nan("");
        std::snprintf(line, sizeof(line), "  %-14s %11.4f %11.4f %11.4f %10.2f%%\n",
                      r.names[i].c_str(), tv, r.learned[i], r.init[i], re * 100.0);
        os << line;
    }
    if (rows < r.learned.size())
        os << "  ... (" << r.learned.size() - rows << " kernel taps omitted)\n";
    return os.str();
}

/// `key = value` per line; '#' starts a comment.
class KeyValueConfig {
  public:
    static KeyValueConfig load(const std::string& path) {
        std::ifstream f(path);
        if (!f) throw std::runtime_error("cannot open config: " + path);
        KeyValueConfig cfg;
        cfg.path_ = path;
        std::string line;
        while (std::getline(f, line)) {
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            const auto eq = line.find('=');
            if (eq == std::string::npos) continue;
            cfg.values_[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
        }
        return cfg;
    }

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    const std::string& get(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end())
            throw std::runtime_error(path_ + ": missing config key '" + key + "'");
        return it->second;
    }

    std::string get_or(const std::string& key, const std::string& fallback) const {
        auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    double get_double(const std::string& key) const { return std::stod(get(key)); }
    double get_double_or(const std::string& key, double fallback) const {
        return has(key) ? std::stod(get(key)) : fallback;
    }
    long get_long(const std::string& key) const { return std::stol(get(key)); }
    long get_long_or(const std::string& key, long fallback) const {
        return has(key) ? std::stol(get(key)) : fallback;
    }
    bool get_bool_or(const std::string& key, bool fallback) const {
        if (!has(key)) return fallback;
        const auto& v = get(key);
        return v == "true" || v == "1" || v == "yes";
    }

    /// Comma-separated doubles.
    std::vector<double> get_doubles(const std::string& key) const {
        std::vector<double> out;
        std::stringstream ss(get(key));
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            tok = trim(tok);
            if (!tok.empty()) out.push_back(std::stod(tok));
        }
        return out;
    }

  private:
    static std::string trim(const std::string& s) {
        const auto a = s.find_first_not_of(" \t\r\n");
        if (a == std::string::npos) return "";
        const auto b = s.find_last_not_of(" \t\r\n");
        return s.substr(a, b - a + 1);
    }

    std::map<std::string, std::string> values_;
    std::string path_;
};

}  // namespace oscnet
