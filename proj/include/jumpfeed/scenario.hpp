// Copyright 2026 The jumpfeed Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// scenario.hpp: JSON scenario configs and their CSV / metadata outputs.
//
// A scenario names a tier, a parameter set and a mode:
//   me          master-equation integration (optionally plus steady state)
//   trajectory  pure-state jump ensemble
//   partial     density trajectories conditioned on selected channels
//   scan        steady-state concurrence over (trap_sigma, gamma, eta)
//   dark_time   restart sampling of the first cavity click out of |a01>
//
// Parameters are in units of g_max unless an "si" block is given, in which
// case MHz values (the common 2π cancels) are divided by g at load time and
// both forms are echoed into the metadata. See docs/scenario_schema.json.

#pragma once

#include "jumpfeed/concurrency.hpp"
#include "jumpfeed/lindblad.hpp"
#include "jumpfeed/model.hpp"
#include "jumpfeed/observables.hpp"
#include "jumpfeed/quantum_state.hpp"
#include "jumpfeed/trajectory.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace jumpfeed::scenario {

using nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";

class ConfigError : public std::invalid_argument {
public:
    ConfigError(const std::string& file, int line, const std::string& message)
        : std::invalid_argument(file + ":" + std::to_string(line) + ": " + message), line_(line) {}
    int line() const noexcept { return line_; }

private:
    int line_;
};

enum class Mode { me, trajectory, partial, scan, dark_time };

inline const char* to_string(Mode m) {
    switch (m) {
        case Mode::me: return "me";
        case Mode::trajectory: return "trajectory";
        case Mode::partial: return "partial";
        case Mode::scan: return "scan";
        case Mode::dark_time: return "dark_time";
    }
    return "?";
}

struct SiParameters {
    double g = 0.0, kappa = 0.0, gamma = 0.0, delta_big = 0.0, v_l = 0.0, v_m = 0.0;  // MHz
};

struct ScanAxes {
    std::vector<double> trap_sigma;
    std::vector<double> gamma_over_g;
    std::vector<double> eta{1.0};
    std::string method = "me";  // me | trajectory
    std::size_t runs = 100;     // trajectory method
    double t_final = 0.0;
    double dt = 0.0;
    double average_from = 0.5;  // fraction of t_final after which states are averaged
};

struct DarkTimeSetup {
    double g1 = 1.0;
    double g2 = 0.9;
    double horizon = 40.0;
    double dt = 4.0;
    std::size_t min_clicks = 1000;
    std::size_t chunks = 8;
};

struct Scenario {
    std::string name;
    std::string description;
    Tier tier = Tier::C;
    Mode mode = Mode::me;
    ModelSpec spec;
    bool delta_small_from_stark = true;
    std::optional<SiParameters> si;
    std::string initial_state = "00";
    std::size_t trajectories = 1;
    double t_final = 0.0;
    double dt = 0.0;         // 0 selects recommended_dt
    double record_dt = 0.0;  // 0 records every step
    std::uint64_t seed = 1;
    std::optional<JitterConfig> jitter;
    std::vector<std::string> conditioned;  // partial mode; empty means the detected cavity channel
    bool compare_no_feedback = false;
    bool steady_state = false;
    double steady_tol = 1e-10;
    SteadyStateMethod steady_method = SteadyStateMethod::nullspace;
    std::optional<ScanAxes> scan;
    DarkTimeSetup dark;
    json source;
    std::string path;
};

namespace detail {

inline int line_of_offset(const std::string& text, std::size_t offset) {
    offset = std::min(offset, text.size());
    return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

// Line of the key at the end of `path`, found by walking the quoted keys in
// document order. Falls back to line 1.
inline int line_of_path(const std::string& text, const std::vector<std::string>& path) {
    std::size_t pos = 0;
    for (const auto& key : path) {
        const std::string quoted = "\"" + key + "\"";
        const std::size_t hit = text.find(quoted, pos);
        if (hit == std::string::npos) return line_of_offset(text, pos);
        pos = hit + quoted.size();
    }
    return line_of_offset(text, pos == 0 ? 0 : pos - 1);
}

class Reader {
public:
    Reader(const json& node, std::vector<std::string> path, const std::string& text, const std::string& file)
        : node_(node), path_(std::move(path)), text_(text), file_(file) {
        if (!node_.is_object()) fail(path_, "expected an object");
    }

    [[noreturn]] void fail(const std::vector<std::string>& path, const std::string& msg) const {
        std::string dotted;
        for (const auto& p : path) dotted += (dotted.empty() ? "" : ".") + p;
        throw ConfigError(file_, line_of_path(text_, path), (dotted.empty() ? "" : dotted + ": ") + msg);
    }
    [[noreturn]] void fail_key(const std::string& key, const std::string& msg) const { fail(child_path(key), msg); }

    bool has(const std::string& key) const {
        seen_.insert(key);
        return node_.contains(key) && !node_.at(key).is_null();
    }

    double number(const std::string& key, double fallback) const {
        if (!has(key)) return fallback;
        const auto& v = node_.at(key);
        if (!v.is_number()) fail_key(key, "expected a number");
        const double d = v.get<double>();
        if (!std::isfinite(d)) fail_key(key, "must be finite");
        return d;
    }
    double non_negative(const std::string& key, double fallback) const {
        const double d = number(key, fallback);
        if (d < 0.0) fail_key(key, "must be non-negative");
        return d;
    }
    std::size_t count(const std::string& key, std::size_t fallback, std::size_t min = 0) const {
        if (!has(key)) return fallback;
        const auto& v = node_.at(key);
        if (!v.is_number_integer() && !v.is_number_unsigned()) fail_key(key, "expected an integer");
        const long long n = v.get<long long>();
        if (n < static_cast<long long>(min)) fail_key(key, "must be at least " + std::to_string(min));
        return static_cast<std::size_t>(n);
    }
    std::string text(const std::string& key, const std::string& fallback) const {
        if (!has(key)) return fallback;
        const auto& v = node_.at(key);
        if (!v.is_string()) fail_key(key, "expected a string");
        return v.get<std::string>();
    }
    bool flag(const std::string& key, bool fallback) const {
        if (!has(key)) return fallback;
        const auto& v = node_.at(key);
        if (!v.is_boolean()) fail_key(key, "expected true or false");
        return v.get<bool>();
    }
    std::vector<double> numbers(const std::string& key) const {
        if (!has(key)) return {};
        const auto& v = node_.at(key);
        if (!v.is_array()) fail_key(key, "expected an array of numbers");
        std::vector<double> out;
        for (const auto& e : v) {
            if (!e.is_number()) fail_key(key, "expected an array of numbers");
            out.push_back(e.get<double>());
        }
        return out;
    }
    std::vector<std::string> strings(const std::string& key) const {
        if (!has(key)) return {};
        const auto& v = node_.at(key);
        if (!v.is_array()) fail_key(key, "expected an array of strings");
        std::vector<std::string> out;
        for (const auto& e : v) {
            if (!e.is_string()) fail_key(key, "expected an array of strings");
            out.push_back(e.get<std::string>());
        }
        return out;
    }
    Reader child(const std::string& key) const {
        seen_.insert(key);
        return Reader(node_.at(key), child_path(key), text_, file_);
    }
    const json& raw(const std::string& key) const {
        seen_.insert(key);
        return node_.at(key);
    }

    // Rejects keys never asked for, which catches typos in configs.
    void finish() const {
        for (auto it = node_.begin(); it != node_.end(); ++it)
            if (!seen_.count(it.key())) fail_key(it.key(), "unknown key");
    }

    std::vector<std::string> child_path(const std::string& key) const {
        auto p = path_;
        p.push_back(key);
        return p;
    }

private:
    const json& node_;
    std::vector<std::string> path_;
    const std::string& text_;
    const std::string& file_;
    mutable std::set<std::string> seen_;
};

inline Tier parse_tier(const Reader& r, const std::string& key) {
    const std::string t = r.text(key, "C");
    if (t == "A") return Tier::A;
    if (t == "B") return Tier::B;
    if (t == "C") return Tier::C;
    r.fail_key(key, "tier must be A, B or C");
}

inline Mode parse_mode(const Reader& r, const std::string& key) {
    const std::string m = r.text(key, "me");
    if (m == "me") return Mode::me;
    if (m == "trajectory") return Mode::trajectory;
    if (m == "partial") return Mode::partial;
    if (m == "scan") return Mode::scan;
    if (m == "dark_time") return Mode::dark_time;
    r.fail_key(key, "mode must be one of me, trajectory, partial, scan, dark_time");
}

inline void read_spec(const Reader& r, Scenario& s) {
    ModelSpec& p = s.spec;
    p.delta_big = r.non_negative("delta_big", p.delta_big);
    p.v_l = r.non_negative("v_l", p.v_l);
    p.v_m = r.non_negative("v_m", p.v_m);
    p.g_max = r.non_negative("g_max", p.g_max);
    p.kappa = r.non_negative("kappa", p.kappa);
    if (r.has("gamma")) {
        if (r.has("gamma0") || r.has("gamma1")) r.fail_key("gamma", "give either gamma or gamma0/gamma1");
        const double g = r.non_negative("gamma", 0.0);
        p.gamma0 = p.gamma1 = 0.5 * g;
    } else {
        p.gamma0 = r.non_negative("gamma0", p.gamma0);
        p.gamma1 = r.non_negative("gamma1", p.gamma1);
    }
    p.eta = r.number("eta", p.eta);
    if (p.eta < 0.0 || p.eta > 1.0) r.fail_key("eta", "must lie in [0, 1]");
    p.fock_cutoff = static_cast<int>(r.count("fock_cutoff", static_cast<std::size_t>(p.fock_cutoff), 1));
    p.feedback_angle = r.number("feedback_angle", p.feedback_angle);
    p.lambda_frac_center = r.number("lambda_frac_center", p.lambda_frac_center);
    p.trap_sigma = r.non_negative("trap_sigma", p.trap_sigma);
    if (r.has("delta_small")) {
        const json& v = r.raw("delta_small");
        if (v.is_string() && v.get<std::string>() == "stark") {
            s.delta_small_from_stark = true;
        } else if (v.is_number()) {
            s.delta_small_from_stark = false;
            p.delta_small = v.get<double>();
        } else {
            r.fail_key("delta_small", "expected a number or \"stark\"");
        }
    }
    r.finish();
}

inline void read_si(const Reader& r, Scenario& s) {
    SiParameters si;
    si.g = r.non_negative("g", 0.0);
    if (!(si.g > 0.0)) r.fail_key("g", "required and must be positive");
    si.kappa = r.non_negative("kappa", 0.0);
    si.gamma = r.non_negative("gamma", 0.0);
    si.delta_big = r.non_negative("delta_big", 0.0);
    si.v_l = r.non_negative("v_l", si.g);
    si.v_m = r.non_negative("v_m", 0.0);
    r.finish();
    s.si = si;
    ModelSpec& p = s.spec;
    p.g_max = 1.0;
    p.kappa = si.kappa / si.g;
    p.gamma0 = p.gamma1 = 0.5 * si.gamma / si.g;
    p.delta_big = si.delta_big / si.g;
    p.v_l = si.v_l / si.g;
    p.v_m = si.v_m / si.g;
}

inline JitterConfig read_jitter(const Reader& r) {
    JitterConfig j;
    j.trap_sigma = r.non_negative("trap_sigma", 0.0);
    j.resample_dt = r.non_negative("resample_dt", 0.0);
    j.center = r.number("center", 0.0);
    const auto frozen = r.numbers("frozen");
    if (!frozen.empty()) {
        if (frozen.size() != 2) r.fail_key("frozen", "expected [g1, g2]");
        j.frozen = std::make_pair(frozen[0], frozen[1]);
    }
    r.finish();
    return j;
}

inline ScanAxes read_scan(const Reader& r) {
    ScanAxes a;
    a.trap_sigma = r.numbers("trap_sigma");
    a.gamma_over_g = r.numbers("gamma_over_g");
    if (r.has("eta")) a.eta = r.numbers("eta");
    if (a.trap_sigma.empty()) r.fail_key("trap_sigma", "scan axis must be non-empty");
    if (a.gamma_over_g.empty()) r.fail_key("gamma_over_g", "scan axis must be non-empty");
    if (a.eta.empty()) r.fail_key("eta", "scan axis must be non-empty");
    for (double v : a.trap_sigma)
        if (v < 0.0) r.fail_key("trap_sigma", "values must be non-negative");
    for (double v : a.gamma_over_g)
        if (v < 0.0) r.fail_key("gamma_over_g", "values must be non-negative");
    for (double v : a.eta)
        if (v < 0.0 || v > 1.0) r.fail_key("eta", "values must lie in [0, 1]");
    a.method = r.text("method", a.method);
    if (a.method != "me" && a.method != "trajectory") r.fail_key("method", "must be me or trajectory");
    a.runs = r.count("runs", a.runs, 1);
    a.t_final = r.non_negative("t_final", 0.0);
    a.dt = r.non_negative("dt", 0.0);
    a.average_from = r.number("average_from", a.average_from);
    if (a.average_from < 0.0 || a.average_from >= 1.0) r.fail_key("average_from", "must lie in [0, 1)");
    if (a.method == "trajectory" && !(a.t_final > 0.0 && a.dt > 0.0))
        r.fail_key("method", "trajectory scans need positive t_final and dt");
    r.finish();
    return a;
}

inline DarkTimeSetup read_dark(const Reader& r) {
    DarkTimeSetup d;
    d.g1 = r.number("g1", d.g1);
    d.g2 = r.number("g2", d.g2);
    d.horizon = r.non_negative("horizon", d.horizon);
    d.dt = r.non_negative("dt", d.dt);
    d.min_clicks = r.count("min_clicks", d.min_clicks, 1);
    d.chunks = r.count("chunks", d.chunks, 1);
    if (!(d.horizon > 0.0 && d.dt > 0.0)) r.fail_key("horizon", "horizon and dt must be positive");
    r.finish();
    return d;
}

}  // namespace detail

inline Scenario parse(const std::string& text, const std::string& file = "<config>") {
    Scenario s;
    s.path = file;
    try {
        s.source = json::parse(text);
    } catch (const json::parse_error& e) {
        std::string msg = e.what();
        if (const auto p = msg.find("]: "); p != std::string::npos) msg = msg.substr(p + 3);
        throw ConfigError(file, detail::line_of_offset(text, e.byte > 0 ? e.byte - 1 : 0), msg);
    }
    const detail::Reader r(s.source, {}, text, file);
    s.name = r.text("name", "");
    if (s.name.empty()) r.fail_key("name", "required");
    if (s.name.find_first_of("/\\ ") != std::string::npos) r.fail_key("name", "must not contain spaces or slashes");
    s.description = r.text("description", "");
    s.tier = detail::parse_tier(r, "tier");
    s.mode = detail::parse_mode(r, "mode");
    if (r.has("si")) detail::read_si(r.child("si"), s);
    if (r.has("spec")) {
        if (s.si) r.fail_key("spec", "give either spec or si, not both");
        detail::read_spec(r.child("spec"), s);
    }
    if (s.delta_small_from_stark && s.spec.delta_big > 0.0) s.spec.delta_small = stark_shift_delta(s.spec);
    try {
        s.spec.validate();
    } catch (const std::invalid_argument& e) {
        r.fail_key(r.has("si") ? "si" : "spec", e.what());
    }

    s.initial_state = r.text("initial_state", s.initial_state);
    try {
        basis::named(s.initial_state);
    } catch (const std::invalid_argument& e) {
        r.fail_key("initial_state", e.what());
    }
    s.trajectories = r.count("trajectories", s.trajectories, 1);
    s.t_final = r.non_negative("t_final", 0.0);
    if (r.has("dt")) {
        const json& v = r.raw("dt");
        if (v.is_string() && v.get<std::string>() == "auto") s.dt = 0.0;
        else if (v.is_number() && v.get<double>() > 0.0) s.dt = v.get<double>();
        else r.fail_key("dt", "expected a positive number or \"auto\"");
    }
    s.record_dt = r.non_negative("record_dt", 0.0);
    if (r.has("seed")) {
        const json& v = r.raw("seed");
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
            r.fail_key("seed", "expected a non-negative integer");
        s.seed = v.get<std::uint64_t>();
    }
    if (r.has("jitter")) s.jitter = detail::read_jitter(r.child("jitter"));
    if (s.jitter) s.spec.trap_sigma = s.jitter->trap_sigma;
    s.conditioned = r.strings("conditioned");
    s.compare_no_feedback = r.flag("compare_no_feedback", false);
    s.steady_state = r.flag("steady_state", false);
    s.steady_tol = r.non_negative("steady_tol", s.steady_tol);
    const std::string method = r.text("steady_method", "nullspace");
    if (method == "nullspace") s.steady_method = SteadyStateMethod::nullspace;
    else if (method == "integrate") s.steady_method = SteadyStateMethod::integrate;
    else r.fail_key("steady_method", "must be nullspace or integrate");
    if (r.has("scan")) s.scan = detail::read_scan(r.child("scan"));
    if (r.has("dark_time")) s.dark = detail::read_dark(r.child("dark_time"));
    r.finish();

    if (s.mode == Mode::scan && !s.scan) r.fail_key("mode", "scan mode requires a scan block");
    if ((s.mode == Mode::me || s.mode == Mode::trajectory || s.mode == Mode::partial) && !(s.t_final > 0.0))
        r.fail_key("t_final", "must be positive for this mode");
    if ((s.mode == Mode::trajectory || s.mode == Mode::partial) && !(s.dt > 0.0))
        r.fail_key("dt", "trajectory modes need an explicit positive dt");
    if (s.tier == Tier::A && s.jitter) r.fail_key("jitter", "jitter applies to the reduced tiers only");
    if (!s.conditioned.empty() && s.mode != Mode::partial) r.fail_key("conditioned", "only used in partial mode");
    return s;
}

inline Scenario load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read scenario config: " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), path.string());
}

// ---------------------------------------------------------------------------
// Output helpers

inline std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header) : path_(path), out_(path) {
        if (!out_) throw std::runtime_error("cannot write " + path.string());
        row(header);
    }
    void row(const std::vector<std::string>& cells) {
        for (std::size_t k = 0; k < cells.size(); ++k) out_ << (k ? "," : "") << cells[k];
        out_ << '\n';
    }
    void values(const std::vector<double>& cells) {
        for (std::size_t k = 0; k < cells.size(); ++k) out_ << (k ? "," : "") << fmt(cells[k]);
        out_ << '\n';
    }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    std::ofstream out_;
};

inline const std::vector<std::string>& timeseries_header() {
    static const std::vector<std::string> h{"t", "concurrence", "population_00", "population_a01",
                                            "population_s01", "population_11", "discarded_weight"};
    return h;
}

inline json nullable(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json spec_json(const ModelSpec& p) {
    return {{"delta_big", p.delta_big}, {"delta_small", p.delta_small}, {"v_l", p.v_l},
            {"v_m", p.v_m}, {"g_max", p.g_max}, {"kappa", p.kappa},
            {"gamma0", p.gamma0}, {"gamma1", p.gamma1}, {"eta", p.eta},
            {"fock_cutoff", p.fock_cutoff}, {"feedback_angle", p.feedback_angle}, {"trap_sigma", p.trap_sigma},
            {"lambda_frac_center", p.lambda_frac_center}};
}

inline std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// Standing notes on two printed expressions that the implementation does not
// follow literally.
inline json discrepancy_notes(const ModelSpec& p) {
    const EffectiveRates r = effective_rates(p);
    json notes;
    notes["gamma_eff"] = {
        {"implemented", "v_l^2 * gamma / (4 delta_big^2)"},
        {"printed", "v_l * gamma / (4 delta_big^2)"},
        {"reason", "only the v_l^2 form satisfies g_eff^2 / (kappa gamma_eff) = g^2 / (gamma kappa)"},
        {"value", nullable(r.gamma_eff)},
        {"printed_value", p.delta_big > 0 ? nullable(p.v_l * p.gamma() / (4 * p.delta_big * p.delta_big)) : json(nullptr)}};
    notes["dark_time"] = {
        {"implemented", "2 kappa delta_big^2 / (v_l^2 (g1 - g2)^2)"},
        {"printed", "2 kappa / (g1^2 - g2^2)"},
        {"reason", "inverse of the dark-state emission rate of the jitter cavity operator; "
                   "checked by the dark_time scenario mode"}};
    return notes;
}

inline json environment_json(unsigned threads) {
    json env;
    env["software_version"] = kVersion;
#if defined(__VERSION__)
    env["compiler"] = __VERSION__;
#endif
#if defined(NDEBUG)
    env["build"] = "release";
#else
    env["build"] = "debug";
#endif
    env["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                   std::to_string(EIGEN_MINOR_VERSION);
    env["threads"] = threads;
    env["timestamp_utc"] = utc_timestamp();
    return env;
}

// ---------------------------------------------------------------------------
// Running

struct RunOptions {
    std::optional<std::uint64_t> seed;  // overrides the config seed
    std::filesystem::path out_dir = ".";
    unsigned threads = 1;
};

struct RunSummary {
    std::vector<std::filesystem::path> files;
    json meta;
};

// Tier model with detector efficiency applied; jitter is left to the caller.
inline ModelInstance prepare_model(const Scenario& s) {
    ModelInstance m = build(s.spec, s.tier);
    if (s.spec.eta < 1.0) m = with_detector_efficiency(m, s.spec.eta);
    return m;
}

inline QuantumState initial_state(const Scenario& s, const ModelInstance& m) {
    ComplexVector q = basis::named(s.initial_state);
    if (s.tier == Tier::A) q = basis::embed_full(q, s.spec.fock_cutoff);
    return QuantumState::pure(q, m.layout);
}

// A label selects the channel of the same name and its ':'-suffixed parts.
inline std::set<std::string> resolve_labels(const ModelInstance& m, const std::vector<std::string>& wanted) {
    std::set<std::string> out;
    for (const auto& w : wanted) {
        bool hit = false;
        for (const auto& ch : m.channels)
            if (ch.label == w || ch.label.starts_with(w + ":")) {
                out.insert(ch.label);
                hit = true;
            }
        if (!hit) throw std::invalid_argument("unknown channel label '" + w + "' (model has: " + [&] {
                std::string all;
                for (const auto& l : m.channel_labels()) all += (all.empty() ? "" : ", ") + l;
                return all;
            }() + ")");
    }
    return out;
}

namespace detail {

inline void write_timeseries(const std::filesystem::path& path, const std::vector<double>& t,
                             const std::vector<double>& c, const std::vector<SectorPopulations>& p,
                             const std::vector<double>& dw) {
    CsvWriter w(path, timeseries_header());
    for (std::size_t i = 0; i < t.size(); ++i)
        w.values({t[i], c[i], p[i].p00, p[i].a01, p[i].s01, p[i].p11, dw[i]});
}

inline void write_jumps(const std::filesystem::path& path, const std::vector<JumpEvent>& jumps) {
    CsvWriter w(path, {"t", "channel"});
    for (const auto& j : jumps) w.row({fmt(j.t), j.label});
}

inline json base_meta(const Scenario& s, const ModelInstance& m, std::uint64_t seed, unsigned threads) {
    json meta;
    meta["scenario"] = s.source;
    meta["config_path"] = s.path;
    meta["name"] = s.name;
    meta["mode"] = to_string(s.mode);
    meta["tier"] = to_string(s.tier);
    meta["spec_g_units"] = spec_json(s.spec);
    meta["delta_small_rule"] = s.delta_small_from_stark ? "stark_shift_delta" : "explicit";
    if (s.si)
        meta["spec_si_mhz"] = {{"g", s.si->g}, {"kappa", s.si->kappa}, {"gamma", s.si->gamma},
                               {"delta_big", s.si->delta_big}, {"v_l", s.si->v_l}, {"v_m", s.si->v_m}};
    const EffectiveRates r = effective_rates(s.spec);
    meta["effective_rates"] = {{"g_eff", r.g_eff}, {"gamma_eff", r.gamma_eff},
                               {"cooperativity", nullable(r.cooperativity)},
                               {"cooperativity_unbounded", r.cooperativity_unbounded}};
    meta["notes"] = discrepancy_notes(s.spec);
    meta["channels"] = m.channel_labels();
    meta["warnings"] = m.warnings;
    meta["seed"] = {{"master", seed}, {"rule", "trajectory k uses splitmix64(master ^ splitmix64(k + 0x632BE59BD9B4E019))"}};
    meta["environment"] = environment_json(threads);
    return meta;
}

inline void write_meta(const std::filesystem::path& path, const json& meta) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << meta.dump(2) << '\n';
}

inline RunSummary run_me(const Scenario& s, const RunOptions& o, std::uint64_t seed) {
    ModelInstance m = prepare_model(s);
    if (s.jitter) {
        if (s.jitter->frozen) m = with_cavity_couplings(m, s.jitter->frozen->first, s.jitter->frozen->second);
        else if (s.jitter->trap_sigma > 0.0) m = jitter_averaged(m, s.jitter->trap_sigma, s.jitter->center);
    }
    const double dt = s.dt > 0.0 ? s.dt : recommended_dt(m);
    IntegrateOptions io;
    io.record_every = s.record_dt > 0.0 ? static_cast<std::size_t>(std::max<long long>(1, std::llround(s.record_dt / dt))) : 1;
    const QuantumState psi0 = initial_state(s, m);
    const auto series = integrate(m, QuantumState::density(psi0.to_density(), m.layout), s.t_final, dt, io);

    std::vector<double> t, c, dw;
    std::vector<SectorPopulations> p;
    for (const auto& ts : series) {
        const Sample smp = sample_state(ts.state);
        t.push_back(ts.t);
        c.push_back(smp.concurrence);
        p.push_back(smp.populations);
        dw.push_back(smp.discarded_weight);
    }
    RunSummary out;
    const auto base = o.out_dir / s.name;
    write_timeseries(base.string() + "_timeseries.csv", t, c, p, dw);
    write_jumps(base.string() + "_jumps.csv", {});
    out.files = {base.string() + "_timeseries.csv", base.string() + "_jumps.csv"};

    out.meta = base_meta(s, m, seed, o.threads);
    out.meta["dt"] = dt;
    out.meta["dt_rule"] = s.dt > 0.0 ? "explicit" : "recommended_dt = 0.01 / max_rate";
    out.meta["jitter_treatment"] = s.jitter ? (s.jitter->frozen ? "frozen couplings" : "channels averaged over position moments") : "none";
    out.meta["final_concurrence"] = c.back();
    if (s.steady_state) {
        SteadyStateOptions so;
        so.method = s.steady_method;
        const SteadyStateResult ss = solve_steady_state(m, s.steady_tol, so);
        out.meta["steady_state"] = {{"concurrence", sample_state(ss.state).concurrence},
                                    {"residual", ss.residual},
                                    {"method", to_string(ss.method)},
                                    {"tol", s.steady_tol}};
    }
    return out;
}

inline json segmentation_summary(const std::vector<TrajectoryRecord>& records) {
    json runs = json::array();
    double dark = 0.0, light = 0.0;
    std::size_t light_n = 0;
    for (const auto& r : records) {
        const PeriodSegmentation seg = segment_periods(r);
        runs.push_back({{"seed", r.seed}, {"clicks", r.click_times(labels::cavity_detected).size()},
                        {"threshold_gap", seg.threshold_gap}, {"dark_fraction", seg.dark_fraction()},
                        {"mean_light_length", seg.mean_light_length()},
                        {"light_periods", seg.light_intervals.size()}});
        dark += seg.dark_fraction();
        for (const auto& iv : seg.light_intervals) light += iv.length();
        light_n += seg.light_intervals.size();
    }
    return {{"rule", "dark = click-free gap >= 5 mean light inter-click times"},
            {"mean_dark_fraction", dark / static_cast<double>(records.size())},
            {"mean_light_length", light_n ? light / static_cast<double>(light_n) : 0.0},
            {"runs", runs}};
}

inline RunSummary run_trajectories(const Scenario& s, const RunOptions& o, std::uint64_t seed) {
    const ModelInstance m = prepare_model(s);
    const QuantumState psi0 = initial_state(s, m);
    TrajectoryConfig cfg;
    cfg.t_final = s.t_final;
    cfg.dt = s.dt;
    cfg.record_dt = s.record_dt;
    cfg.jitter = s.jitter;
    cfg.store_states = s.trajectories > 1 && m.dim() == 4;

    std::set<std::string> labels;
    if (s.mode == Mode::partial) {
        labels = resolve_labels(m, s.conditioned.empty() ? std::vector<std::string>{std::string(labels::cavity_detected)}
                                                         : s.conditioned);
    }
    const auto records = run_ensemble(s.trajectories, seed, o.threads, [&](std::size_t, std::uint64_t k_seed) {
        TrajectoryConfig c = cfg;
        c.seed = k_seed;
        if (s.mode == Mode::partial) return run_partial(m, QuantumState::density(psi0.to_density(), m.layout), labels, c);
        return run_trajectory(m, psi0, c);
    });

    RunSummary out;
    const std::string base = (o.out_dir / s.name).string();
    out.meta = base_meta(s, m, seed, o.threads);
    if (records.size() == 1) {
        const auto& r = records.front();
        write_timeseries(base + "_timeseries.csv", r.times, r.concurrence, r.populations, r.discarded_weight);
        out.meta["timeseries_concurrence"] = "single run";
    } else {
        const EnsembleAverage avg = ensemble_average(records);
        write_timeseries(base + "_timeseries.csv", avg.times, avg.mean_concurrence, avg.mean_populations,
                         avg.mean_discarded_weight);
        out.meta["timeseries_concurrence"] = "mean over runs of the per-run concurrence";
        CsvWriter w(base + "_ensemble.csv", {"t", "mean_concurrence", "mean_concurrence_stderr", "min_concurrence",
                                             "max_concurrence", "concurrence_of_mean", "concurrence_of_mean_stderr"});
        const bool com = !avg.concurrence_of_mean.empty();
        const double nan = std::numeric_limits<double>::quiet_NaN();
        for (std::size_t i = 0; i < avg.times.size(); ++i)
            w.values({avg.times[i], avg.mean_concurrence[i], avg.mean_concurrence_stderr[i], avg.min_concurrence[i],
                      avg.max_concurrence[i], com ? avg.concurrence_of_mean[i] : nan,
                      com ? avg.concurrence_of_mean_stderr[i] : nan});
        out.files.push_back(w.path());
        out.meta["runs"] = records.size();
    }
    write_jumps(base + "_jumps.csv", records.front().jumps);
    out.files.insert(out.files.begin(), {base + "_timeseries.csv", base + "_jumps.csv"});
    out.meta["jumps_file"] = "first trajectory (stream index 0)";
    out.meta["dt"] = s.dt;
    if (s.jitter)
        out.meta["jitter"] = {{"trap_sigma", s.jitter->trap_sigma},
                              {"resample_dt", s.jitter->resample_dt > 0 ? s.jitter->resample_dt : s.dt},
                              {"resample_rule", s.jitter->resample_dt > 0 ? "explicit" : "every step (default)"},
                              {"frozen", s.jitter->frozen ? json{s.jitter->frozen->first, s.jitter->frozen->second}
                                                          : json(nullptr)}};
    if (s.mode == Mode::partial) out.meta["conditioned"] = labels;
    if (m.find(labels::cavity_detected)) out.meta["segmentation"] = segmentation_summary(records);
    std::map<std::string, std::size_t> counts;
    for (const auto& r : records)
        for (const auto& j : r.jumps) ++counts[j.label];
    out.meta["jump_counts"] = counts;
    return out;
}

inline RunSummary run_dark_time(const Scenario& s, const RunOptions& o, std::uint64_t seed) {
    ModelSpec spec = s.spec;
    spec.v_m = 0.0;
    const ModelInstance m = with_cavity_couplings(build(spec, Tier::B), s.dark.g1, s.dark.g2);
    const QuantumState psi0 = QuantumState::pure(basis::a01(), m.layout);
    const std::size_t chunks = s.dark.chunks;
    const std::size_t per_chunk = (s.dark.min_clicks + chunks - 1) / chunks;
    std::vector<FirstClickEstimate> parts(chunks);
    parallel_for(chunks, o.threads, [&](std::size_t k) {
        parts[k] = sample_first_clicks(m, psi0, s.dark.horizon, s.dark.dt, per_chunk, stream_seed(seed, k));
    });
    FirstClickEstimate total;
    for (const auto& p : parts) {
        total.clicks += p.clicks;
        total.windows += p.windows;
        total.exposure += p.exposure;
    }
    const double measured = total.mean_time();
    const std::optional<double> predicted = dark_time(spec, s.dark.g1, s.dark.g2);
    const double printed = 2.0 * spec.kappa / (s.dark.g1 * s.dark.g1 - s.dark.g2 * s.dark.g2);
    const double pred = predicted.value_or(std::numeric_limits<double>::infinity());

    RunSummary out;
    const std::string base = (o.out_dir / s.name).string();
    CsvWriter w(base + "_darktime.csv", {"g1", "g2", "clicks", "windows", "exposure", "mean_first_click",
                                         "predicted_rate_form", "predicted_printed_form"});
    w.values({s.dark.g1, s.dark.g2, static_cast<double>(total.clicks), static_cast<double>(total.windows),
              total.exposure, measured, pred, printed});
    out.files.push_back(w.path());
    out.meta = base_meta(s, m, seed, o.threads);
    out.meta["dark_time"] = {
        {"protocol", "restart from |a01> with frozen couplings; censored windows of fixed horizon; "
                     "estimate = total time at risk / number of first clicks"},
        {"horizon", s.dark.horizon}, {"dt", s.dark.dt}, {"chunks", chunks},
        {"clicks", total.clicks}, {"windows", total.windows}, {"exposure", total.exposure},
        {"measured_mean_first_click", measured},
        {"predicted_rate_form", nullable(pred)},
        {"predicted_printed_form", printed},
        {"relative_error_rate_form", std::isfinite(pred) ? json(std::abs(measured - pred) / pred) : json(nullptr)},
        {"relative_error_printed_form", std::abs(measured - printed) / printed},
        {"verdict", std::isfinite(pred) && std::abs(measured - pred) <= 0.1 * pred ? "rate form confirmed within 10%"
                                                                                    : "rate form not confirmed"}};
    return out;
}

}  // namespace detail

inline RunSummary run_scan(const Scenario& s, const RunOptions& o);

// Writes the mode's files into o.out_dir and returns them with the metadata
// (already written as <name>_meta.json). A numerical abort leaves
// <name>_diagnostics.txt behind and rethrows.
inline RunSummary run_scenario(const Scenario& s, const RunOptions& o) {
    std::filesystem::create_directories(o.out_dir);
    const std::uint64_t seed = o.seed.value_or(s.seed);
    const std::string base = (o.out_dir / s.name).string();
    RunSummary out;
    try {
        switch (s.mode) {
            case Mode::me: out = detail::run_me(s, o, seed); break;
            case Mode::trajectory:
            case Mode::partial: out = detail::run_trajectories(s, o, seed); break;
            case Mode::dark_time: out = detail::run_dark_time(s, o, seed); break;
            case Mode::scan: return run_scan(s, o);
        }
    } catch (const NumericalError& e) {
        std::ofstream diag(base + "_diagnostics.txt");
        diag << "numerical abort: " << e.what() << '\n' << e.diagnostics() << '\n';
        throw;
    }
    if (s.compare_no_feedback) {
        Scenario off = s;
        off.name = s.name + "_nofeedback";
        off.spec.feedback_angle = 0.0;
        off.compare_no_feedback = false;
        const RunSummary other = run_scenario(off, o);
        out.files.insert(out.files.end(), other.files.begin(), other.files.end());
        out.meta["no_feedback_companion"] = off.name;
    }
    detail::write_meta(base + "_meta.json", out.meta);
    out.files.push_back(base + "_meta.json");
    return out;
}

struct ScanPoint {
    double trap_sigma = 0.0, gamma_over_g = 0.0, eta = 1.0;
    double concurrence = std::numeric_limits<double>::quiet_NaN();
    double stderr_ = 0.0;
    std::string failure;

    static ScanPoint at(double sigma, double gamma, double eta) {
        ScanPoint p;
        p.trap_sigma = sigma;
        p.gamma_over_g = gamma;
        p.eta = eta;
        return p;
    }
};

// Steady-state concurrence at one grid point, by the jitter-averaged master
// equation or by a trajectory ensemble (concurrence of the run-averaged state
// over the late part of the record, jackknife error over runs).
inline ScanPoint scan_point(const Scenario& s, double sigma, double gamma, double eta, std::uint64_t seed,
                            unsigned threads = 1) {
    ScanPoint pt = ScanPoint::at(sigma, gamma, eta);
    ModelSpec spec = s.spec;
    spec.gamma0 = spec.gamma1 = 0.5 * gamma * spec.g_max;
    spec.eta = eta;
    spec.trap_sigma = sigma;
    ModelInstance base = build(spec, s.tier);
    if (eta < 1.0) base = with_detector_efficiency(base, eta);
    const ScanAxes& axes = *s.scan;
    if (axes.method == "me") {
        const ModelInstance m = sigma > 0.0 ? jitter_averaged(base, sigma, spec.lambda_frac_center) : base;
        SteadyStateOptions so;
        so.method = s.steady_method;
        const SteadyStateResult ss = solve_steady_state(m, s.steady_tol, so);
        pt.concurrence = sample_state(ss.state).concurrence;
        pt.stderr_ = 0.0;
        return pt;
    }
    TrajectoryConfig cfg;
    cfg.t_final = axes.t_final;
    cfg.dt = axes.dt;
    cfg.record_dt = axes.t_final / 50.0;
    cfg.store_states = true;
    if (sigma > 0.0) {
        JitterConfig j;
        j.trap_sigma = sigma;
        j.center = spec.lambda_frac_center;
        cfg.jitter = j;
    }
    std::set<std::string> cond;
    for (const auto& ch : base.channels)
        if (ch.conditioned) cond.insert(ch.label);
    const QuantumState rho0 = QuantumState::density(outer(basis::named(s.initial_state), basis::named(s.initial_state)), base.layout);
    const auto records = run_ensemble(axes.runs, seed, threads, [&](std::size_t, std::uint64_t k_seed) {
        TrajectoryConfig c = cfg;
        c.seed = k_seed;
        return run_partial(base, rho0, cond, c);
    });
    const auto& grid = records.front().times;
    const double from = axes.average_from * axes.t_final;
    std::vector<ComplexMatrix> per_run;
    for (const auto& r : records) {
        ComplexMatrix acc = ComplexMatrix::Zero(4, 4);
        std::size_t n = 0;
        for (std::size_t i = 0; i < grid.size(); ++i)
            if (grid[i] >= from) {
                acc += r.states[i].to_density();
                ++n;
            }
        per_run.push_back(acc / static_cast<double>(n));
    }
    const double dn = static_cast<double>(per_run.size());
    ComplexMatrix sum = ComplexMatrix::Zero(4, 4);
    for (const auto& r : per_run) sum += r;
    pt.concurrence = concurrence(sum / dn);
    if (per_run.size() > 1) {
        std::vector<double> loo;
        double mean = 0.0;
        for (const auto& r : per_run) {
            loo.push_back(concurrence((sum - r) / (dn - 1.0)));
            mean += loo.back();
        }
        mean /= dn;
        double acc = 0.0;
        for (double v : loo) acc += (v - mean) * (v - mean);
        pt.stderr_ = std::sqrt((dn - 1.0) / dn * acc);
    }
    return pt;
}

inline RunSummary run_scan(const Scenario& s, const RunOptions& o) {
    if (!s.scan) throw std::invalid_argument("run_scan: scenario has no scan block");
    if (s.tier == Tier::A) throw std::invalid_argument("run_scan: scans use the reduced tiers");
    std::filesystem::create_directories(o.out_dir);
    const ScanAxes& a = *s.scan;
    const std::uint64_t seed = o.seed.value_or(s.seed);
    std::vector<ScanPoint> points;
    for (double eta : a.eta)
        for (double gamma : a.gamma_over_g)
            for (double sigma : a.trap_sigma) points.push_back(ScanPoint::at(sigma, gamma, eta));
    parallel_for(points.size(), o.threads, [&](std::size_t k) {
        try {
            points[k] = scan_point(s, points[k].trap_sigma, points[k].gamma_over_g, points[k].eta, stream_seed(seed, k));
        } catch (const std::exception& e) {
            points[k].concurrence = std::numeric_limits<double>::quiet_NaN();
            points[k].stderr_ = std::numeric_limits<double>::quiet_NaN();
            points[k].failure = e.what();
        }
    });

    RunSummary out;
    const std::string base = (o.out_dir / s.name).string();
    CsvWriter w(base + "_scan.csv", {"trap_sigma", "gamma_over_g", "eta", "concurrence", "stderr"});
    json failures = json::array();
    for (const auto& p : points) {
        w.values({p.trap_sigma, p.gamma_over_g, p.eta, p.concurrence, p.stderr_});
        if (!p.failure.empty())
            failures.push_back({{"trap_sigma", p.trap_sigma}, {"gamma_over_g", p.gamma_over_g}, {"eta", p.eta},
                                {"reason", p.failure}});
    }
    out.files.push_back(w.path());
    ModelInstance m = build(s.spec, s.tier);
    out.meta = detail::base_meta(s, m, seed, o.threads);
    out.meta["grid"] = {{"trap_sigma", a.trap_sigma}, {"gamma_over_g", a.gamma_over_g}, {"eta", a.eta},
                        {"shape", {a.eta.size(), a.gamma_over_g.size(), a.trap_sigma.size()}},
                        {"row_order", "eta outermost, then gamma_over_g, then trap_sigma"}};
    out.meta["gamma_split"] = "gamma0 = gamma1 = gamma / 2";
    if (a.method == "me") {
        out.meta["method"] = "steady state of the master equation with channels averaged over the Gaussian position "
                             "moments (equivalent to re-rolling positions every step)";
        out.meta["steady_state"] = {{"solver", to_string(s.steady_method)}, {"tol", s.steady_tol}};
    } else {
        out.meta["method"] = "trajectory ensemble with per-step position re-rolls; concurrence of the run-averaged "
                             "state over the late record";
        out.meta["trajectory"] = {{"runs", a.runs}, {"t_final", a.t_final}, {"dt", a.dt},
                                  {"average_from", a.average_from}, {"stderr", "jackknife over runs"}};
    }
    out.meta["failures"] = failures;
    detail::write_meta(base + "_meta.json", out.meta);
    out.files.push_back(base + "_meta.json");
    return out;
}

// Bundled configs in `dir`, sorted by file name.
struct CatalogEntry {
    std::filesystem::path path;
    std::string name;
    std::string description;
    std::string error;  // non-empty if the config failed to validate
};

inline std::vector<CatalogEntry> list_scenarios(const std::filesystem::path& dir) {
    std::vector<CatalogEntry> out;
    if (!std::filesystem::is_directory(dir)) throw std::runtime_error("scenario directory not found: " + dir.string());
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".json") out.push_back({e.path(), "", "", ""});
    std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) { return x.path.filename() < y.path.filename(); });
    for (auto& c : out) {
        try {
            const Scenario s = load(c.path);
            c.name = s.name;
            c.description = s.description;
        } catch (const std::exception& e) {
            c.name = c.path.stem().string();
            c.error = e.what();
        }
    }
    return out;
}

}  // namespace jumpfeed::scenario
