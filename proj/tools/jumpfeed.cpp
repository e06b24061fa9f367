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

// jumpfeed: command-line front end.
//
//   jumpfeed simulate <config.json|name> [--seed N] [--out DIR] [--threads N]
//   jumpfeed scan     <config.json|name> [--seed N] [--out DIR] [--threads N]
//   jumpfeed list     [--scenarios DIR]
//
// A bare name is looked up as <scenario dir>/<name>.json. The scenario dir is
// --scenarios, then JUMPFEED_SCENARIOS, then the source tree's scenarios/.

#include "jumpfeed/scenario.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#ifndef JUMPFEED_SCENARIO_DIR
#define JUMPFEED_SCENARIO_DIR "scenarios"
#endif

namespace fs = std::filesystem;
namespace sc = jumpfeed::scenario;

namespace {

fs::path scenario_dir(const std::string& flag) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv("JUMPFEED_SCENARIOS")) return env;
    return JUMPFEED_SCENARIO_DIR;
}

fs::path resolve_config(const std::string& arg, const fs::path& dir) {
    const fs::path p(arg);
    if (fs::exists(p)) return p;
    if (p.extension().empty() && fs::exists(dir / (arg + ".json"))) return dir / (arg + ".json");
    throw std::runtime_error("config not found: " + arg);
}

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = ".";
    unsigned threads = 0;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("config", c.config, "scenario config file or bundled scenario name")->required();
    cmd->add_option("--seed", c.seed, "master seed (overrides the config)");
    cmd->add_option("--out", c.out, "output directory")->capture_default_str();
    cmd->add_option("--threads", c.threads, "worker threads (default: JUMPFEED_THREADS, then all cores)");
}

void report(const sc::RunSummary& summary) {
    for (const auto& f : summary.files) std::cout << f.string() << '\n';
    if (summary.meta.contains("warnings"))
        for (const auto& w : summary.meta["warnings"]) std::cerr << "warning: " << w.get<std::string>() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two Raman atoms in a cavity under jump-based feedback"};
    app.require_subcommand(1);
    std::string dir_flag;
    app.add_option("--scenarios", dir_flag, "directory of bundled scenario configs");

    Common sim, scan;
    auto* simulate = app.add_subcommand("simulate", "run a scenario and write its CSV and metadata files");
    add_common(simulate, sim);
    auto* scan_cmd = app.add_subcommand("scan", "run a steady-state parameter scan");
    add_common(scan_cmd, scan);
    auto* list = app.add_subcommand("list", "list bundled scenarios");

    CLI11_PARSE(app, argc, argv);

    try {
        const fs::path dir = scenario_dir(dir_flag);
        if (list->parsed()) {
            int bad = 0;
            for (const auto& e : sc::list_scenarios(dir)) {
                if (e.error.empty()) {
                    std::cout << e.name << "  " << e.description << '\n';
                } else {
                    std::cout << e.name << "  INVALID: " << e.error << '\n';
                    ++bad;
                }
            }
            return bad ? 1 : 0;
        }
        const Common& c = simulate->parsed() ? sim : scan;
        const sc::Scenario s = sc::load(resolve_config(c.config, dir));
        sc::RunOptions opts;
        opts.seed = c.seed;
        opts.out_dir = c.out;
        opts.threads = jumpfeed::resolve_thread_count(c.threads);
        if (scan_cmd->parsed()) {
            if (s.mode != sc::Mode::scan) throw std::invalid_argument(s.path + ": scan needs a config with mode \"scan\"");
            report(sc::run_scan(s, opts));
        } else {
            report(sc::run_scenario(s, opts));
        }
        return 0;
    } catch (const sc::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const jumpfeed::NumericalError& e) {
        std::cerr << "numerical abort: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
