#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "movctl/runner.hpp"

namespace {

struct Common {
    std::string config;
    std::string out;
    std::vector<std::string> sets;
    long long seed = -1;
    bool allow_short = false;
};

movctl::RunConfig resolve(const Common& c) {
    movctl::RunConfig cfg = c.config.empty() ? movctl::RunConfig{} : movctl::load_config(c.config);
    for (const auto& kv : c.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw movctl::ConfigError(fmt::format("--set expects key=value, got '{}'", kv));
        movctl::set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!c.out.empty()) cfg.out = c.out;
    if (c.seed >= 0) cfg.seed = static_cast<std::uint64_t>(c.seed);
    if (c.allow_short) cfg.allow_short_horizon = true;
    return cfg;
}

void print_run(const movctl::RunResult& r) {
    for (const auto& st : r.stages) {
        fmt::print("[{}] {}\n", st.pass() ? "pass" : "FAIL", st.name);
        if (!st.error.empty()) fmt::print("    error: {}\n", st.error);
        for (const auto& c : st.checks)
            fmt::print("    {:<4} {:<30} {:>12.4g} {} {:<10.4g}{}\n", c.pass ? "ok" : "no", c.name, c.value,
                       c.sense == "at_least" ? ">=" : (c.sense == "at_most" ? "<=" : "=="), c.bound,
                       c.gating ? "" : "  (recorded)");
    }
    if (r.short_horizon) fmt::print("watermark: {}\n", r.manifest["watermark"].get<std::string>());
    fmt::print("manifest: {}\n", movctl::join_path(r.out_dir, "manifest.json"));
    for (const auto& f : r.failing) fmt::print("failing: {}\n", f);
    fmt::print("{}\n", r.pass ? "all verdicts pass" : "verdict: FAIL");
}

std::vector<double> parse_values(const std::string& list, const std::string& range) {
    std::vector<double> v;
    if (!range.empty()) {
        double a = 0, b = 0;
        int n = 0;
        if (std::sscanf(range.c_str(), "%lf:%lf:%d", &a, &b, &n) != 3 || n < 1)
            throw movctl::ConfigError("--range expects start:stop:count");
        for (int k = 0; k < n; ++k) v.push_back(n == 1 ? a : a + (b - a) * k / (n - 1));
    }
    std::size_t pos = 0;
    while (pos < list.size()) {
        const auto comma = list.find(',', pos);
        const std::string item = list.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        if (!item.empty()) {
            std::size_t used = 0;
            const double x = std::stod(item, &used);
            if (used != item.size()) throw movctl::ConfigError(fmt::format("bad sweep value '{}'", item));
            v.push_back(x);
        }
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return v;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Moving-control null controllability experiments for a fractional wave equation with memory"};
    app.require_subcommand(1);
    Common common;
    app.add_option("--config", common.config, "key = value configuration file")->check(CLI::ExistingFile);
    app.add_option("--out", common.out, "output directory");
    app.add_option("--seed", common.seed, "random seed")->check(CLI::NonNegativeNumber);
    app.add_flag("--allow-short-horizon", common.allow_short, "permit T at or below the threshold (watermarked)");
    app.add_option("--set", common.sets, "override a configuration key, key=value (repeatable)");

    struct Verb {
        const char* name;
        movctl::Pipeline pipeline;
        const char* help;
    };
    const std::vector<Verb> verbs = {
        {"spectrum", movctl::Pipeline::spectrum, "eigenvalue table, memory cubic roots, gap check"},
        {"gaps", movctl::Pipeline::gaps, "moving spectrum separation diagnostics and frame bounds"},
        {"biorthogonal", movctl::Pipeline::biorthogonal, "product function and biorthogonal family"},
        {"control", movctl::Pipeline::control, "moment system, minimum-norm control, observability"},
        {"simulate", movctl::Pipeline::simulate, "control plus exact Galerkin propagation and duality"},
        {"verify-all", movctl::Pipeline::verify_all, "every stage"},
    };
    std::vector<std::pair<CLI::App*, movctl::Pipeline>> run_cmds;
    for (const auto& v : verbs) run_cmds.emplace_back(app.add_subcommand(v.name, v.help), v.pipeline);

    CLI::App* sw = app.add_subcommand("sweep", "run a pipeline over a list of parameter values");
    std::string param, values, range, pipeline = "simulate";
    int threads = 0;
    sw->add_option("--param", param, "c, T, N, M or s")->required();
    sw->add_option("--values", values, "comma-separated values");
    sw->add_option("--range", range, "start:stop:count");
    sw->add_option("--pipeline", pipeline, "pipeline per value");
    sw->add_option("--threads", threads, "worker threads (0: hardware)");

    CLI11_PARSE(app, argc, argv);

    try {
        const movctl::RunConfig cfg = resolve(common);
        for (const auto& [cmd, p] : run_cmds)
            if (cmd->parsed()) {
                const movctl::RunResult r = movctl::run_pipeline(cfg, p);
                print_run(r);
                return r.pass ? 0 : 1;
            }
        const auto vals = parse_values(values, range);
        const movctl::SweepResult s = movctl::sweep(cfg, param, vals, movctl::parse_pipeline(pipeline), threads);
        bool all = true;
        for (const auto& row : s.rows) {
            fmt::print("{} = {:<10g} {}{}\n", s.parameter, row.value, row.status,
                       row.detail.empty() ? "" : "  (" + row.detail + ")");
            all = all && row.status == "pass";
        }
        fmt::print("aggregated: {}\n", s.csv_path);
        return all ? 0 : 1;
    } catch (const movctl::ConfigError& e) {
        fmt::print(stderr, "configuration rejected: {}\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 3;
    }
}
