#include "movctl/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <vector>

#include <fmt/format.h>

#include "movctl/moving_spectrum.hpp"

namespace movctl {

namespace {

std::string_view trim(std::string_view v) {
    const auto b = v.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = v.find_last_not_of(" \t\r");
    return v.substr(b, e - b + 1);
}

double parse_double(std::string_view key, std::string_view v) {
    double x = 0.0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(x))
        throw ConfigError(fmt::format("{}: '{}' is not a finite number", key, v));
    return x;
}

template <class Int>
Int parse_int(std::string_view key, std::string_view v) {
    Int x = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc() || p != v.data() + v.size())
        throw ConfigError(fmt::format("{}: '{}' is not an integer in range", key, v));
    return x;
}

bool parse_bool(std::string_view key, std::string_view v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(fmt::format("{}: '{}' is not a boolean", key, v));
}

Interval parse_interval(std::string_view key, std::string_view v) {
    const auto comma = v.find(',');
    if (comma == std::string_view::npos) throw ConfigError(fmt::format("{}: expected 'a, b'", key));
    Interval w{parse_double(key, trim(v.substr(0, comma))), parse_double(key, trim(v.substr(comma + 1)))};
    if (!(w.a < w.b)) throw ConfigError(fmt::format("{}: empty interval ({}, {})", key, w.a, w.b));
    return w;
}

struct Field {
    const char* key;
    std::function<void(RunConfig&, std::string_view)> set;
    std::function<std::string(const RunConfig&)> get;
    bool hashed = true;
};

Field real(const char* key, double RunConfig::*m) {
    return {key, [key, m](RunConfig& c, std::string_view v) { c.*m = parse_double(key, v); },
            [m](const RunConfig& c) { return num(c.*m); }};
}

Field integer(const char* key, int RunConfig::*m) {
    return {key, [key, m](RunConfig& c, std::string_view v) { c.*m = parse_int<int>(key, v); },
            [m](const RunConfig& c) { return std::to_string(c.*m); }};
}

const std::vector<Field>& fields() {
    static const std::vector<Field> f = {
        real("s", &RunConfig::s),
        real("M", &RunConfig::M),
        real("c", &RunConfig::c),
        real("T", &RunConfig::T),
        real("horizon_factor", &RunConfig::horizon_factor),
        integer("N", &RunConfig::N),
        integer("N_biorthogonal", &RunConfig::N_biorthogonal),
        Field{"omega0", [](RunConfig& c, std::string_view v) { c.omega0 = parse_interval("omega0", v); },
              [](const RunConfig& c) { return num(c.omega0.a) + "," + num(c.omega0.b); }},
        real("sigma0", &RunConfig::sigma0),
        real("sigma1", &RunConfig::sigma1),
        Field{"backend",
              [](RunConfig& c, std::string_view v) {
                  try {
                      c.backend = parse_backend(v);
                  } catch (const std::exception& e) {
                      throw ConfigError(fmt::format("backend: {}", e.what()));
                  }
              },
              [](const RunConfig& c) { return to_string(c.backend); }},
        integer("table_size", &RunConfig::table_size),
        real("tol_terminal", &RunConfig::tol_terminal),
        real("tol_duality", &RunConfig::tol_duality),
        real("tol_biorthogonal", &RunConfig::tol_biorthogonal),
        real("tol_moments", &RunConfig::tol_moments),
        integer("observability_trials", &RunConfig::observability_trials),
        integer("duality_trials", &RunConfig::duality_trials),
        integer("trajectory_samples", &RunConfig::trajectory_samples),
        Field{"out", [](RunConfig& c, std::string_view v) { c.out = std::string(v); },
              [](const RunConfig& c) { return c.out; }, false},
        Field{"seed", [](RunConfig& c, std::string_view v) { c.seed = parse_int<std::uint64_t>("seed", v); },
              [](const RunConfig& c) { return std::to_string(c.seed); }},
        Field{"allow_short_horizon",
              [](RunConfig& c, std::string_view v) { c.allow_short_horizon = parse_bool("allow_short_horizon", v); },
              [](const RunConfig& c) { return std::string(c.allow_short_horizon ? "true" : "false"); }},
    };
    return f;
}

}  // namespace

double RunConfig::threshold(double gamma) const {
    return 2.0 * std::numbers::pi * (1.0 / std::abs(c) + 1.0 / std::abs(c + gamma) + 1.0 / std::abs(c - gamma));
}

double RunConfig::horizon(double gamma) const { return T > 0.0 ? T : horizon_factor * threshold(gamma); }

std::string RunConfig::canonical() const {
    std::string out;
    for (const auto& f : fields())
        if (f.hashed) out += fmt::format("{} = {}\n", f.key, f.get(*this));
    return out;
}

json RunConfig::to_json() const {
    json j;
    for (const auto& f : fields())
        if (f.hashed) j[f.key] = f.get(*this);
    return j;
}

void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value) {
    for (const auto& f : fields())
        if (key == f.key) {
            f.set(cfg, trim(value));
            return;
        }
    throw ConfigError(fmt::format("unknown configuration key '{}'", key));
}

RunConfig parse_config(std::string_view text) {
    RunConfig cfg;
    std::vector<std::string> seen;
    int line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ConfigError(fmt::format("line {}: expected key = value", line_no));
        const std::string key(trim(line.substr(0, eq)));
        for (const auto& k : seen)
            if (k == key) throw ConfigError(fmt::format("line {}: duplicate key '{}'", line_no, key));
        seen.push_back(key);
        try {
            set_config_value(cfg, key, line.substr(eq + 1));
        } catch (const ConfigError& e) {
            throw ConfigError(fmt::format("line {}: {}", line_no, e.what()));
        }
    }
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(fmt::format("cannot read config file '{}'", path));
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

void validate(const RunConfig& cfg, ConfigScope scope) {
    if (!(cfg.s > 0.0 && cfg.s < 1.0)) throw ConfigError(fmt::format("s = {} must lie in (0, 1)", cfg.s));
    if (!(std::isfinite(cfg.M) && cfg.M != 0.0)) throw ConfigError(fmt::format("M = {} must be finite and nonzero", cfg.M));
    if (cfg.table_size < 8) throw ConfigError("table_size must be at least 8");
    if (cfg.N < 1 || cfg.N_biorthogonal < 1) throw ConfigError("truncations must be positive");
    if (cfg.N > cfg.table_size || cfg.N_biorthogonal > cfg.table_size)
        throw ConfigError("truncation exceeds the eigenvalue table");
    if (!(cfg.tol_terminal > 0 && cfg.tol_duality > 0 && cfg.tol_biorthogonal > 0 && cfg.tol_moments > 0))
        throw ConfigError("tolerances must be positive");
    if (cfg.observability_trials < 0 || cfg.duality_trials < 0 || cfg.trajectory_samples < 2)
        throw ConfigError("trial and sample counts out of range");
    if (cfg.T < 0.0 || !(cfg.horizon_factor > 0.0)) throw ConfigError("horizon must be positive");
    if (scope == ConfigScope::spectrum) return;

    if (!(cfg.s > 0.5)) throw ConfigError(fmt::format("s = {} must exceed 1/2 for control pipelines", cfg.s));
    try {
        check_velocity(cfg.c, kHalfPi);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (cfg.short_horizon() && !cfg.allow_short_horizon)
        throw ConfigError(fmt::format("T = {} is not above the threshold {}; pass --allow-short-horizon to override",
                                      cfg.horizon(), cfg.threshold()));
}

}  // namespace movctl
