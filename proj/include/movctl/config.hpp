#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include "movctl/control.hpp"
#include "movctl/io.hpp"

namespace movctl {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr double kHalfPi = 1.57079632679489661923;

// Plain `key = value` lines, `#` starts a comment. Every key is optional; unknown keys are rejected.
struct RunConfig {
    double s = 0.75;
    double M = 0.5;
    double c = 1.0;
    double T = 0.0;            // 0: horizon_factor times the threshold
    double horizon_factor = 1.05;
    int N = 16;                // control and simulation truncation
    int N_biorthogonal = 12;
    Interval omega0{-0.3, 0.3};
    double sigma0 = 3.0, sigma1 = 2.0;
    EigenBackend backend = EigenBackend::asymptotic;
    int table_size = 400;
    double tol_terminal = 1e-6;
    double tol_duality = 1e-5;
    double tol_biorthogonal = 1e-3;
    double tol_moments = 1e-8;
    int observability_trials = 200;
    int duality_trials = 50;
    int trajectory_samples = 200;
    std::string out = "out";
    std::uint64_t seed = 42;
    bool allow_short_horizon = false;

    // gamma defaults to pi/2, the asymptotic gap; the runner passes the value measured on its table
    double threshold(double gamma = kHalfPi) const;  // 2 pi (1/|c| + 1/|c+gamma| + 1/|c-gamma|)
    double horizon(double gamma = kHalfPi) const;    // T, or the default multiple of the threshold
    bool short_horizon(double gamma = kHalfPi) const { return !(horizon(gamma) > threshold(gamma)); }

    // canonical key = value text (fixed key order, shortest round-trip numbers); the hash covers it
    std::string canonical() const;
    std::uint64_t hash() const { return fnv1a(canonical()); }
    json to_json() const;
};

void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value);
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::string& path);

enum class ConfigScope { spectrum, control };
// control scope also requires 1/2 < s < 1, c away from {-gamma, 0, gamma}, and T above the threshold
// unless allow_short_horizon is set
void validate(const RunConfig& cfg, ConfigScope scope);

}  // namespace movctl
