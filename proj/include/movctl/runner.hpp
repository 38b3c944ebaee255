#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "movctl/config.hpp"

namespace movctl {

enum class Pipeline { spectrum, gaps, biorthogonal, control, simulate, full, verify_all };
std::string to_string(Pipeline p);
Pipeline parse_pipeline(std::string_view name);

struct Check {
    std::string name;
    double value = 0.0;
    double bound = 0.0;
    std::string sense;    // "at_most", "at_least" or "flag"
    bool pass = false;
    bool gating = true;   // false: recorded clause that does not decide the exit status
};

struct StageResult {
    std::string name;
    std::vector<Check> checks;
    json report;
    std::string error;  // exception text; the remaining stages are skipped

    bool pass() const;
    json to_json() const;
};

struct RunResult {
    Pipeline pipeline = Pipeline::full;
    std::string out_dir;
    std::vector<StageResult> stages;
    json summary;   // scalar digest used by sweeps
    json manifest;
    std::vector<std::string> failing;  // "stage/check" for every failed gating check or stage error
    bool short_horizon = false;
    bool pass = false;
};

// Validates the configuration before any compute (throws ConfigError), runs the stage chain and writes
// every artifact plus manifest.json under cfg.out.
RunResult run_pipeline(const RunConfig& cfg, Pipeline p);

struct SweepRow {
    double value = 0.0;
    std::string status;  // pass, fail or error
    std::string detail;
    json summary;
};

struct SweepResult {
    std::string parameter;
    std::vector<SweepRow> rows;
    std::string csv_path;
};

// parameter is one of c, T, N, M, s; each value runs in cfg.out/sweep_<parameter>/<k>, threads <= 0 uses
// the hardware concurrency
SweepResult sweep(const RunConfig& cfg, std::string_view parameter, const std::vector<double>& values,
                  Pipeline p = Pipeline::simulate, int threads = 0);

}  // namespace movctl
