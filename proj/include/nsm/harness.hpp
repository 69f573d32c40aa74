#pragma once

#include <string>
#include <vector>

#include "nsm/config.hpp"

namespace nsm {

/// Process exit statuses shared by the CLI and the harness.
enum ExitStatus : int {
    exit_ok = 0,
    exit_config_error = 2,
    exit_numerical_failure = 3,
    exit_check_failed = 4,
};

/// Environment variable that overrides the output directory of a config.
inline constexpr const char* kOutDirEnv = "NSM_OUT_DIR";

struct RunResult {
    int exit_code = exit_ok;
    bool checks_passed = true;
    std::string out_dir;
    std::string summary_path;   // summary.json
    std::string series_path;    // series.csv
    std::string manifest_path;  // manifest.json; empty when the run failed
    std::string failure;        // message of the error that stopped the run
};

/// Runs the configured experiment and writes summary.json, series.csv, any
/// binary artefacts and, last, manifest.json into cfg.out_dir. Numerical errors
/// are caught and recorded in failure.json (no manifest is written then).
RunResult run_experiment(const ExperimentConfig& cfg);

/// Resolves the output directory: explicit override, else the environment, else the config value.
std::string resolve_out_dir(const ExperimentConfig& cfg, const std::string& cli_override = {});

/// Splits series.csv of a finished run into one plot-ready CSV per series
/// (columns series,t,value,ci_lo,ci_hi) under <run dir>/plotdata. Returns the
/// written paths. Throws FormatError for an empty manifest or missing series.
std::vector<std::string> export_plotdata(const std::string& manifest_path);

/// RFC 4180 field quoting.
std::string csv_field(const std::string& s);
/// Parses one CSV record (quoted fields allowed, no embedded newlines).
std::vector<std::string> csv_split(const std::string& line);

std::string code_version();

}  // namespace nsm
