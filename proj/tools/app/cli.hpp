#pragma once

#include "bsdiag/diagnostics.hpp"
#include "bsdiag/fitter.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace bsdiag::app {

enum ExitCode : int { kSuccess = 0, kIoFailure = 1, kInvalidInput = 2, kNotConverged = 3 };

struct RunConfig {
    std::string data_path;
    std::string response;
    std::optional<std::string> model_text;
    std::optional<std::string> builtin;
    std::optional<std::string> init;
    std::vector<std::string> schemes;
    std::optional<std::string> covariate;
    std::optional<double> s_y;
    std::optional<double> s_x;
    std::optional<std::int64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> svg_dir;
    double tol = 1e-8;
    std::size_t max_iter = 200;
};

struct SimulateConfig {
    std::optional<std::string> model_text;
    std::optional<std::string> builtin;
    std::string beta;                 // comma-separated true coefficients
    double alpha = 0.5;
    std::size_t n = 0;
    std::vector<std::string> ranges;  // NAME:LO:HI
    std::size_t outliers = 0;
    std::string response = "y";
    std::int64_t seed = 1;
    std::optional<std::string> out;
};

/// Outcome of a fit or diagnose run: the report plus any SVG documents keyed by file name.
struct RunResult {
    int exit_code = kSuccess;
    nlohmann::ordered_json report;
    std::vector<std::pair<std::string, std::string>> plots;
};

/// Simulated table: covariate columns then the response, in generation order.
struct Simulation {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
    std::vector<std::size_t> planted;  // 0-based rows that received the shift
    double shift = 0.0;
};

Simulation simulate(const SimulateConfig& config);

/// Two-space indented JSON with every double printed to 17 significant digits.
std::string format_report(const nlohmann::ordered_json& report);

RunResult run_fit(const RunConfig& config);
RunResult run_diagnose(const RunConfig& config);

/// Parses flags and dispatches the fit, diagnose and simulate subcommands.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace bsdiag::app
