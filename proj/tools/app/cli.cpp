#include "cli.hpp"

#include "csv.hpp"
#include "svg.hpp"

#include "bsdiag/bsdiag.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"

namespace bsdiag::app {

using json = nlohmann::ordered_json;

namespace {

double parse_double(std::string_view text, const std::string& what) {
    double v = 0.0;
    const char* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (text.empty() || ec != std::errc() || ptr != end || !std::isfinite(v))
        throw ValidationError(what + ": expected a number, found '" + std::string(text) + "'");
    return v;
}

std::vector<double> parse_list(const std::string& text, const std::string& flag) {
    std::vector<double> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = text.find(',', start);
        std::string_view item = std::string_view(text).substr(start, comma - start);
        while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
        while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
        out.push_back(parse_double(item, flag));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

// Message with the model text and a caret under the offending byte.
std::string located(const std::string& text, std::size_t offset, const std::string& what) {
    std::string msg = "model: " + what + "\n  " + text + "\n  " + std::string(std::min(offset, text.size()), ' ') + "^";
    return msg;
}

json to_json(std::span<const double> v) {
    json a = json::array();
    for (double x : v) a.push_back(x);
    return a;
}

json opt(const std::optional<std::string>& s) { return s ? json(*s) : json(nullptr); }
json opt(const std::optional<double>& s) { return s ? json(*s) : json(nullptr); }

struct Prepared {
    std::string model_text;
    Dataset data;
    std::optional<ExprAST> model;
    std::optional<Theta> init;
    std::vector<std::string> candidates;  // every non-response column
};

Prepared prepare(const RunConfig& c, const std::vector<std::string>& extra_columns) {
    if (c.data_path.empty()) throw ValidationError("--data is required");
    if (c.response.empty()) throw ValidationError("--response is required");
    if (c.model_text.has_value() == c.builtin.has_value())
        throw ValidationError("give exactly one of --model and --builtin");
    if (!(c.tol > 0.0)) throw ValidationError("--tol must be positive");
    if (c.max_iter < 1) throw ValidationError("--max-iter must be at least 1");

    const CsvTable table = read_csv(c.data_path);
    if (!table.column(c.response))
        throw ValidationError(table.source + ": response column '" + c.response + "' not found");

    Prepared out;
    for (const auto& h : table.header)
        if (h != c.response) out.candidates.push_back(h);
    for (const auto& e : extra_columns)
        if (!table.column(e) || e == c.response)
            throw ValidationError(table.source + ": covariate column '" + e + "' not found");

    try {
        out.model_text = c.model_text ? *c.model_text : builtin_model_text(*c.builtin, out.candidates);
    } catch (const DomainError& e) {
        throw ValidationError(std::string("--builtin: ") + e.what());
    }

    std::vector<std::string> used;
    try {
        const ExprAST probe = parse_model(out.model_text, out.candidates);
        for (std::size_t j = 0; j < out.candidates.size(); ++j) {
            const bool extra = std::find(extra_columns.begin(), extra_columns.end(), out.candidates[j]) !=
                               extra_columns.end();
            if (probe.references_covariate(j) || extra) used.push_back(out.candidates[j]);
        }
        out.data = to_dataset(table, c.response, used);
        out.model.emplace(parse_model(out.model_text, used, probe.parameter_count()));
    } catch (const ParseError& e) {
        throw ValidationError(located(out.model_text, e.offset(), e.what()));
    }

    const std::size_t p = out.model->parameter_count();
    if (c.init) {
        const std::vector<double> v = parse_list(*c.init, "--init");
        if (v.size() != p + 1)
            throw ValidationError("--init: expected " + std::to_string(p + 1) + " values (b1..b" + std::to_string(p) +
                                  ", alpha), found " + std::to_string(v.size()));
        if (!(v.back() > 0.0)) throw ValidationError("--init: alpha must be positive");
        out.init = Theta::unpack(v);
    }
    if (out.data.n() < p + 1)
        throw ValidationError("need at least " + std::to_string(p + 1) + " rows for " + std::to_string(p) +
                              " coefficients and alpha, found " + std::to_string(out.data.n()));
    return out;
}

json config_echo(const RunConfig& c, const std::vector<std::string>& schemes) {
    json j;
    j["data"] = c.data_path;
    j["response"] = c.response;
    j["model"] = opt(c.model_text);
    j["builtin"] = opt(c.builtin);
    j["init"] = opt(c.init);
    j["schemes"] = schemes;
    j["covariate"] = opt(c.covariate);
    j["sy"] = opt(c.s_y);
    j["sx"] = opt(c.s_x);
    j["tol"] = c.tol;
    j["max_iter"] = c.max_iter;
    return j;
}

json report_head(const char* command, const RunConfig& c, const std::vector<std::string>& schemes) {
    json r;
    r["command"] = command;
    r["provenance"] = {{"tool", "bsdiag"},
                       {"version", kVersion},
                       {"seed", c.seed ? json(*c.seed) : json(nullptr)},
                       {"config", config_echo(c, schemes)}};
    return r;
}

json model_block(const Prepared& prep) {
    json names = json::array();
    for (std::size_t k = 0; k < prep.model->parameter_count(); ++k) names.push_back("b" + std::to_string(k + 1));
    names.push_back("alpha");
    return {{"text", prep.model_text}, {"parameters", names}};
}

json data_block(const RunConfig& c, const Prepared& prep) {
    return {{"n", prep.data.n()}, {"response", c.response}, {"covariates", prep.data.covariate_names}};
}

json fit_block(const FitResult& fit) {
    json f;
    f["converged"] = fit.converged;
    f["iterations"] = fit.iterations;
    f["loglik"] = fit.loglik_at_hat;
    f["score_norm"] = fit.score_norm;
    f["beta"] = to_json(fit.theta_hat.beta);
    f["alpha"] = fit.theta_hat.alpha;
    json se = nullptr;
    json warnings = fit.warnings;
    if (fit.converged) {
        try {
            const DenseMatrix cov = asymptotic_covariance(fit);
            const std::size_t p = fit.theta_hat.beta.size();
            Vector sb(p);
            for (std::size_t k = 0; k < p; ++k) sb[k] = std::sqrt(cov(k, k));
            se = {{"beta", to_json(sb)}, {"alpha", std::sqrt(cov(p, p))}};
        } catch (const Error& e) {
            warnings.push_back(std::string("standard errors unavailable: ") + e.what());
        }
    }
    f["std_errors"] = se;
    f["warnings"] = warnings;
    return f;
}

json one_based(const std::vector<std::size_t>& idx) {
    json a = json::array();
    for (std::size_t i : idx) a.push_back(i + 1);
    return a;
}

// Fits and fills the common report blocks. Returns nullopt when the initial
// values could not be produced.
std::optional<FitResult> fit_into(const RunConfig& c, const Prepared& prep, json& report, int& exit_code) {
    report["data"] = data_block(c, prep);
    report["model"] = model_block(prep);
    FitOptions opts;
    opts.tol = c.tol;
    opts.max_iter = c.max_iter;
    opts.init = prep.init;
    try {
        FitResult fit = fit_mle(*prep.model, prep.data, opts);
        report["fit"] = fit_block(fit);
        exit_code = fit.converged ? kSuccess : kNotConverged;
        return fit;
    } catch (const ConvergenceError& e) {
        report["fit"] = nullptr;
        report["errors"] = json::array({e.what()});
        exit_code = kNotConverged;
        return std::nullopt;
    } catch (const EvaluationError& e) {
        throw ValidationError(located(prep.model_text, e.offset(), e.what()));
    } catch (const Error& e) {
        throw ValidationError(e.what());
    }
}

std::vector<std::string> expand_schemes(const RunConfig& c) {
    std::vector<std::string> requested = c.schemes;
    if (requested.empty()) {
        requested = {"case-weights", "response"};
        if (c.covariate) requested.push_back("explanatory");
    }
    std::vector<std::string> out;
    auto add = [&](const std::string& s) {
        if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(s);
    };
    for (const auto& s : requested) {
        if (s == "all") {
            add("case-weights");
            add("response");
            if (c.covariate) add("explanatory");
        } else if (parse_scheme_name(s)) {
            add(s);
        } else {
            throw ValidationError("--scheme: unknown scheme '" + s +
                                  "' (expected case-weights, response, explanatory or all)");
        }
    }
    if (std::find(out.begin(), out.end(), "explanatory") != out.end() && !c.covariate)
        throw ValidationError("--scheme explanatory needs --covariate");
    return out;
}

std::string file_safe(std::string_view s) {
    std::string out(s);
    std::replace(out.begin(), out.end(), '-', '_');
    return out;
}

}  // namespace

namespace {

void write_json(const json& j, std::string& out, int depth) {
    const std::string pad(2 * static_cast<std::size_t>(depth + 1), ' ');
    const std::string close(2 * static_cast<std::size_t>(depth), ' ');
    switch (j.type()) {
        case json::value_t::object: {
            if (j.empty()) {
                out += "{}";
                return;
            }
            out += "{\n";
            bool first = true;
            for (const auto& [key, value] : j.items()) {
                if (!first) out += ",\n";
                first = false;
                out += pad + json(key).dump() + ": ";
                write_json(value, out, depth + 1);
            }
            out += "\n" + close + "}";
            return;
        }
        case json::value_t::array: {
            if (j.empty()) {
                out += "[]";
                return;
            }
            out += "[\n";
            for (std::size_t k = 0; k < j.size(); ++k) {
                if (k > 0) out += ",\n";
                out += pad;
                write_json(j[k], out, depth + 1);
            }
            out += "\n" + close + "]";
            return;
        }
        case json::value_t::number_float: {
            const double v = j.get<double>();
            if (!std::isfinite(v)) {
                out += "null";
                return;
            }
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.17g", v);
            out += buf;
            return;
        }
        default: out += j.dump();
    }
}

}  // namespace

std::string format_report(const json& report) {
    std::string out;
    write_json(report, out, 0);
    out += '\n';
    return out;
}

RunResult run_fit(const RunConfig& config) {
    RunResult result;
    const Prepared prep = prepare(config, {});
    result.report = report_head("fit", config, {});
    fit_into(config, prep, result.report, result.exit_code);
    return result;
}

RunResult run_diagnose(const RunConfig& config) {
    RunResult result;
    const std::vector<std::string> names = expand_schemes(config);
    std::vector<std::string> extra;
    if (config.covariate) extra.push_back(*config.covariate);
    if (config.s_y && !(*config.s_y > 0.0)) throw ValidationError("--sy must be positive");
    if (config.s_x && !(*config.s_x > 0.0)) throw ValidationError("--sx must be positive");
    const Prepared prep = prepare(config, extra);
    result.report = report_head("diagnose", config, names);
    const std::optional<FitResult> fit = fit_into(config, prep, result.report, result.exit_code);
    if (!fit || !fit->converged) {
        result.report["diagnostics"] = nullptr;
        return result;
    }

    const ObservedInfo info = observed_info_at_hat(*fit);
    json blocks = json::array();
    for (const std::string& name : names) {
        PerturbationScheme scheme;
        json covariate = nullptr;
        switch (*parse_scheme_name(name)) {
            case SchemeKind::case_weights: scheme = PerturbationScheme::case_weights(); break;
            case SchemeKind::response:
                scheme = PerturbationScheme::response(config.s_y ? *config.s_y : sample_sd(prep.data.y));
                break;
            case SchemeKind::explanatory: {
                const std::size_t j = *prep.data.covariate_index(*config.covariate);
                const double s_x = config.s_x ? *config.s_x : sample_sd(prep.data.x.column(j));
                if (!(s_x > 0.0))
                    throw ValidationError("covariate '" + *config.covariate + "' is constant; give --sx explicitly");
                scheme = PerturbationScheme::explanatory(j, s_x);
                covariate = *config.covariate;
                break;
            }
        }
        if (scheme.kind == SchemeKind::response && !(scheme.scale > 0.0))
            throw ValidationError("response is constant; give --sy explicitly");

        DeltaMatrix delta;
        try {
            delta = delta_for_scheme(*prep.model, prep.data, *fit, scheme);
        } catch (const EvaluationError& e) {
            throw ValidationError(located(prep.model_text, e.offset(), e.what()));
        }
        const InfluenceReport r = influence_report(delta, info);
        json b;
        b["scheme"] = name;
        b["covariate"] = covariate;
        b["scale"] = scheme.kind == SchemeKind::case_weights ? json(nullptr) : json(scheme.scale);
        b["c_dmax"] = r.c_dmax;
        b["d_max"] = to_json(r.d_max);
        b["c_i"] = to_json(r.c_i);
        b["threshold"] = r.threshold;
        b["flagged"] = one_based(r.flagged);
        b["beta"] = {{"c_dmax", r.c_dmax_beta}, {"d_max", to_json(r.d_max_beta)}, {"c_i", to_json(r.c_i_beta)}};
        b["warnings"] = r.warnings;
        blocks.push_back(std::move(b));

        if (config.svg_dir) {
            Vector abs_d(r.d_max.size());
            std::transform(r.d_max.begin(), r.d_max.end(), abs_d.begin(), [](double v) { return std::abs(v); });
            result.plots.emplace_back("dmax_" + file_safe(name) + ".svg",
                                      render_index_plot({"|d_max|, " + name, "|d_max|", abs_d, std::nullopt, ""}));
            result.plots.emplace_back("ci_" + file_safe(name) + ".svg",
                                      render_index_plot({"total local influence, " + name, "C_i", r.c_i,
                                                         r.threshold, "2 x mean C_i"}));
        }
    }

    json diagnostics;
    diagnostics["schemes"] = std::move(blocks);
    try {
        const LeverageMatrix gl = generalized_leverage(*fit);
        diagnostics["leverage"] = {{"diagonal", to_json(gl.diagonal())}, {"trace", gl.trace()}};
        if (config.svg_dir)
            result.plots.emplace_back("leverage.svg", render_index_plot({"generalized leverage", "GL_ii",
                                                                         gl.diagonal(), std::nullopt, ""}));
    } catch (const Error& e) {
        diagnostics["leverage"] = nullptr;
        result.report["fit"]["warnings"].push_back(std::string("generalized leverage unavailable: ") + e.what());
    }
    result.report["diagnostics"] = std::move(diagnostics);
    return result;
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
    f << text;
    f.close();
    if (!f) throw IoError("write to '" + path.string() + "' failed");
}

void emit(const RunConfig& config, const RunResult& result, std::ostream& out) {
    const std::string text = format_report(result.report);
    if (config.out)
        write_text(*config.out, text);
    else
        out << text;
    if (config.svg_dir && !result.plots.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(*config.svg_dir, ec);
        if (ec) throw IoError("cannot create directory '" + *config.svg_dir + "': " + ec.message());
        for (const auto& [name, svg] : result.plots) write_text(std::filesystem::path(*config.svg_dir) / name, svg);
    }
}

struct RangeSpec {
    std::string name;
    double lo = 0.0;
    double hi = 0.0;
};

RangeSpec parse_range(const std::string& text) {
    const std::size_t a = text.find(':');
    const std::size_t b = a == std::string::npos ? a : text.find(':', a + 1);
    if (a == std::string::npos || b == std::string::npos || a == 0)
        throw ValidationError("--range: expected NAME:LO:HI, found '" + text + "'");
    RangeSpec r{text.substr(0, a), parse_double(std::string_view(text).substr(a + 1, b - a - 1), "--range"),
                parse_double(std::string_view(text).substr(b + 1), "--range")};
    if (!(r.lo < r.hi)) throw ValidationError("--range: need LO < HI in '" + text + "'");
    return r;
}

}  // namespace

Simulation simulate(const SimulateConfig& c) {
    if (c.model_text.has_value() == c.builtin.has_value())
        throw ValidationError("give exactly one of --model and --builtin");
    if (c.n == 0) throw ValidationError("--n must be positive");
    if (!(c.alpha > 0.0)) throw ValidationError("--alpha must be positive");
    if (c.outliers > c.n) throw ValidationError("--outliers exceeds --n");

    std::vector<RangeSpec> ranges;
    std::vector<std::string> names;
    for (const auto& s : c.ranges) {
        ranges.push_back(parse_range(s));
        names.push_back(ranges.back().name);
    }
    if (std::find(names.begin(), names.end(), c.response) != names.end())
        throw ValidationError("--response '" + c.response + "' clashes with a covariate name");
    std::string text;
    try {
        text = c.model_text ? *c.model_text : builtin_model_text(*c.builtin, names);
    } catch (const DomainError& e) {
        throw ValidationError(std::string("--builtin: ") + e.what());
    }
    const std::vector<double> beta = parse_list(c.beta, "--beta");
    std::optional<ExprAST> model;
    try {
        model.emplace(parse_model(text, names, beta.size()));
    } catch (const ParseError& e) {
        throw ValidationError(located(text, e.offset(), e.what()));
    }

    Rng rng(static_cast<std::uint64_t>(c.seed));
    DenseMatrix x(c.n, ranges.size());
    Vector y(c.n);
    for (std::size_t i = 0; i < c.n; ++i) {
        for (std::size_t j = 0; j < ranges.size(); ++j) x(i, j) = rng.uniform(ranges[j].lo, ranges[j].hi);
        try {
            y[i] = eval_value(*model, x.row(i), beta) + sn_draw(SNParams{c.alpha, 0.0, 2.0}, rng);
        } catch (const EvaluationError& e) {
            throw ValidationError(located(text, e.offset(), e.at_row(i).what()));
        }
    }

    Simulation sim;
    if (c.outliers > 0) {
        sim.shift = 5.0 * (c.n > 1 ? sample_sd(y) : 1.0);
        std::set<std::size_t> chosen;
        while (chosen.size() < c.outliers)
            chosen.insert(static_cast<std::size_t>(rng.next_u64() % c.n));
        sim.planted.assign(chosen.begin(), chosen.end());
        for (std::size_t i : sim.planted) y[i] += sim.shift;
    }

    sim.header = names;
    sim.header.push_back(c.response);
    sim.rows.resize(c.n);
    for (std::size_t i = 0; i < c.n; ++i) {
        for (std::size_t j = 0; j < ranges.size(); ++j) sim.rows[i].push_back(x(i, j));
        sim.rows[i].push_back(y[i]);
    }
    return sim;
}

namespace {

int run_simulate(const SimulateConfig& c, std::ostream& out) {
    if (c.outliers > 0 && !c.out) throw ValidationError("--outliers needs --out for the sidecar file");
    const Simulation sim = simulate(c);
    std::ostringstream csv;
    write_csv(csv, sim.header, sim.rows);
    if (c.out) {
        write_text(*c.out, csv.str());
        if (c.outliers > 0) {
            json side;
            side["indices"] = one_based(sim.planted);
            side["shift"] = sim.shift;
            side["seed"] = c.seed;
            write_text(*c.out + ".outliers.json", format_report(side));
        }
    } else {
        out << csv.str();
    }
    return kSuccess;
}

void add_model_flags(CLI::App* cmd, RunConfig& c) {
    cmd->add_option("--data", c.data_path, "CSV file with a header row")->required();
    cmd->add_option("--response", c.response, "response column (log-lifetimes)")->required();
    cmd->add_option("--model", c.model_text, "mean function, e.g. \"b1 + b2*exp(b3*x1)\"");
    cmd->add_option("--builtin", c.builtin, "linear, exp-growth or michaelis-menten");
    cmd->add_option("--init", c.init, "starting values b1,...,bp,alpha");
    cmd->add_option("--seed", c.seed, "seed recorded in the report");
    cmd->add_option("--out", c.out, "report path (default: standard output)");
    cmd->add_option("--tol", c.tol, "convergence tolerance");
    cmd->add_option("--max-iter", c.max_iter, "iteration limit");
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Birnbaum-Saunders nonlinear regression: fitting and local influence diagnostics", "bsdiag"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    RunConfig fit_cfg;
    CLI::App* fit_cmd = app.add_subcommand("fit", "fit the model and report estimates");
    add_model_flags(fit_cmd, fit_cfg);

    RunConfig diag_cfg;
    CLI::App* diag_cmd = app.add_subcommand("diagnose", "fit, then compute local influence and leverage");
    add_model_flags(diag_cmd, diag_cfg);
    diag_cmd->add_option("--scheme", diag_cfg.schemes, "case-weights, response, explanatory or all (repeatable)");
    diag_cmd->add_option("--covariate", diag_cfg.covariate, "covariate perturbed by the explanatory scheme");
    diag_cmd->add_option("--sy", diag_cfg.s_y, "response scale S_y (default: sample sd)");
    diag_cmd->add_option("--sx", diag_cfg.s_x, "covariate scale S_x (default: sample sd)");
    diag_cmd->add_option("--svg", diag_cfg.svg_dir, "directory for index plots");

    SimulateConfig sim_cfg;
    CLI::App* sim_cmd = app.add_subcommand("simulate", "draw a dataset from the model");
    sim_cmd->add_option("--model", sim_cfg.model_text, "mean function");
    sim_cmd->add_option("--builtin", sim_cfg.builtin, "linear, exp-growth or michaelis-menten");
    sim_cmd->add_option("--beta", sim_cfg.beta, "true coefficients b1,...,bp")->required();
    sim_cmd->add_option("--alpha", sim_cfg.alpha, "true shape alpha")->required();
    sim_cmd->add_option("--n", sim_cfg.n, "number of rows")->required();
    sim_cmd->add_option("--range", sim_cfg.ranges, "covariate NAME:LO:HI, drawn uniformly (repeatable)");
    sim_cmd->add_option("--outliers", sim_cfg.outliers, "rows whose response is shifted by 5 sample sd of the response");
    sim_cmd->add_option("--response", sim_cfg.response, "response column name");
    sim_cmd->add_option("--seed", sim_cfg.seed, "random seed");
    sim_cmd->add_option("--out", sim_cfg.out, "CSV path (default: standard output)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kSuccess : kInvalidInput;
    }

    try {
        if (sim_cmd->parsed()) return run_simulate(sim_cfg, out);
        const bool diagnose = diag_cmd->parsed();
        const RunConfig& cfg = diagnose ? diag_cfg : fit_cfg;
        const RunResult result = diagnose ? run_diagnose(cfg) : run_fit(cfg);
        emit(cfg, result, out);
        if (result.exit_code == kNotConverged) {
            err << "bsdiag: the fit did not converge";
            if (result.report.contains("errors")) err << ": " << result.report["errors"][0].get<std::string>();
            err << "\n";
        }
        return result.exit_code;
    } catch (const IoError& e) {
        err << "bsdiag: " << e.what() << "\n";
        return kIoFailure;
    } catch (const ValidationError& e) {
        err << "bsdiag: " << e.what() << "\n";
        return kInvalidInput;
    } catch (const Error& e) {
        err << "bsdiag: " << e.what() << "\n";
        return kInvalidInput;
    }
}

}  // namespace bsdiag::app
