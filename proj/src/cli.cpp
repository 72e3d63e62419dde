#include "irtp/cli.hpp"

#include "irtp/errors.hpp"
#include "irtp/estimation.hpp"
#include "irtp/io.hpp"
#include "irtp/quadrature.hpp"
#include "irtp/reliability.hpp"
#include "irtp/scoring.hpp"
#include "irtp/simulation.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

namespace irtp::cli {

namespace {

using io::json;

// Signals a numerical problem found after outputs were written.
struct NonConvergence : NumericalError {
    using NumericalError::NumericalError;
};

void require_input(const std::filesystem::path& p, const char* flag) {
    if (p.empty()) throw InputError(std::string(flag) + " is required");
    if (!std::filesystem::is_regular_file(p))
        throw InputError(std::string(flag) + ": no such file " + p.string());
}

void check_output(const std::filesystem::path& p) {
    if (p.empty()) return;
    const auto parent = p.parent_path();
    if (!parent.empty() && !std::filesystem::is_directory(parent))
        throw InputError("output directory does not exist: " + parent.string());
}

void emit(const RunConfig& cfg, const std::string& text, std::ostream& out) {
    if (cfg.out.empty())
        out << text;
    else
        io::write_text_file(cfg.out, text);
}

std::vector<Coefficient> kinds_of(const std::string& kind) {
    if (kind == "both") return {Coefficient::kPrmse, Coefficient::kCtt};
    return {parse_coefficient(kind)};
}

int resolve_threads(int flag) {
    if (flag > 0) return flag;
    if (const char* env = std::getenv(kThreadsEnv); env != nullptr && *env != '\0') {
        try {
            const int t = std::stoi(env);
            if (t >= 1) return t;
        } catch (const std::exception&) {
        }
        throw ConfigError(std::string(kThreadsEnv) + " must be a positive integer");
    }
    return 1;
}

void validate(const RunConfig& cfg) {
    if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw ConfigError("--alpha must lie in (0, 1)");
    check_output(cfg.out);
    check_output(cfg.csv);
    const std::string& sub = cfg.subcommand;
    if (sub == "fit") {
        require_input(cfg.data, "--data");
    } else if (sub == "score") {
        require_input(cfg.fit, "--fit");
        require_input(cfg.data, "--data");
    } else if (sub == "reliability") {
        require_input(cfg.fit, "--fit");
        require_input(cfg.data, "--data");
    } else if (sub == "oracle") {
        require_input(cfg.params, "--params");
    } else if (sub == "simulate") {
        require_input(cfg.design, "--design");
    }
    if (sub == "fit" && cfg.model != "grm" && cfg.model != "2pl")
        throw ConfigError("--model must be grm or 2pl");
    if (sub == "fit") parse_info_estimator(cfg.info);
    if ((sub == "reliability" || sub == "oracle") && cfg.kind != "both") parse_coefficient(cfg.kind);
    if (sub == "oracle" && cfg.mode != "enumerate" && cfg.mode != "mc")
        throw ConfigError("--mode must be enumerate or mc");
}

QuadratureGrid grid_of(const io::GridSpec& g) { return build_grid(g.points, g.lo, g.hi); }

void log_line(const RunConfig& cfg, std::ostream& err, const std::string& msg) {
    if (cfg.verbose) err << "[irtp] " << msg << '\n';
}

int run_fit(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    const ResponseMatrix data = io::read_responses_csv(cfg.data);
    std::vector<int> cats = data.observed_categories();
    if (cfg.model == "2pl") {
        data.validate(ItemParams(std::vector<Item>(data.cols(), Item{1.0, {0.0}})));
        std::fill(cats.begin(), cats.end(), 2);
    } else {
        for (int& k : cats) k = std::max(k, 2);
    }
    const io::GridSpec spec{cfg.quad_points, cfg.quad_lo, cfg.quad_hi};
    const QuadratureGrid grid = grid_of(spec);
    const ItemParams init = default_start(data, cats);
    log_line(cfg, err, "fitting " + std::to_string(data.cols()) + " items, n = " +
                           std::to_string(data.rows()));
    io::StoredFit stored;
    stored.model = cfg.model;
    stored.grid = spec;
    stored.item_names = data.item_names();
    stored.info_estimator = parse_info_estimator(cfg.info);
    FitOptions options;
    options.info = stored.info_estimator;
    stored.fit = fit_em(data, init, grid, options);
    emit(cfg, io::fit_to_json(stored).dump(2) + "\n", out);
    if (!stored.fit.converged)
        throw NonConvergence("EM did not converge in " + std::to_string(stored.fit.iterations) +
                             " iterations");
    log_line(cfg, err, "converged in " + std::to_string(stored.fit.iterations) + " iterations");
    return kExitOk;
}

int run_score(const RunConfig& cfg, std::ostream& out) {
    const io::StoredFit stored = io::fit_from_json(io::read_json_file(cfg.fit));
    const ResponseMatrix data = io::read_responses_csv(cfg.data);
    data.validate(stored.fit.params);
    const auto scores = score_responses(data, stored.fit.params, grid_of(stored.grid));
    std::ostringstream os;
    io::write_scores_csv(scores, os);
    emit(cfg, os.str(), out);
    return kExitOk;
}

int run_reliability(const RunConfig& cfg, std::ostream& out) {
    const io::StoredFit stored = io::fit_from_json(io::read_json_file(cfg.fit));
    const ResponseMatrix data = io::read_responses_csv(cfg.data);
    data.validate(stored.fit.params);
    const QuadratureGrid grid = grid_of(stored.grid);
    std::vector<ReliabilityReport> reports;
    for (Coefficient k : kinds_of(cfg.kind))
        reports.push_back(reliability_with_se(data, stored.fit, grid, k, cfg.alpha));
    emit(cfg, io::reports_to_json(reports).dump(2) + "\n", out);
    return kExitOk;
}

int run_oracle(const RunConfig& cfg, std::ostream& out) {
    const ItemParams params = io::params_from_json(io::read_json_file(cfg.params));
    const QuadratureGrid grid = build_grid(cfg.quad_points, cfg.quad_lo, cfg.quad_hi);
    OracleOptions opt;
    opt.mode = cfg.mode == "mc" ? OracleMode::kMonteCarlo : OracleMode::kEnumerate;
    opt.mc_draws = cfg.draws;
    opt.seed = cfg.seed;
    json j;
    j["schema_version"] = io::kSchemaVersion;
    j["mode"] = cfg.mode == "mc" ? "monte_carlo" : "enumerate";
    if (opt.mode == OracleMode::kMonteCarlo) {
        j["draws"] = opt.mc_draws;
        j["seed"] = opt.seed;
    }
    j["m"] = params.size();
    j["Q"] = grid.size();
    j["values"] = json::array();
    for (Coefficient k : kinds_of(cfg.kind))
        j["values"].push_back({{"kind", to_string(k)}, {"value", population_oracle(params, grid, k, opt)}});
    emit(cfg, j.dump(2) + "\n", out);
    return kExitOk;
}

int run_simulate(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    SimDesign design = io::design_from_json(io::read_json_file(cfg.design));
    design.threads = resolve_threads(cfg.threads);
    log_line(cfg, err, "running " + std::to_string(design.conditions.size()) + " conditions x " +
                           std::to_string(design.replications) + " replications");
    const SimSummary summary = run_study(design);
    emit(cfg, io::summary_to_json(summary).dump(2) + "\n", out);
    if (!cfg.csv.empty()) {
        std::ostringstream os;
        io::write_summary_csv(summary, os);
        io::write_text_file(cfg.csv, os.str());
    }
    return kExitOk;
}

void report_error(std::ostream& err, const char* type, const std::string& message, int code,
                  json extra = json::object()) {
    json j = {{"error", type}, {"message", message}, {"exit_code", code}};
    for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
    err << j.dump() << '\n';
}

}  // namespace

int parse_and_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    RunConfig cfg;
    CLI::App app{"Reliability coefficients with standard errors for graded response models",
                 "irtp"};
    app.require_subcommand(1);

    auto add_quad = [&cfg](CLI::App* sub) {
        sub->add_option("--quad-points", cfg.quad_points, "Quadrature points")->capture_default_str();
        sub->add_option("--quad-lo", cfg.quad_lo, "Lowest node")->capture_default_str();
        sub->add_option("--quad-hi", cfg.quad_hi, "Highest node")->capture_default_str();
    };
    auto add_common = [&cfg](CLI::App* sub) {
        sub->add_option("--out", cfg.out, "Output file (default: standard output)");
        sub->add_flag("-v,--verbose", cfg.verbose, "Progress messages on standard error");
    };

    CLI::App* fit = app.add_subcommand("fit", "Fit a GRM or 2PL by marginal maximum likelihood");
    fit->add_option("--data", cfg.data, "Response CSV")->required();
    fit->add_option("--model", cfg.model, "grm or 2pl")->capture_default_str();
    fit->add_option("--info", cfg.info, "Information estimator: xpd or louis")->capture_default_str();
    add_quad(fit);
    add_common(fit);

    CLI::App* score = app.add_subcommand("score", "EAP scores and posterior variances");
    score->add_option("--fit", cfg.fit, "fit.json from the fit subcommand")->required();
    score->add_option("--data", cfg.data, "Response CSV")->required();
    add_common(score);

    CLI::App* rel = app.add_subcommand("reliability", "PRMSE and CTT reliability with SEs");
    rel->add_option("--fit", cfg.fit, "fit.json from the fit subcommand")->required();
    rel->add_option("--data", cfg.data, "Response CSV used for the fit")->required();
    rel->add_option("--kind", cfg.kind, "prmse, ctt or both")->capture_default_str();
    rel->add_option("--alpha", cfg.alpha, "1 - confidence level")->capture_default_str();
    add_common(rel);

    CLI::App* oracle = app.add_subcommand("oracle", "Population coefficients at known parameters");
    oracle->add_option("--params", cfg.params, "Item parameter JSON")->required();
    oracle->add_option("--kind", cfg.kind, "prmse, ctt or both")->capture_default_str();
    oracle->add_option("--mode", cfg.mode, "enumerate or mc")->capture_default_str();
    oracle->add_option("--draws", cfg.draws, "Monte Carlo respondents")->capture_default_str();
    oracle->add_option("--seed", cfg.seed, "Monte Carlo seed")->capture_default_str();
    add_quad(oracle);
    add_common(oracle);

    CLI::App* sim = app.add_subcommand("simulate", "Monte Carlo coverage study");
    sim->add_option("--design", cfg.design, "Design JSON")->required();
    sim->add_option("--csv", cfg.csv, "Also write a summary CSV");
    sim->add_option("--threads", cfg.threads,
                    std::string("Worker threads (default: $") + kThreadsEnv + " or 1)");
    add_common(sim);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << e.what() << "\n\n" << app.help();
        return kExitInput;
    }
    for (const char* name : {"fit", "score", "reliability", "oracle", "simulate"})
        if (app.got_subcommand(name)) cfg.subcommand = name;

    try {
        validate(cfg);
        if (cfg.subcommand == "fit") return run_fit(cfg, out, err);
        if (cfg.subcommand == "score") return run_score(cfg, out);
        if (cfg.subcommand == "reliability") return run_reliability(cfg, out);
        if (cfg.subcommand == "oracle") return run_oracle(cfg, out);
        return run_simulate(cfg, out, err);
    } catch (const InversionError& e) {
        report_error(err, "singular_information", e.what(), kExitNumerical,
                     {{"smallest_eigenvalue", e.smallest_eigenvalue()}});
        return kExitNumerical;
    } catch (const NonConvergence& e) {
        report_error(err, "non_convergence", e.what(), kExitNumerical);
        return kExitNumerical;
    } catch (const EstimationError& e) {
        json extra = json::object();
        if (e.item() >= 0) extra["item"] = e.item() + 1;
        report_error(err, "estimation", e.what(), kExitNumerical, extra);
        return kExitNumerical;
    } catch (const NumericalError& e) {
        report_error(err, "numerical", e.what(), kExitNumerical);
        return kExitNumerical;
    } catch (const InputError& e) {
        report_error(err, "input", e.what(), kExitInput);
        return kExitInput;
    }
}

}  // namespace irtp::cli
