#pragma once

// Command-line front end. run_cli is callable in-process; tools/qsslab.cpp
// wraps it as the `qsslab` executable.
//
// Exit codes: 0 success or claim pass, 1 claim fail, 2 usage error,
// 3 numerical failure.

#include <charconv>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <CLI11.hpp>

#include "qss/analysis.hpp"
#include "qss/catalog.hpp"
#include "qss/claims.hpp"
#include "qss/dsl.hpp"
#include "qss/error.hpp"
#include "qss/integrate.hpp"
#include "qss/io.hpp"
#include "qss/model.hpp"
#include "qss/svg.hpp"

namespace qss::cli {

enum ExitCode : int { kSuccess = 0, kClaimFailed = 1, kUsage = 2, kNumerical = 3 };

/// A model named on the command line with its resolved parameters.
struct ResolvedModel {
    ModelSystem model;
    std::optional<ModelKind> kind;
    ParameterSet params;
    StateVector initial;
};

inline double parse_number(std::string_view text, std::string_view what) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v)) {
        throw UsageError(std::string(what) + ": '" + std::string(text) + "' is not a finite number");
    }
    return v;
}

inline std::pair<std::string, std::string> split_assignment(std::string_view text) {
    const auto eq = text.find('=');
    if (eq == std::string_view::npos || eq == 0) {
        throw UsageError("expected name=value, got '" + std::string(text) + "'");
    }
    return {std::string(text.substr(0, eq)), std::string(text.substr(eq + 1))};
}

inline ParameterSet parse_assignments(const std::vector<std::string>& items) {
    ParameterSet::Map m;
    for (const auto& item : items) {
        auto [name, value] = split_assignment(item);
        m[name] = parse_number(value, name);
    }
    return ParameterSet(std::move(m));
}

inline std::vector<double> parse_list(std::string_view text, std::string_view what) {
    std::vector<double> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = text.find(',', start);
        out.push_back(parse_number(text.substr(start, comma == std::string_view::npos ? text.npos : comma - start), what));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Writes to `path`, or to `out` when path is "-".
inline void write_output(const std::string& path, const std::string& content, std::ostream& out) {
    if (path == "-") {
        out << content;
        return;
    }
    std::ofstream file(path, std::ios::binary);
    if (!file) throw UsageError("cannot write '" + path + "'");
    file << content;
    if (!file) throw UsageError("failed writing '" + path + "'");
}

inline bool looks_like_file(const std::string& spec) {
    return spec.size() > 5 && spec.compare(spec.size() - 5, 5, ".qssm") == 0;
}

inline std::string unknown_model_message(const std::string& spec) {
    std::string msg = "unknown model '" + spec + "'; available models:";
    for (const auto& name : catalog_names()) msg += " " + name;
    return msg + " (or a path to a .qssm file)";
}

inline StateVector apply_init(const ModelSystem& model, StateVector initial, const ParameterSet& overrides) {
    std::vector<double> values = initial.values();
    for (const auto& [name, value] : overrides.entries()) {
        auto idx = model.state_index(name);
        if (!idx) throw UsageError("model '" + model.name() + "' has no state '" + name + "'");
        values[*idx] = value;
    }
    return model.make_state(std::move(values));
}

/// Catalog name or .qssm path, with user parameters merged over the defaults.
/// Catalog single-population models start at T = 1 (other states 0),
/// mechanisms at their latent state, DSL models at their declared values.
inline ResolvedModel resolve_model(const std::string& spec, const ParameterSet& user, const ParameterSet& init) {
    if (looks_like_file(spec)) {
        const auto def = dsl::parse_model(read_file(spec));
        ModelSystem model = dsl::compile_model(def);
        for (const auto& [name, value] : user.entries()) {
            if (!model.find_param(name)) throw UsageError("model '" + model.name() + "' has no parameter '" + name + "'");
        }
        ParameterSet params = dsl::default_parameters(def).merged(user);
        (void)bind_parameters(model, params);
        StateVector initial = apply_init(model, dsl::initial_state(def), init);
        return {std::move(model), std::nullopt, std::move(params), std::move(initial)};
    }
    auto kind = parse_kind(spec);
    if (!kind) throw UsageError(unknown_model_message(spec));
    ParameterSet defaults = default_params(*kind);
    if (user.contains("b") || user.contains("delta_T")) defaults = defaults.without("y");
    ParameterSet params = defaults.merged(user);
    if (std::holds_alternative<PaperModelKind>(*kind)) params = canonical_params(params);
    ModelSystem model = make_model(*kind, params);
    StateVector initial;
    if (auto mech = std::get_if<MechanismModelKind>(&*kind)) {
        initial = latent_state(*mech, params);
    } else {
        std::vector<double> values(model.dimension(), 0.0);
        values[0] = 1.0;
        initial = model.make_state(std::move(values));
    }
    initial = apply_init(model, std::move(initial), init);
    return {std::move(model), kind, std::move(params), std::move(initial)};
}

inline std::vector<PlotSeries> trajectory_series(const Trajectory& traj) {
    std::vector<PlotSeries> out;
    for (const auto& name : traj.names()) out.push_back({name, traj.times(), traj.component(name)});
    return out;
}

inline std::string catalog_text() {
    std::ostringstream os;
    auto describe_model = [&](const ModelKind& kind) {
        const ParameterSet defaults = default_params(kind);
        const ModelSystem model = make_model(kind, defaults);
        os << kind_name(kind) << "\n";
        os << "  equation: " << model.reference() << "\n";
        os << "  states:";
        for (const auto& s : model.state_names()) os << " " << s;
        os << "\n  parameters:\n";
        for (const auto& p : model.param_schema()) {
            os << "    " << p.name;
            if (p.symbol != p.name) os << " (" << p.symbol << ")";
            os << ", " << describe(p.constraint);
            if (auto v = defaults.find(p.name)) os << ", default " << format_double(*v);
            os << "\n";
        }
    };
    for (auto k : kPaperModelKinds) describe_model(k);
    for (auto k : kMechanismModelKinds) describe_model(k);
    return os.str();
}

inline int run_simulate(const std::string& model_spec, const std::vector<std::string>& params,
                        const std::vector<std::string>& inits, std::optional<double> t_end, std::optional<double> dt,
                        std::optional<double> rtol, std::optional<double> atol, const std::string& out_path,
                        const std::string& plot_path, std::ostream& out) {
    if (dt && (rtol || atol)) throw UsageError("--dt selects fixed-step RK4 and cannot be combined with --rtol/--atol");
    const auto resolved = resolve_model(model_spec, parse_assignments(params), parse_assignments(inits));
    if (!t_end) throw UsageError("simulate requires --t-end");
    if (out_path.empty()) throw UsageError("simulate requires --out");
    const Trajectory traj = dt ? integrate_fixed(resolved.model, resolved.params, resolved.initial, 0.0, *t_end, *dt)
                               : integrate_adaptive(resolved.model, resolved.params, resolved.initial, 0.0, *t_end,
                                                    rtol.value_or(1e-8), atol.value_or(1e-10));
    std::ostringstream csv;
    write_trajectory_csv(csv, traj);
    write_output(out_path, csv.str(), out);
    if (!plot_path.empty()) {
        PlotOptions options;
        options.title = resolved.model.name();
        options.y_label = "concentration";
        write_output(plot_path, render_plot(trajectory_series(traj), options), out);
    }
    return kSuccess;
}

inline int run_steady(const std::string& model_spec, const std::vector<std::string>& params,
                      const std::vector<std::string>& guesses, const std::vector<std::string>& inits,
                      std::optional<double> epsilon, const std::string& out_path, std::ostream& out) {
    const auto resolved = resolve_model(model_spec, parse_assignments(params), parse_assignments(inits));
    const StateVector guess = apply_init(resolved.model, resolved.initial, parse_assignments(guesses));
    SteadyStateReport report = find_steady_state(resolved.model, resolved.params, guess);
    if (epsilon) report.time_to_epsilon = time_to_epsilon(resolved.model, resolved.params, resolved.initial, *epsilon);
    Json doc;
    doc["schema"] = kJsonSchemaVersion;
    doc["model"] = resolved.model.name();
    doc["params"] = to_json(resolved.params);
    const Json body = to_json(report);
    for (const auto& [k, v] : body.items()) doc[k] = v;
    write_output(out_path, doc.dump(2) + "\n", out);
    return kSuccess;
}

inline int run_classify(const std::string& traj_path, const std::string& component, const std::string& window_text,
                        const std::string& out_path, std::ostream& out) {
    std::ifstream in(traj_path, std::ios::binary);
    if (!in) throw UsageError("cannot read '" + traj_path + "'");
    const Trajectory traj = read_trajectory_csv(in);
    std::optional<std::pair<double, double>> window;
    if (!window_text.empty()) {
        const auto w = parse_list(window_text, "--window");
        if (w.size() != 2) throw UsageError("--window takes start,end");
        window = std::make_pair(w[0], w[1]);
    }
    const auto verdict = classify_curvature(traj, component, window);
    Json doc;
    doc["schema"] = kJsonSchemaVersion;
    doc["component"] = component;
    const Json body = to_json(verdict);
    for (const auto& [k, v] : body.items()) doc[k] = v;
    write_output(out_path, doc.dump(2) + "\n", out);
    return kSuccess;
}

inline int run_sweep(const std::string& model_spec, const std::vector<std::string>& params,
                     const std::vector<std::string>& inits, const std::string& sweep_text,
                     const std::vector<std::string>& metric_names, double epsilon, unsigned threads,
                     const std::string& out_path, std::ostream& out) {
    auto [parameter, values] = split_assignment(sweep_text);
    auto resolved = resolve_model(model_spec, parse_assignments(params), parse_assignments(inits));
    std::optional<PaperModelKind> kind;
    if (resolved.kind) {
        if (auto paper = std::get_if<PaperModelKind>(&*resolved.kind)) kind = *paper;
    }
    SweepSpec spec{std::move(resolved.model), kind, resolved.params, parameter, parse_list(values, "--sweep"),
                   resolved.initial, {}, epsilon, threads};
    for (const auto& name : metric_names) {
        auto m = parse_metric(name);
        if (!m) throw UsageError("unknown metric '" + name + "' (known: T*, t_eps, curvature, rate, T*_approx, approx_gap)");
        spec.metrics.push_back(*m);
    }
    const auto rows = sweep(spec);
    std::ostringstream csv;
    write_sweep_csv(csv, parameter, spec.metrics, rows);
    write_output(out_path, csv.str(), out);
    return kSuccess;
}

inline int run_check(const std::string& claim_id, const std::vector<std::string>& overrides,
                     const std::string& grid_text, unsigned threads, const std::string& json_path,
                     const std::string& plot_path, std::ostream& out) {
    ClaimConfig config;
    config.threads = threads;
    for (const auto& item : overrides) {
        auto [key, value] = split_assignment(item);
        const auto dot = key.rfind('.');
        if (dot == std::string::npos || dot == 0 || dot + 1 == key.size()) {
            throw UsageError("claim overrides are written model.parameter=value, got '" + item + "'");
        }
        const std::string kind = key.substr(0, dot), name = key.substr(dot + 1);
        config.overrides[kind] = config.overrides[kind].with(name, parse_number(value, key));
    }
    if (!grid_text.empty()) config.grid = parse_list(grid_text, "--grid");
    if (!plot_path.empty() && claim_id != "aids-curve-needs-feedback" && claim_id != "mechanism-satisfies-conditions") {
        throw UsageError("--plot is available for the mechanism claims only");
    }

    const ClaimReport report = run_claim(claim_id, config);
    if (!json_path.empty()) write_output(json_path, to_json(report).dump(2) + "\n", out);
    if (json_path != "-") {
        out << report.claim_id << ": " << to_string(report.verdict) << " (" << report.passed_points() << "/"
            << report.grid.size() << " points)\n"
            << report.narrative << "\n";
    }
    if (!plot_path.empty()) {
        std::vector<PlotSeries> series;
        PlotOptions options;
        options.title = "T under slow positive feedback (shaded: collapse window)";
        for (const auto& curve : mechanism_curves(config)) {
            options.bands.push_back({curve.window_start, curve.window_end, series.size()});
            series.push_back({curve.label, curve.times, curve.values});
        }
        write_output(plot_path, render_plot(series, options), out);
    }
    return report.verdict == Verdict::pass ? kSuccess : kClaimFailed;
}

/// Parses argv and runs one subcommand. Data goes to files or `out`;
/// diagnostics go to `err`.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"qsslab: T-cell population models, steady states, curve shapes and claim checks"};
    app.name(argc > 0 ? argv[0] : "qsslab");
    app.require_subcommand(1);

    std::string model, out_path, plot_path, traj_path, component = "T", window_text, sweep_text, claim_id, json_path,
                                                   grid_text;
    std::vector<std::string> params, inits, guesses, metrics, overrides;
    double t_end = 0.0, dt = 0.0, rtol = 0.0, atol = 0.0, epsilon = 0.01;
    unsigned threads = 1;

    auto* simulate = app.add_subcommand("simulate", "integrate a model and write the trajectory as CSV");
    simulate->add_option("--model", model, "catalog name or .qssm file")->required();
    simulate->add_option("--param", params, "parameter k=v (repeatable)");
    simulate->add_option("--init", inits, "initial value k=v (repeatable)");
    auto* t_end_opt = simulate->add_option("--t-end", t_end, "end time (required)");
    auto* dt_opt = simulate->add_option("--dt", dt, "fixed RK4 step");
    auto* rtol_opt = simulate->add_option("--rtol", rtol, "relative tolerance (adaptive, default 1e-8)");
    auto* atol_opt = simulate->add_option("--atol", atol, "absolute tolerance (adaptive, default 1e-10)");
    simulate->add_option("--out", out_path, "CSV path, or - for stdout (required)");
    simulate->add_option("--plot", plot_path, "SVG path");

    auto* steady = app.add_subcommand("steady", "find a steady state and write a JSON report");
    steady->add_option("--model", model, "catalog name or .qssm file")->required();
    steady->add_option("--param", params, "parameter k=v (repeatable)");
    steady->add_option("--guess", guesses, "Newton starting value k=v (repeatable)");
    steady->add_option("--init", inits, "initial value k=v for --epsilon (repeatable)");
    auto* eps_opt = steady->add_option("--epsilon", epsilon, "also report time to reach this fraction");
    steady->add_option("--out", out_path, "JSON path, or - for stdout")->required();

    auto* classify = app.add_subcommand("classify", "classify the curvature of a CSV trajectory");
    classify->add_option("--traj", traj_path, "trajectory CSV")->required();
    classify->add_option("--component", component, "state column (default T)");
    classify->add_option("--window", window_text, "start,end time window");
    classify->add_option("--out", out_path, "JSON path, or - for stdout")->required();

    auto* sweep_cmd = app.add_subcommand("sweep", "evaluate metrics over a parameter grid");
    sweep_cmd->add_option("--model", model, "catalog name or .qssm file")->required();
    sweep_cmd->add_option("--param", params, "parameter k=v (repeatable)");
    sweep_cmd->add_option("--init", inits, "initial value k=v (repeatable)");
    sweep_cmd->add_option("--sweep", sweep_text, "parameter=v1,v2,...")->required();
    sweep_cmd->add_option("--metrics", metrics, "T*, t_eps, curvature, rate, T*_approx, approx_gap")
        ->delimiter(',')
        ->required();
    sweep_cmd->add_option("--epsilon", epsilon, "fraction for t_eps (default 0.01)");
    sweep_cmd->add_option("--threads", threads, "worker threads (default 1)");
    sweep_cmd->add_option("--out", out_path, "CSV path, or - for stdout")->required();

    auto* check = app.add_subcommand("check", "run a registered claim; exit 0 on pass, 1 on fail");
    check->add_option("claim", claim_id, "claim id")->required();
    check->add_option("--param", overrides, "override model.parameter=value (repeatable)");
    check->add_option("--grid", grid_text, "replacement grid v1,v2,...");
    check->add_option("--threads", threads, "worker threads (default 1)");
    check->add_option("--json", json_path, "JSON report path, or - for stdout");
    check->add_option("--plot", plot_path, "SVG of the mechanism trajectories");

    auto* catalog = app.add_subcommand("catalog", "list built-in models, parameters and defaults");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kSuccess;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return kSuccess;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        if (!app.get_subcommands().empty()) {
            err << app.get_subcommands().front()->help();
        } else {
            err << app.help();
        }
        return kUsage;
    }

    try {
        if (*simulate) {
            return run_simulate(model, params, inits, t_end_opt->count() ? std::optional(t_end) : std::nullopt,
                                dt_opt->count() ? std::optional(dt) : std::nullopt,
                                rtol_opt->count() ? std::optional(rtol) : std::nullopt,
                                atol_opt->count() ? std::optional(atol) : std::nullopt, out_path, plot_path, out);
        }
        if (*steady) {
            return run_steady(model, params, guesses, inits, eps_opt->count() ? std::optional(epsilon) : std::nullopt,
                              out_path, out);
        }
        if (*classify) return run_classify(traj_path, component, window_text, out_path, out);
        if (*sweep_cmd) return run_sweep(model, params, inits, sweep_text, metrics, epsilon, threads, out_path, out);
        if (*check) return run_check(claim_id, overrides, grid_text, threads, json_path, plot_path, out);
        if (*catalog) {
            out << catalog_text();
            return kSuccess;
        }
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << "\n";
        return kNumerical;
    } catch (const dsl::EvaluationError& e) {
        err << "numerical failure: " << e.what() << "\n";
        return kNumerical;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    }
    err << "error: no subcommand\n";
    return kUsage;
}

inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    std::vector<const char*> argv{"qsslab"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace qss::cli
