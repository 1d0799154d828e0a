#pragma once

// Machine-checkable experiments over parameter grids, each producing an
// evidence report with a pass/fail verdict, plus the generic sweep harness.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "qss/analysis.hpp"
#include "qss/catalog.hpp"
#include "qss/closed_form.hpp"
#include "qss/error.hpp"
#include "qss/integrate.hpp"
#include "qss/model.hpp"

namespace qss {

/// Runs fn(0..n-1) on up to `threads` workers; results come back in index order.
template <class T>
std::vector<T> parallel_map(std::size_t n, unsigned threads, const std::function<T(std::size_t)>& fn) {
    std::vector<std::optional<T>> slots(n);
    std::vector<std::exception_ptr> errors(n);
    auto work = [&](std::size_t worker, std::size_t stride) {
        for (std::size_t i = worker; i < n; i += stride) {
            try {
                slots[i].emplace(fn(i));
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(threads, n));
    if (workers == 1) {
        work(0, 1);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w, workers);
        for (auto& t : pool) t.join();
    }
    std::vector<T> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (errors[i]) std::rethrow_exception(errors[i]);
        out.push_back(std::move(*slots[i]));
    }
    return out;
}

/// True when b is below a by more than `rel` relative to the larger magnitude.
inline bool strictly_below(double a, double b, double rel = 1e-9) {
    return a - b > rel * std::max(std::abs(a), std::abs(b));
}

inline void require_grid(const std::vector<double>& grid) {
    if (grid.size() < 2) throw UsageError("a sweep grid needs at least two values");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!std::isfinite(grid[i])) throw UsageError("sweep grid values must be finite");
        if (i > 0 && !(grid[i] > grid[i - 1])) throw UsageError("sweep grid values must be strictly increasing");
    }
}

// ---------------------------------------------------------------- sweeps

enum class Metric { steady_state, time_to_epsilon, curvature, relaxation_rate, approx_steady, approx_gap };

inline const char* to_string(Metric m) {
    switch (m) {
        case Metric::steady_state: return "T*";
        case Metric::time_to_epsilon: return "t_eps";
        case Metric::curvature: return "curvature";
        case Metric::relaxation_rate: return "rate";
        case Metric::approx_steady: return "T*_approx";
        case Metric::approx_gap: return "approx_gap";
    }
    return "?";
}

inline std::optional<Metric> parse_metric(std::string_view name) {
    for (Metric m : {Metric::steady_state, Metric::time_to_epsilon, Metric::curvature, Metric::relaxation_rate,
                     Metric::approx_steady, Metric::approx_gap}) {
        if (name == to_string(m)) return m;
    }
    return std::nullopt;
}

struct SweepSpec {
    ModelSystem model;
    std::optional<PaperModelKind> kind;  ///< enables the closed-form approximation metrics
    ParameterSet base;
    std::string parameter;
    std::vector<double> grid;
    StateVector initial;
    std::vector<Metric> metrics;
    double epsilon = 0.01;
    unsigned threads = 1;
};

struct SweepRow {
    double value = 0.0;
    std::map<std::string, double, std::less<>> numbers;
    std::string curvature;
    std::string error;
};

namespace detail {

/// Trajectory from state0 over [0, 5/rate] with enough stored points for the classifier.
inline Trajectory relaxation_trajectory(const ModelSystem& model, const ParameterSet& params, const StateVector& state0,
                                        double rate) {
    const double horizon = 5.0 / rate;
    AdaptiveOptions options;
    options.max_step = horizon / 400.0;
    return integrate_adaptive(model, params, state0, 0.0, horizon, 1e-10, 1e-12, options);
}

inline double steady_component(const SteadyStateReport& r) {
    if (auto i = r.values.index_of("T")) return r.values[*i];
    return r.values[0];
}

}  // namespace detail

/// One row per grid value, in grid order. A failing row records its error
/// and the sweep continues.
inline std::vector<SweepRow> sweep(const SweepSpec& spec) {
    require_grid(spec.grid);
    if (spec.metrics.empty()) throw UsageError("sweep needs at least one metric");
    if (!spec.model.find_param(spec.parameter)) {
        throw UsageError("model '" + spec.model.name() + "' has no parameter '" + spec.parameter + "'");
    }
    if (!(spec.epsilon > 0.0 && spec.epsilon < 1.0)) throw UsageError("epsilon must lie in (0, 1)");
    check_state_shape(spec.model, spec.initial);
    const bool wants_approx = std::any_of(spec.metrics.begin(), spec.metrics.end(), [](Metric m) {
        return m == Metric::approx_steady || m == Metric::approx_gap;
    });
    if (wants_approx && spec.kind != PaperModelKind::power_destruction) {
        throw UsageError("T*_approx and approx_gap apply to power-destruction only");
    }

    return parallel_map<SweepRow>(spec.grid.size(), spec.threads, [&](std::size_t i) {
        SweepRow row;
        row.value = spec.grid[i];
        try {
            const ParameterSet params = spec.base.with(spec.parameter, row.value);
            std::optional<SteadyStateReport> steady;
            auto need_steady = [&]() -> const SteadyStateReport& {
                if (!steady) steady = detail::attracting_steady_state(spec.model, params, spec.initial);
                return *steady;
            };
            for (Metric m : spec.metrics) {
                switch (m) {
                    case Metric::steady_state: row.numbers["T*"] = detail::steady_component(need_steady()); break;
                    case Metric::relaxation_rate: row.numbers["rate"] = need_steady().relaxation_rate; break;
                    case Metric::time_to_epsilon:
                        row.numbers["t_eps"] = time_to_epsilon(spec.model, params, spec.initial, spec.epsilon);
                        break;
                    case Metric::curvature: {
                        const auto traj = detail::relaxation_trajectory(spec.model, params, spec.initial,
                                                                        need_steady().relaxation_rate);
                        row.curvature = to_string(classify_curvature(traj, traj.names().front()).cls);
                        break;
                    }
                    case Metric::approx_steady:
                    case Metric::approx_gap: {
                        const double approx = power_approx_steady(params.at("a"), params.at("y"),
                                                                  params.at("gamma"), params.at("n"));
                        if (m == Metric::approx_steady) {
                            row.numbers["T*_approx"] = approx;
                        } else {
                            row.numbers["approx_gap"] = approx - detail::steady_component(need_steady());
                        }
                        break;
                    }
                }
            }
        } catch (const Error& e) {
            row.error = e.what();
        }
        return row;
    });
}

// ---------------------------------------------------------------- claims

enum class Verdict { pass, fail };

inline const char* to_string(Verdict v) { return v == Verdict::pass ? "pass" : "fail"; }

struct GridPoint {
    std::string label;
    std::string model;
    ParameterSet params;
    std::vector<std::pair<std::string, double>> metrics;
    std::vector<std::pair<std::string, std::string>> labels;
    bool passed = false;
    std::string error;  ///< set when the point could not be evaluated
    std::string note;   ///< the predicate outcome in words

    std::optional<double> metric(std::string_view name) const {
        for (const auto& [k, v] : metrics) {
            if (k == name) return v;
        }
        return std::nullopt;
    }

    std::optional<std::string> tag(std::string_view name) const {
        for (const auto& [k, v] : labels) {
            if (k == name) return v;
        }
        return std::nullopt;
    }
};

struct ClaimReport {
    std::string claim_id;
    Verdict verdict = Verdict::fail;
    std::vector<GridPoint> grid;
    std::string narrative;
    std::vector<std::pair<std::string, std::string>> settings;

    std::size_t passed_points() const {
        return static_cast<std::size_t>(std::count_if(grid.begin(), grid.end(), [](const GridPoint& p) { return p.passed; }));
    }
};

/// Per-run adjustments. `overrides` is keyed by model kind name and merged
/// over the protocol's parameters for that kind; `grid` replaces the
/// protocol's swept values.
struct ClaimConfig {
    std::map<std::string, ParameterSet, std::less<>> overrides;
    std::optional<std::vector<double>> grid;
    unsigned threads = 1;
};

struct ClaimInfo {
    std::string id;
    std::string summary;
    std::string grid_meaning;  ///< empty if the claim has no grid
};

namespace detail {

inline std::string num(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

inline ParameterSet apply_overrides(const ClaimConfig& config, std::string_view kind, const ParameterSet& params) {
    auto it = config.overrides.find(kind);
    return it == config.overrides.end() ? params : params.merged(it->second);
}

inline void finish(ClaimReport& report) {
    if (report.grid.empty()) throw UsageError("claim '" + report.claim_id + "' evaluated no grid points");
    report.verdict = std::all_of(report.grid.begin(), report.grid.end(), [](const GridPoint& p) { return p.passed; })
                         ? Verdict::pass
                         : Verdict::fail;
}

inline std::vector<double> grid_or(const ClaimConfig& config, std::vector<double> fallback) {
    if (!config.grid) return fallback;
    require_grid(*config.grid);
    return *config.grid;
}

// A destruction-strength family: params(s) for each grid value s.
struct Family {
    std::string label;
    PaperModelKind kind;
    std::function<ParameterSet(double)> params;
};

inline std::vector<Family> destruction_families() {
    return {
        {"linear-destruction (gamma = s)", PaperModelKind::linear_destruction,
         [](double s) { return ParameterSet{{"a", 1.0}, {"y", 1.0}, {"gamma", s}}; }},
        {"power-destruction n=2 (gamma = s)", PaperModelKind::power_destruction,
         [](double s) { return ParameterSet{{"a", 1.0}, {"y", 1.0}, {"gamma", s}, {"n", 2.0}}; }},
        {"power-destruction n=3 (gamma = s)", PaperModelKind::power_destruction,
         [](double s) { return ParameterSet{{"a", 1.0}, {"y", 1.0}, {"gamma", s}, {"n", 3.0}}; }},
        {"logistic-source (gamma = 1 + s)", PaperModelKind::logistic_source,
         [](double s) { return ParameterSet{{"a", 1.0}, {"y", 0.0}, {"gamma", 1.0 + s}}; }},
        {"logistic-proliferation (gamma = 1 + s)", PaperModelKind::logistic_proliferation,
         [](double s) { return ParameterSet{{"a", 0.0}, {"y", 1.0}, {"gamma", 1.0 + s}}; }},
        {"logistic-proliferation lowered y (a = 1, y = -s)", PaperModelKind::logistic_proliferation,
         [](double s) { return ParameterSet{{"a", 1.0}, {"y", -s}, {"gamma", 1.0}}; }},
    };
}

inline const std::vector<double> kDestructionGrid = {0.0, 0.25, 0.5, 1.0, 2.0, 4.0};

inline StateVector start_above(const ModelSystem& model, const ParameterSet& params, double T0) {
    if (model.dimension() == 1) return model.make_state({T0});
    // Coupled agent: D starts at its quasi-steady value for T0.
    return model.make_state({T0, params.at("x") * T0 / params.at("delta_D")});
}

inline ClaimReport lowers_and_hastens(const ClaimConfig& config) {
    const auto grid = grid_or(config, kDestructionGrid);
    if (grid.front() < 0.0) throw UsageError("destruction strengths must be >= 0");
    const double epsilon = 0.01;
    ClaimReport report;
    report.claim_id = "destruction-lowers-and-hastens";
    report.settings = {{"epsilon", "0.01"},
                       {"T0", "2 T*(s = first grid value), per family"},
                       {"integrator", "dopri5 rtol=1e-10 atol=1e-12*max(1,|x0|), max_step=1/(40 rate)"},
                       {"strictness", "successive values differ by > 1e-9 relative"}};

    const auto families = destruction_families();
    struct Task {
        std::size_t family;
        double s;
    };
    std::vector<Task> tasks;
    for (std::size_t f = 0; f < families.size(); ++f) {
        for (double s : grid) tasks.push_back({f, s});
    }
    // T0 per family, from the steady state at the weakest destruction.
    std::vector<std::optional<double>> T0(families.size());
    for (std::size_t f = 0; f < families.size(); ++f) {
        try {
            const auto& fam = families[f];
            const ParameterSet p = apply_overrides(config, kind_name(fam.kind), fam.params(grid.front()));
            const ModelSystem model = make_paper_model(fam.kind, p);
            T0[f] = 2.0 * steady_component(attracting_steady_state(model, p, model.make_state({1.0})));
        } catch (const Error&) {
        }
    }

    auto points = parallel_map<GridPoint>(tasks.size(), config.threads, [&](std::size_t i) {
        const auto& fam = families[tasks[i].family];
        GridPoint pt;
        pt.label = fam.label + ", s = " + num(tasks[i].s);
        pt.model = kind_name(fam.kind);
        try {
            pt.params = apply_overrides(config, pt.model, fam.params(tasks[i].s));
            if (!T0[tasks[i].family]) throw DomainError("no steady state at the weakest destruction");
            const ModelSystem model = make_paper_model(fam.kind, pt.params);
            const StateVector x0 = model.make_state({*T0[tasks[i].family]});
            const auto steady = attracting_steady_state(model, pt.params, x0);
            pt.metrics.emplace_back("T0", x0[0]);
            pt.metrics.emplace_back("T*", steady_component(steady));
            pt.metrics.emplace_back("rate", steady.relaxation_rate);
            pt.metrics.emplace_back("t_eps", time_to_epsilon(model, pt.params, x0, epsilon));
        } catch (const Error& e) {
            pt.error = e.what();
        }
        return pt;
    });

    std::size_t steps = 0, decreasing = 0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        auto& pt = points[i];
        if (!pt.error.empty()) {
            pt.note = "evaluation failed";
            continue;
        }
        const bool first = i == 0 || tasks[i - 1].family != tasks[i].family;
        if (first) {
            pt.passed = true;
            pt.note = "reference point of the family";
            continue;
        }
        const auto& prev = points[i - 1];
        if (!prev.error.empty()) {
            pt.note = "previous point failed";
            continue;
        }
        ++steps;
        const bool lower = strictly_below(*prev.metric("T*"), *pt.metric("T*"));
        const bool faster = strictly_below(*prev.metric("t_eps"), *pt.metric("t_eps"));
        pt.passed = lower && faster;
        if (pt.passed) ++decreasing;
        pt.note = std::string(lower ? "T* lower" : "T* NOT lower") + ", " + (faster ? "t_eps shorter" : "t_eps NOT shorter") +
                  " than at the previous strength";
    }
    report.grid = std::move(points);
    finish(report);
    report.narrative = "Over " + std::to_string(families.size()) + " destruction families and " +
                       std::to_string(grid.size()) + " strengths each, stronger destruction gave a lower steady state " +
                       "and a shorter time to reach 1% of the initial distance in " + std::to_string(decreasing) + " of " +
                       std::to_string(steps) + " successive steps.";
    return report;
}

/// Destruction-only trajectories from above the steady state, with their verdicts.
inline std::vector<GridPoint> destruction_only_points(const ClaimConfig& config, const std::vector<double>& grid) {
    struct Task {
        std::string label;
        PaperModelKind kind;
        ParameterSet params;
        double multiple;
    };
    std::vector<Task> tasks;
    for (double s : grid) {
        if (s < 0.0) throw UsageError("destruction strengths must be >= 0");
        for (const auto& fam : destruction_families()) {
            const double multiple = fam.kind == PaperModelKind::power_destruction ? 4.0 : 2.0;
            tasks.push_back({fam.label + ", s = " + num(s), fam.kind, fam.params(s), multiple});
        }
        tasks.push_back({"coupled-agent (delta_D = 10, x = 10 s), s = " + num(s), PaperModelKind::coupled_agent,
                         ParameterSet{{"a", 1.0}, {"y", 1.0}, {"x", 10.0 * s}, {"delta_D", 10.0}}, 2.0});
    }
    return parallel_map<GridPoint>(tasks.size(), config.threads, [&](std::size_t i) {
        const auto& task = tasks[i];
        GridPoint pt;
        pt.label = task.label;
        pt.model = kind_name(task.kind);
        try {
            pt.params = apply_overrides(config, pt.model, task.params);
            const ModelSystem model = make_paper_model(task.kind, pt.params);
            const auto steady = attracting_steady_state(model, pt.params, start_above(model, pt.params, 1.0));
            const double T_star = steady_component(steady);
            const double T0 = task.multiple * std::max(T_star, 1e-3);
            const StateVector x0 = start_above(model, pt.params, T0);
            const auto traj = relaxation_trajectory(model, pt.params, x0, steady.relaxation_rate);
            const auto verdict = classify_curvature(traj, "T");
            pt.metrics = {{"T0", T0},
                          {"T*", T_star},
                          {"rate", steady.relaxation_rate},
                          {"positive_fraction", verdict.positive_fraction},
                          {"negative_fraction", verdict.negative_fraction}};
            pt.labels = {{"curvature", to_string(verdict.cls)}, {"traditional", verdict.traditional}};
        } catch (const Error& e) {
            pt.error = e.what();
        }
        return pt;
    });
}

inline ClaimReport only_decelerates(const ClaimConfig& config) {
    const auto grid = grid_or(config, kDestructionGrid);
    ClaimReport report;
    report.claim_id = "destruction-only-decelerates";
    report.settings = {{"T0", "2 T* (4 T* for power-destruction); coupled-agent D0 = x T0 / delta_D"},
                       {"window", "[0, 5/rate]"},
                       {"integrator", "dopri5 rtol=1e-10 atol=1e-12, max_step=window/400"},
                       {"majority", "90% of signed second differences"}};
    report.grid = destruction_only_points(config, grid);
    std::size_t decel = 0, accel = 0;
    for (auto& pt : report.grid) {
        if (!pt.error.empty()) {
            pt.note = "evaluation failed";
            continue;
        }
        const auto cls = *pt.tag("curvature");
        pt.passed = cls == to_string(CurvatureClass::decelerating_decline);
        decel += pt.passed ? 1 : 0;
        accel += cls == to_string(CurvatureClass::accelerating_decline) ? 1 : 0;
        pt.note = pt.passed ? "decline slows down" : "classified " + cls;
    }
    finish(report);
    if (report.grid.size() < 24) report.verdict = Verdict::fail;
    report.narrative = std::to_string(decel) + " of " + std::to_string(report.grid.size()) +
                       " destruction-only trajectories started above their steady state decline with shrinking " +
                       "speed; " + std::to_string(accel) + " accelerate.";
    return report;
}

struct MechanismRun {
    MechanismModelKind kind;
    ParameterSet params;
    Trajectory traj;
    CollapseWindow window;
};

inline MechanismRun run_mechanism(MechanismModelKind kind, const ParameterSet& params) {
    const ModelSystem model = make_mechanism_model(kind, params);
    const StateVector x0 = latent_state(kind, params);
    AdaptiveOptions options;
    options.max_step = default_horizon(kind) / 2000.0;
    Trajectory traj = integrate_adaptive(model, params, x0, 0.0, default_horizon(kind), 1e-9, 1e-12, options);
    const CollapseWindow window = collapse_window(model, params, traj);
    return {kind, params, std::move(traj), window};
}

inline std::pair<std::size_t, std::size_t> window_indices(const MechanismRun& run) {
    return {run.window.first_index, run.window.last_index};
}

inline GridPoint mechanism_shape_point(const ClaimConfig& config, MechanismModelKind kind) {
    GridPoint pt;
    pt.model = kind_name(kind);
    pt.label = pt.model + " (shipped defaults)";
    try {
        pt.params = apply_overrides(config, pt.model, default_params(kind));
        const auto run = run_mechanism(kind, pt.params);
        const auto verdict = classify_curvature(run.traj, "T", std::make_pair(run.window.start, run.window.steepest));
        pt.metrics = {{"window_start", run.window.start},
                      {"window_end", run.window.steepest},
                      {"positive_fraction", verdict.positive_fraction},
                      {"negative_fraction", verdict.negative_fraction}};
        pt.labels = {{"curvature", to_string(verdict.cls)}, {"traditional", verdict.traditional}};
        pt.passed = verdict.cls == CurvatureClass::accelerating_decline;
        pt.note = pt.passed ? "collapse accelerates" : std::string("collapse window classified ") + to_string(verdict.cls);
    } catch (const Error& e) {
        pt.error = e.what();
        pt.note = "evaluation failed";
    }
    return pt;
}

inline ClaimReport needs_feedback(const ClaimConfig& config) {
    const auto grid = grid_or(config, kDestructionGrid);
    ClaimReport report;
    report.claim_id = "aids-curve-needs-feedback";
    report.settings = {{"mechanism start", "latent state with slow compartments at 1"},
                       {"mechanism window", "start of the terminal decline to the steepest descent"},
                       {"mechanism integrator", "dopri5 rtol=1e-9 atol=1e-12, max_step=horizon/2000"},
                       {"destruction-only", "as in destruction-only-decelerates"}};
    std::vector<MechanismModelKind> kinds(kMechanismModelKinds.begin(), kMechanismModelKinds.end());
    report.grid = parallel_map<GridPoint>(kinds.size(), config.threads,
                                          [&](std::size_t i) { return mechanism_shape_point(config, kinds[i]); });
    std::size_t accel = 0;
    for (const auto& pt : report.grid) accel += pt.passed ? 1 : 0;

    std::size_t destruction_accel = 0;
    auto others = destruction_only_points(config, grid);
    for (auto& pt : others) {
        if (!pt.error.empty()) {
            pt.note = "evaluation failed";
        } else {
            const auto cls = *pt.tag("curvature");
            pt.passed = cls != to_string(CurvatureClass::accelerating_decline);
            destruction_accel += pt.passed ? 0 : 1;
            pt.note = pt.passed ? "no acceleration without feedback" : "destruction-only model accelerated";
        }
        report.grid.push_back(std::move(pt));
    }
    finish(report);
    report.narrative = std::to_string(accel) + " of " + std::to_string(kinds.size()) +
                       " slow positive-feedback mechanisms produce an accelerating collapse, while " +
                       std::to_string(destruction_accel) + " of " + std::to_string(others.size()) +
                       " destruction-only trajectories do. Only the shape class is tested, never values.";
    return report;
}

inline ClaimReport reduction_valid(const ClaimConfig& config) {
    const auto ratios = grid_or(config, {100.0, 1000.0});
    ClaimReport report;
    report.claim_id = "qss-reduction-valid";
    report.settings = {{"span", "[0, 10/y]"},
                       {"start", "T0 = a/y, D0 = x T0 / delta_D"},
                       {"integrator", "dopri5 rtol=1e-8 atol=1e-12, max_step=span/1000; reduced curve interpolated"},
                       {"tolerance", "sup |T_full - T_reduced| <= 1% of the T range"}};
    struct Task {
        double ratio;
        double gamma_eff;
    };
    std::vector<Task> tasks;
    for (double ratio : ratios) {
        if (!(ratio > 0.0)) throw UsageError("delta_D/y ratios must be positive");
        for (double g : {0.1, 1.0}) tasks.push_back({ratio, g});
    }
    report.grid = parallel_map<GridPoint>(tasks.size(), config.threads, [&](std::size_t i) {
        GridPoint pt;
        pt.model = "coupled-agent";
        pt.label = "delta_D/y = " + num(tasks[i].ratio) + ", x/delta_D = " + num(tasks[i].gamma_eff);
        try {
            ParameterSet base{{"a", 1.0}, {"y", 1.0}, {"x", 0.0}, {"delta_D", 1.0}};
            base = apply_overrides(config, pt.model, base);
            const double y = base.at("y");
            const double delta_D = tasks[i].ratio * y;
            pt.params = base.with("delta_D", delta_D).with("x", tasks[i].gamma_eff * delta_D);
            const ModelSystem full = make_paper_model(PaperModelKind::coupled_agent, pt.params);
            const auto reduced = qss_reduce(full, pt.params);
            const double T0 = pt.params.at("a") / y;
            const double span = 10.0 / y;
            AdaptiveOptions options;
            options.max_step = span / 1000.0;
            const auto a = integrate_adaptive(full, pt.params, start_above(full, pt.params, T0), 0.0, span, 1e-8,
                                              1e-12, options);
            const auto b = integrate_adaptive(reduced.model, reduced.params, reduced.model.make_state({T0}), 0.0, span,
                                              1e-8, 1e-12, options);
            const auto Ta = a.component("T");
            const auto Tb = b.component("T");
            double gap = 0.0, lo = Ta.front(), hi = Ta.front();
            for (std::size_t k = 0; k < a.size(); ++k) {
                gap = std::max(gap, std::abs(Ta[k] - interpolate(b.times(), Tb, a.times()[k])));
                lo = std::min(lo, Ta[k]);
                hi = std::max(hi, Ta[k]);
            }
            const double range = hi - lo;
            pt.metrics = {{"sup_gap", gap}, {"T_range", range}, {"relative_gap", range > 0.0 ? gap / range : 0.0}};
            pt.passed = gap <= 0.01 * range || (range == 0.0 && gap == 0.0);
            pt.note = pt.passed ? "reduced trajectory within 1% of the T range" : "reduction gap exceeds 1% of the T range";
        } catch (const Error& e) {
            pt.error = e.what();
            pt.note = "evaluation failed";
        }
        return pt;
    });
    finish(report);
    report.narrative = "Replacing the fast destroyer by its quasi-steady value kept the T trajectory within 1% of its " +
                       std::string("range in ") + std::to_string(report.passed_points()) + " of " +
                       std::to_string(report.grid.size()) + " fast-destroyer settings.";
    return report;
}

/// Largest |d(dT/dt)/dx_j| over compartments j that are neither T nor on the destruction route.
inline double direct_slow_coupling(const ModelSystem& model, const ParameterSet& params, MechanismModelKind kind,
                                   const StateVector& at) {
    const BoundSystem f(model, params);
    const auto route = destruction_route(kind);
    const std::size_t T = *model.state_index("T");
    const auto J = jacobian(f, 0.0, at.values());
    double worst = 0.0;
    for (std::size_t j = 0; j < model.dimension(); ++j) {
        const auto& name = model.state_names()[j];
        if (j == T || std::find(route.begin(), route.end(), name) != route.end()) continue;
        worst = std::max(worst, std::abs(J(static_cast<Eigen::Index>(T), static_cast<Eigen::Index>(j))));
    }
    return worst;
}

inline ClaimReport mechanism_conditions(const ClaimConfig& config) {
    if (config.grid) throw UsageError("mechanism-satisfies-conditions has no sweep grid");
    ClaimReport report;
    report.claim_id = "mechanism-satisfies-conditions";
    report.settings = {{"plateau", "time until T first drops 10% below its latent value, must be >= 50/y"},
                       {"slow rate", "slowest process rate at the latent state, must be <= y/100"},
                       {"indirect action", "dT/dt does not depend on compartments off the destruction route"},
                       {"removal trend", "r = (a - yT - dT/dt)/T non-decreasing over the collapse window (1e-9 rel)"},
                       {"integrator", "dopri5 rtol=1e-9 atol=1e-12, max_step=horizon/2000"}};
    std::vector<MechanismModelKind> kinds(kMechanismModelKinds.begin(), kMechanismModelKinds.end());
    report.grid = parallel_map<GridPoint>(kinds.size(), config.threads, [&](std::size_t i) {
        const auto kind = kinds[i];
        GridPoint pt;
        pt.model = kind_name(kind);
        pt.label = pt.model + " (shipped defaults)";
        try {
            pt.params = apply_overrides(config, pt.model, default_params(kind));
            const ModelSystem model = make_mechanism_model(kind, pt.params);
            const auto run = run_mechanism(kind, pt.params);
            const double y = pt.params.at("y");
            const double span = run.traj.times().back() - run.traj.times().front();
            const double plateau = plateau_length(run.traj, "T", 0.1);
            const bool leaves = plateau < span;
            const double slow = slow_process_rate(kind, pt.params, run.traj.state(0));
            const double coupling = direct_slow_coupling(model, pt.params, kind, run.traj.state(0));

            const auto r = per_capita_removal(model, pt.params, run.traj);
            const auto [first, last] = window_indices(run);
            double worst_drop = 0.0;
            for (std::size_t k = first + 1; k <= last; ++k) {
                const double drop = r[k - 1] - r[k];
                worst_drop = std::max(worst_drop, drop / std::max(std::abs(r[k - 1]), 1e-300));
            }
            const bool plateau_ok = leaves && plateau >= 50.0 / y;
            const bool slow_ok = slow <= y / 100.0;
            const bool indirect_ok = coupling <= 1e-9;
            const bool trend_ok = last > first && worst_drop <= 1e-9;
            pt.metrics = {{"plateau", plateau},
                          {"plateau_min", 50.0 / y},
                          {"slow_rate", slow},
                          {"slow_rate_max", y / 100.0},
                          {"direct_coupling", coupling},
                          {"removal_start", r[first]},
                          {"removal_end", r[last]},
                          {"worst_relative_removal_drop", worst_drop}};
            pt.labels = {{"removal_trend", trend_ok ? "non-decreasing" : "decreasing somewhere"}};
            pt.passed = plateau_ok && slow_ok && indirect_ok && trend_ok;
            std::vector<std::string> failed;
            if (!plateau_ok) failed.push_back(leaves ? "plateau shorter than 50/y" : "T never leaves the plateau");
            if (!slow_ok) failed.push_back("slow process faster than y/100");
            if (!indirect_ok) failed.push_back("slow compartment acts directly on T");
            if (!trend_ok) failed.push_back("per-capita removal falls while T falls");
            if (failed.empty()) {
                pt.note = "all conditions hold";
            } else {
                for (std::size_t k = 0; k < failed.size(); ++k) pt.note += (k ? "; " : "") + failed[k];
            }
        } catch (const Error& e) {
            pt.error = e.what();
            pt.note = "evaluation failed";
        }
        return pt;
    });
    finish(report);
    report.narrative = std::to_string(report.passed_points()) + " of " + std::to_string(report.grid.size()) +
                       " mechanisms show a long latent plateau, a slow driving process, destruction that reaches T " +
                       "only through an intermediate compartment, and a per-capita removal rate that rises as T falls.";
    return report;
}

struct ClaimEntry {
    ClaimInfo info;
    ClaimReport (*run)(const ClaimConfig&);
};

inline const std::vector<ClaimEntry>& claim_table() {
    static const std::vector<ClaimEntry> table = {
        {{"destruction-lowers-and-hastens",
          "stronger destruction lowers the steady state and shortens the approach to it",
          "destruction strengths s"},
         lowers_and_hastens},
        {{"destruction-only-decelerates",
          "destruction-only models started above their steady state always decline with shrinking speed",
          "destruction strengths s"},
         only_decelerates},
        {{"aids-curve-needs-feedback",
          "an accelerating collapse appears with slow positive feedback and never without it",
          "destruction strengths s of the destruction-only half"},
         needs_feedback},
        {{"qss-reduction-valid",
          "eliminating a fast destroyer by its quasi-steady value preserves the T trajectory", "delta_D/y ratios"},
         reduction_valid},
        {{"mechanism-satisfies-conditions",
          "each mechanism has a long plateau, slow indirect destruction and rising per-capita removal", ""},
         mechanism_conditions},
    };
    return table;
}

inline void check_overrides(const ClaimConfig& config) {
    for (const auto& [kind_text, params] : config.overrides) {
        auto kind = parse_kind(kind_text);
        if (!kind) throw UsageError("override names unknown model '" + kind_text + "'");
        const ModelSystem probe = make_model(*kind, default_params(*kind));
        for (const auto& [name, value] : params.entries()) {
            if (!probe.find_param(name)) {
                throw UsageError("model '" + kind_text + "' has no parameter '" + name + "'");
            }
        }
    }
}

}  // namespace detail

inline std::vector<ClaimInfo> registered_claims() {
    std::vector<ClaimInfo> out;
    for (const auto& entry : detail::claim_table()) out.push_back(entry.info);
    return out;
}

/// Runs a registered claim. Deterministic for a given config; any grid point
/// that fails numerically is recorded with its error and fails the verdict.
inline ClaimReport run_claim(std::string_view claim_id, const ClaimConfig& config = {}) {
    for (const auto& entry : detail::claim_table()) {
        if (entry.info.id == claim_id) {
            detail::check_overrides(config);
            return entry.run(config);
        }
    }
    std::string known;
    for (const auto& entry : detail::claim_table()) known += (known.empty() ? "" : ", ") + entry.info.id;
    throw UsageError("unknown claim '" + std::string(claim_id) + "'; registered claims: " + known);
}

/// Mechanism trajectories and collapse windows used by the feedback claim, for plotting.
struct MechanismCurve {
    std::string label;
    std::vector<double> times;
    std::vector<double> values;
    double window_start;
    double window_end;
};

inline std::vector<MechanismCurve> mechanism_curves(const ClaimConfig& config = {}) {
    std::vector<MechanismCurve> out;
    for (auto kind : kMechanismModelKinds) {
        const auto params = detail::apply_overrides(config, kind_name(kind), default_params(kind));
        const auto run = detail::run_mechanism(kind, params);
        out.push_back({kind_name(kind), run.traj.times(), run.traj.component("T"), run.window.start, run.window.steepest});
    }
    return out;
}

}  // namespace qss
