// End-to-end acceptance run. Prints one line per criterion and exits nonzero
// if any criterion fails.

#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "malformed_corpus.hpp"
#include "oracles.hpp"
#include "qss/analysis.hpp"
#include "qss/catalog.hpp"
#include "qss/claims.hpp"
#include "qss/closed_form.hpp"
#include "qss/dsl.hpp"
#include "qss/integrate.hpp"
#include "qss/io.hpp"

namespace fs = std::filesystem;
using namespace qss;
using namespace qss::dsl;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            if (!detail.empty()) detail += "; ";
            detail += what;
        }
    }
};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

Outcome integrators_match_closed_forms() {
    Outcome o;
    double worst = 0.0;
    for (double g : {0.0, 1.0}) {
        const ParameterSet p{{"a", 1.0}, {"y", 1.0}, {"gamma", g}};
        const auto m = make_paper_model(PaperModelKind::linear_destruction, p);
        const auto traj = integrate_adaptive(m, p, {{"T", 0.0}}, 0.0, 10.0, 1e-10, 1e-12);
        for (std::size_t k = 0; k < traj.size(); ++k) {
            const double t = traj.times()[k];
            const double exact = 1.0 / (1.0 + g) * (1.0 - std::exp(-(1.0 + g) * t));
            worst = std::max(worst, std::abs(traj.rows()[k][0] - exact));
        }
    }
    o.require(worst <= 1e-8, "adaptive error " + fmt(worst));

    const ParameterSet p{{"a", 1.0}, {"y", 1.0}};
    const auto m = make_paper_model(PaperModelKind::healthy, p);
    auto rk4_error = [&](double dt) {
        const auto traj = integrate_fixed(m, p, {{"T", 0.0}}, 0.0, 10.0, dt);
        double e = 0.0;
        for (std::size_t k = 0; k < traj.size(); ++k) {
            e = std::max(e, std::abs(traj.rows()[k][0] - oracle::exponential_relaxation(1.0, 1.0, 0.0, traj.times()[k])));
        }
        return e;
    };
    const double ratio = rk4_error(0.2) / rk4_error(0.1);
    o.require(ratio >= 15.5, "rk4 ratio " + fmt(ratio));
    o.detail = "adaptive max error " + fmt(worst) + ", rk4 halving ratio " + fmt(ratio) +
               (o.detail.empty() ? "" : " (" + o.detail + ")");
    return o;
}

Outcome steady_state_formulas() {
    Outcome o;
    const PaperModelKind kinds[] = {PaperModelKind::healthy, PaperModelKind::linear_destruction,
                                    PaperModelKind::logistic_source, PaperModelKind::logistic_proliferation};
    const double grid[] = {0.5, 1.0, 2.0};
    double residual = 0.0, mismatch = 0.0;
    int cases = 0;
    for (auto kind : kinds) {
        for (double a : grid) {
            for (double y : grid) {
                for (double g : grid) {
                    ParameterSet p{{"a", a}, {"y", y}};
                    if (kind != PaperModelKind::healthy) p = p.with("gamma", g);
                    const auto m = make_paper_model(kind, p);
                    const auto s = steady_state_formula(kind, p);
                    residual = std::max(residual, max_abs(eval_rhs(m, 0.0, s, p).values()));
                    try {
                        const auto found = find_steady_state(m, p, {{"T", 2.0 * s.at("T") + 0.1}});
                        mismatch = std::max(mismatch, std::abs(found.values.at("T") - s.at("T")));
                    } catch (const Error& e) {
                        o.require(false, kind_name(kind) + ": " + e.what());
                    }
                    ++cases;
                }
            }
        }
    }
    o.require(residual <= 1e-12, "residual " + fmt(residual));
    o.require(mismatch <= 1e-9, "numeric mismatch " + fmt(mismatch));
    o.detail = std::to_string(cases) + " cases, max residual " + fmt(residual) + ", max numeric mismatch " +
               fmt(mismatch) + (o.detail.empty() ? "" : " (" + o.detail + ")");
    return o;
}

Outcome power_law_gap() {
    Outcome o;
    const double approx = power_approx_steady(1.0, 1.0, 1.0, 2.0);
    const double root = oracle::bisect([](double T) { return 1.0 - T - T * T; }, 0.0, 1.0);
    const double gap = approx - root;
    o.require(std::abs(approx - 2.0 / 3.0) <= 1e-15, "approximation " + fmt(approx));
    o.require(std::abs(root - (std::sqrt(5.0) - 1.0) / 2.0) <= 1e-12, "root " + fmt(root));
    o.require(std::abs(gap - 0.0486) <= 5e-5, "gap " + fmt(gap));

    const ParameterSet p{{"a", 1.0}, {"y", 1.0}, {"gamma", 1.0}, {"n", 2.0}};
    const auto found = find_steady_state(make_paper_model(PaperModelKind::power_destruction, p), p, {{"T", 1.0}});
    o.require(std::abs(found.values.at("T") - root) <= 1e-9, "numeric root " + fmt(found.values.at("T")));

    double exact_gap = 0.0;
    for (double a : {0.5, 1.0, 2.0}) {
        for (double y : {0.5, 1.0, 2.0}) {
            for (double g : {0.5, 1.0, 2.0}) {
                exact_gap = std::max(exact_gap, std::abs(power_approx_steady(a, y, g, 1.0) - a / (y + g)));
            }
        }
    }
    o.require(exact_gap <= 1e-15, "n = 1 gap " + fmt(exact_gap));
    char buf[160];
    std::snprintf(buf, sizeof buf, "approximation %.6f, root %.6f, gap %.4f, n = 1 max deviation %s", approx, root, gap,
                  fmt(exact_gap).c_str());
    o.detail = buf + (o.detail.empty() ? "" : " (" + o.detail + ")");
    return o;
}

Outcome ordering_claim() {
    Outcome o;
    const auto report = run_claim("destruction-lowers-and-hastens");
    o.require(report.verdict == Verdict::pass, report.narrative);
    for (const auto& pt : report.grid) {
        if (pt.model != "linear-destruction") continue;
        const double g = pt.params.at("gamma");
        const auto T = pt.metric("T*");
        const auto t = pt.metric("t_eps");
        o.require(T && std::abs(*T - 1.0 / (1.0 + g)) <= 1e-12, "linear T* at gamma " + fmt(g));
        o.require(t && std::abs(*t - std::log(100.0) / (1.0 + g)) <= 1e-6, "linear t_eps at gamma " + fmt(g));
    }
    o.detail = std::to_string(report.grid.size()) + " points, verdict " + to_string(report.verdict) +
               (o.detail.empty() ? "" : " (" + o.detail + ")");
    return o;
}

Outcome impossibility_claim() {
    Outcome o;
    const auto report = run_claim("destruction-only-decelerates");
    std::size_t accelerating = 0, decelerating = 0;
    for (const auto& pt : report.grid) {
        const auto cls = pt.tag("curvature");
        accelerating += cls == std::optional<std::string>("accelerating-decline");
        decelerating += cls == std::optional<std::string>("decelerating-decline");
    }
    o.require(report.verdict == Verdict::pass, report.narrative);
    o.require(report.grid.size() >= 24, "only " + std::to_string(report.grid.size()) + " points");
    o.require(accelerating == 0, std::to_string(accelerating) + " accelerating");
    o.require(decelerating == report.grid.size(), "not every point decelerates");
    o.detail = std::to_string(decelerating) + "/" + std::to_string(report.grid.size()) + " decelerating, " +
               std::to_string(accelerating) + " accelerating" + (o.detail.empty() ? "" : " (" + o.detail + ")");
    return o;
}

Outcome feedback_mechanisms() {
    Outcome o;
    std::size_t good = 0;
    for (auto kind : kMechanismModelKinds) {
        const auto p = default_params(kind);
        const auto m = make_mechanism_model(kind, p);
        const double horizon = default_horizon(kind);
        AdaptiveOptions options;
        options.max_step = horizon / 2000.0;
        const auto traj = integrate_adaptive(m, p, latent_state(kind, p), 0.0, horizon, 1e-9, 1e-12, options);
        const auto T = traj.component("T");
        const double y = p.at("y");

        double plateau = horizon;
        for (std::size_t k = 0; k < T.size(); ++k) {
            if (T[k] <= 0.9 * T.front()) {
                plateau = traj.times()[k];
                break;
            }
        }
        const auto window = collapse_window(m, p, traj);
        const auto verdict = classify_curvature(traj, "T", std::make_pair(window.start, window.steepest));

        bool removal_rises = window.last_index > window.first_index;
        const auto idx = *m.state_index("T");
        double previous = 0.0;
        for (std::size_t k = window.first_index; k <= window.last_index; ++k) {
            const auto dx = eval_rhs(m, traj.times()[k], traj.state(k), p);
            const double Tk = traj.rows()[k][idx];
            const double r = (p.at("a") - y * Tk - dx[idx]) / Tk;
            if (k > window.first_index && previous - r > 1e-9 * std::abs(previous)) removal_rises = false;
            previous = r;
        }
        const bool ok = plateau >= 50.0 / y && plateau < horizon &&
                        verdict.cls == CurvatureClass::accelerating_decline && removal_rises;
        good += ok;
        o.require(ok, kind_name(kind) + " plateau " + fmt(plateau) + ", " + to_string(verdict.cls) +
                          (removal_rises ? "" : ", removal falls"));
    }
    const auto conditions = run_claim("mechanism-satisfies-conditions");
    const auto feedback = run_claim("aids-curve-needs-feedback");
    o.require(conditions.verdict == Verdict::pass, conditions.narrative);
    o.require(feedback.verdict == Verdict::pass, feedback.narrative);
    o.detail = std::to_string(good) + "/4 mechanisms plateau, accelerate and raise removal; claims " +
               to_string(conditions.verdict) + "/" + to_string(feedback.verdict) +
               (o.detail.empty() ? "" : " (" + o.detail + ")");
    return o;
}

/// dT/dt = a - yT - gT^2 from T0 above its positive root, in coth form.
double reduced_solution(double a, double y, double g, double T0, double t) {
    const double s = std::sqrt(y * y + 4.0 * a * g);
    const double u = (2.0 * g * T0 + y) / s;
    const double c = 0.5 * std::log((u + 1.0) / (u - 1.0));
    return -y / (2.0 * g) + s / (2.0 * g) / std::tanh(s * t / 2.0 + c);
}

Outcome qss_reduction() {
    Outcome o;
    double worst = 0.0;
    for (double ratio : {100.0, 1000.0}) {
        const double a = 1.0, y = 1.0, g = 1.0, T0 = 2.0;
        const double delta_D = ratio * y, x = g * delta_D;
        const ParameterSet p{{"a", a}, {"y", y}, {"x", x}, {"delta_D", delta_D}};
        const auto m = make_paper_model(PaperModelKind::coupled_agent, p);
        AdaptiveOptions options;
        options.max_step = 10.0 / y / 1000.0;
        const auto traj = integrate_adaptive(m, p, {{"T", T0}, {"D", x * T0 / delta_D}}, 0.0, 10.0 / y, 1e-8, 1e-12,
                                             options);
        const auto T = traj.component("T");
        double gap = 0.0, lo = T.front(), hi = T.front();
        for (std::size_t k = 0; k < T.size(); ++k) {
            gap = std::max(gap, std::abs(T[k] - reduced_solution(a, y, g, T0, traj.times()[k])));
            lo = std::min(lo, T[k]);
            hi = std::max(hi, T[k]);
        }
        const double relative = gap / (hi - lo);
        worst = std::max(worst, relative);
        o.require(relative <= 0.01, "ratio " + fmt(ratio) + " relative gap " + fmt(relative));
    }
    const auto report = run_claim("qss-reduction-valid");
    o.require(report.verdict == Verdict::pass, report.narrative);
    o.detail = "worst sup gap " + fmt(100.0 * worst) + "% of the T range, claim " + to_string(report.verdict) +
               (o.detail.empty() ? "" : " (" + o.detail + ")");
    return o;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome dsl_equivalence() {
    Outcome o;
    double worst = 0.0;
    oracle::Random rng(8);
    for (auto kind : {PaperModelKind::healthy, PaperModelKind::linear_destruction, PaperModelKind::coupled_agent,
                      PaperModelKind::power_destruction, PaperModelKind::logistic_source,
                      PaperModelKind::logistic_proliferation}) {
        const auto name = kind_name(kind);
        try {
            const auto compiled =
                compile_model(parse_model(slurp(fs::path(QSS_SOURCE_DIR) / "models" / (name + ".qssm"))));
            for (int i = 0; i < 100; ++i) {
                const ParameterSet defaults = default_params(kind);
                ParameterSet p = defaults;
                for (const auto& [k, v] : defaults.entries()) {
                    p = p.with(k, k == "n" ? rng.uniform(1.1, 4.0) : rng.uniform(0.0, 3.0));
                }
                std::vector<double> x(compiled.dimension());
                for (auto& v : x) v = rng.uniform(0.0, 5.0);
                const auto builtin = make_paper_model(kind, p);
                const auto da = eval_rhs(compiled, 0.0, compiled.make_state(x), p).values();
                const auto db = eval_rhs(builtin, 0.0, builtin.make_state(x), p).values();
                for (std::size_t j = 0; j < x.size(); ++j) worst = std::max(worst, std::abs(da[j] - db[j]));
            }
        } catch (const Error& e) {
            o.require(false, name + ": " + e.what());
        }
    }
    o.require(worst <= 1e-12, "max rhs difference " + fmt(worst));

    std::size_t located = 0;
    const auto& cases = corpus::malformed_models();
    for (const auto& c : cases) {
        try {
            (void)parse_model(c.source);
            o.require(false, "accepted malformed input");
        } catch (const ParseError& e) {
            located += e.location().line == c.line && e.location().column == c.column;
        } catch (const SemanticError& e) {
            const auto& loc = e.diagnostics().front().location;
            located += loc.line == c.line && loc.column == c.column;
        }
    }
    o.require(cases.size() >= 10 && located == cases.size(),
              std::to_string(located) + "/" + std::to_string(cases.size()) + " located");

    const std::string alphabet = "stateparm dT/dt=+-*^()0123456789.e;#\n\r$_,";
    std::size_t rejected = 0;
    for (int i = 0; i < 500; ++i) {
        std::string src;
        const int len = static_cast<int>(rng.uniform(0, 60));
        for (int k = 0; k < len; ++k) src += alphabet[static_cast<std::size_t>(rng.uniform(0, alphabet.size() - 1e-9))];
        try {
            (void)parse_model(src);
        } catch (const Error&) {
            ++rejected;
        }
    }
    o.detail = "6 files, max |diff| " + fmt(worst) + "; " + std::to_string(located) + "/" + std::to_string(cases.size()) +
               " malformed inputs located; 500 random inputs without crash" +
               (o.detail.empty() ? "" : " (" + o.detail + ")");
    return o;
}

int shell(const std::string& args, const fs::path& err) {
    const std::string command = std::string("\"") + QSSLAB_PATH + "\" " + args + " > /dev/null 2> \"" + err.string() + "\"";
    const int status = std::system(command.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome cli_contract() {
    Outcome o;
    const fs::path dir = fs::temp_directory_path() / "qsslab-acceptance";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const auto err = dir / "stderr.txt";
    const auto traj = dir / "traj.csv";

    int code = shell("simulate --model linear-destruction --param a=10 --param y=1 --param gamma=1 --init T=10 "
                     "--t-end 5 --rtol 1e-8 --out \"" + traj.string() + "\"",
                     err);
    o.require(code == 0, "simulate exit " + std::to_string(code));
    if (code == 0) {
        std::ifstream in(traj);
        const auto t = read_trajectory_csv(in);
        const double last = t.rows().back()[0];
        o.require(std::abs(last - (5.0 + 5.0 * std::exp(-10.0))) <= 1e-6, "final T " + fmt(last));
    }

    code = shell("check destruction-only-decelerates", err);
    o.require(code == 0, "check exit " + std::to_string(code));

    code = shell("simulate --model nosuch", err);
    const auto message = slurp(err);
    o.require(code == 2, "unknown model exit " + std::to_string(code));
    o.require(message.find("nosuch") != std::string::npos && message.find("linear-destruction") != std::string::npos,
              "unknown model message");

    const auto power = dir / "power.csv";
    const auto verdict = dir / "classify.json";
    code = shell("simulate --model power-destruction --init T=3 --t-end 5 --out \"" + power.string() + "\"", err);
    const int classify = shell("classify --traj \"" + power.string() + "\" --component T --out \"" +
                                   verdict.string() + "\"",
                               err);
    o.require(code == 0 && classify == 0, "classify round trip exit " + std::to_string(classify));
    if (code == 0 && classify == 0) {
        std::ifstream in(power);
        const auto direct = classify_curvature(read_trajectory_csv(in), "T");
        const auto doc = Json::parse(slurp(verdict));
        o.require(doc["class"] == to_string(direct.cls) && doc["positive_fraction"] == direct.positive_fraction,
                  "classify disagrees with the library");
    }

    code = shell("check mechanism-satisfies-conditions --param virulence-drift.rho=0", err);
    o.require(code == 1, "falsified check exit " + std::to_string(code));
    fs::remove_all(dir);
    o.detail = "example exit codes, classify round trip and falsified check" +
               std::string(o.detail.empty() ? " as expected" : " (" + o.detail + ")");
    return o;
}

}  // namespace

int main() {
    struct Criterion {
        const char* name;
        Outcome (*run)();
    };
    const Criterion criteria[] = {{"integrators match closed forms", integrators_match_closed_forms},
                                  {"steady-state formulas", steady_state_formulas},
                                  {"power-law approximation gap", power_law_gap},
                                  {"destruction lowers and hastens", ordering_claim},
                                  {"destruction only decelerates", impossibility_claim},
                                  {"feedback mechanisms", feedback_mechanisms},
                                  {"qss reduction", qss_reduction},
                                  {"dsl equivalence", dsl_equivalence},
                                  {"cli contract", cli_contract}};
    int failures = 0;
    int index = 1;
    for (const auto& c : criteria) {
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("raised: ") + e.what();
        }
        failures += !o.pass;
        std::cout << "criterion " << index++ << ": " << (o.pass ? "PASS" : "FAIL") << "  " << c.name << ": "
                  << o.detail << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
