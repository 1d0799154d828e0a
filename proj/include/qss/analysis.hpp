#pragma once

// Quantities extracted from models and trajectories: numerical steady states,
// time to approach a steady state, decline-curvature classes and the
// quasi-steady-state reduction of the coupled-agent model.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "qss/catalog.hpp"
#include "qss/closed_form.hpp"
#include "qss/error.hpp"
#include "qss/integrate.hpp"
#include "qss/model.hpp"

namespace qss {

enum class SteadyStateMethod { formula, newton, bisection };

inline const char* to_string(SteadyStateMethod m) {
    switch (m) {
        case SteadyStateMethod::formula: return "formula";
        case SteadyStateMethod::newton: return "newton";
        case SteadyStateMethod::bisection: return "bisection";
    }
    return "?";
}

struct SteadyStateReport {
    StateVector values;
    double residual = 0.0;  ///< max-norm of the rhs at `values`
    SteadyStateMethod method = SteadyStateMethod::newton;
    double relaxation_rate = 0.0;  ///< > 0 for attracting points
    std::optional<double> time_to_epsilon;
};

/// Residual bound every reported steady state satisfies.
inline constexpr double kSteadyResidualTolerance = 1e-9;

namespace detail {

inline double max_norm(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return std::isfinite(m) ? m : std::numeric_limits<double>::infinity();
}

/// Central-difference Jacobian of an autonomous slice f(t, .).
inline Eigen::MatrixXd jacobian(const BoundSystem& f, double t, const std::vector<double>& x) {
    const std::size_t n = x.size();
    Eigen::MatrixXd J(n, n);
    std::vector<double> xp = x, xm = x, fp(n), fm(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double h = 1e-6 * std::max(1.0, std::abs(x[j]));
        xp[j] = x[j] + h;
        xm[j] = x[j] - h;
        f(t, xp, fp);
        f(t, xm, fm);
        for (std::size_t i = 0; i < n; ++i) J(i, j) = (fp[i] - fm[i]) / (2.0 * h);
        xp[j] = x[j];
        xm[j] = x[j];
    }
    return J;
}

/// Slowest decay rate of the linearization: -max Re(lambda).
inline double linearized_rate(const BoundSystem& f, const std::vector<double>& x) {
    const Eigen::MatrixXd J = jacobian(f, 0.0, x);
    if (J.rows() == 1) return -J(0, 0);
    Eigen::EigenSolver<Eigen::MatrixXd> solver(J, false);
    double max_re = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) {
        max_re = std::max(max_re, solver.eigenvalues()[i].real());
    }
    return -max_re;
}

struct NewtonResult {
    std::vector<double> x;
    double residual;
};

/// Damped Newton: full step, halved until the residual norm decreases (max 30 halvings).
inline NewtonResult damped_newton(const BoundSystem& f, std::vector<double> x, int max_iterations = 100) {
    const std::size_t n = x.size();
    std::vector<double> fx(n), trial(n), ftrial(n);
    f(0.0, x, fx);
    double norm = max_norm(fx);
    for (int iter = 0; iter < max_iterations && norm > 0.0; ++iter) {
        const Eigen::MatrixXd J = jacobian(f, 0.0, x);
        Eigen::VectorXd rhs(n);
        for (std::size_t i = 0; i < n; ++i) rhs[static_cast<Eigen::Index>(i)] = -fx[i];
        const Eigen::VectorXd dx = J.fullPivLu().solve(rhs);
        if (!dx.allFinite()) break;
        double lambda = 1.0;
        bool improved = false;
        for (int halving = 0; halving <= 30; ++halving, lambda *= 0.5) {
            for (std::size_t i = 0; i < n; ++i) trial[i] = x[i] + lambda * dx[static_cast<Eigen::Index>(i)];
            f(0.0, trial, ftrial);
            const double tnorm = max_norm(ftrial);
            if (tnorm < norm) {
                x = trial;
                fx = ftrial;
                norm = tnorm;
                improved = true;
                break;
            }
        }
        if (!improved) break;
        double step = 0.0, size = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            step = std::max(step, std::abs(lambda * dx[static_cast<Eigen::Index>(i)]));
            size = std::max(size, std::abs(x[i]));
        }
        if (step <= 1e-15 * (1.0 + size)) break;
    }
    return {x, norm};
}

inline double param_or(const ParameterSet& params, const char* name, double fallback) {
    auto v = params.find(name);
    return v ? *v : fallback;
}

/// Bisection on [0, 10 a / max(y, gamma, eps)], widened by doubling until the sign changes.
inline std::optional<NewtonResult> bisect_scalar(const BoundSystem& f, const ParameterSet& params) {
    auto eval = [&](double T) {
        std::vector<double> x{T}, out(1);
        f(0.0, x, out);
        return out[0];
    };
    const double a = param_or(params, "a", 1.0);
    const double scale = std::max({param_or(params, "y", 0.0), param_or(params, "gamma", 0.0), 1e-12});
    double lo = 0.0;
    double hi = 10.0 * a / scale;
    if (!(hi > 0.0) || !std::isfinite(hi)) hi = 1.0;
    double flo = eval(lo);
    if (flo == 0.0) return NewtonResult{{0.0}, 0.0};
    double fhi = eval(hi);
    for (int i = 0; i < 60 && std::isfinite(fhi) && flo * fhi > 0.0; ++i) {
        hi *= 2.0;
        fhi = eval(hi);
    }
    if (!std::isfinite(fhi) || flo * fhi > 0.0) return std::nullopt;
    for (int i = 0; i < 200 && hi - lo > 4.0 * std::numeric_limits<double>::epsilon() * hi; ++i) {
        const double mid = 0.5 * (lo + hi);
        const double fm = eval(mid);
        if (fm == 0.0) {
            lo = hi = mid;
            break;
        }
        if ((fm > 0.0) == (flo > 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    const double root = 0.5 * (lo + hi);
    return NewtonResult{{root}, std::abs(eval(root))};
}

/// The catalog kind of `model`, when it is an unmodified catalog paper model.
inline std::optional<PaperModelKind> catalog_kind(const ModelSystem& model) {
    auto kind = parse_paper_kind(model.name());
    if (kind && model.reference() == model_reference(*kind)) return kind;
    return std::nullopt;
}

inline bool has_exact_rate(PaperModelKind kind) {
    return kind == PaperModelKind::healthy || kind == PaperModelKind::linear_destruction ||
           kind == PaperModelKind::logistic_source || kind == PaperModelKind::logistic_proliferation;
}

inline double report_rate(const ModelSystem& model, const ParameterSet& params, const BoundSystem& f,
                          const std::vector<double>& x) {
    if (auto kind = catalog_kind(model); kind && has_exact_rate(*kind)) {
        try {
            const double formula_T = steady_state_formula(*kind, params).at("T");
            if (std::abs(formula_T - x[0]) <= 1e-8 * std::max(1.0, std::abs(formula_T))) {
                return relaxation_rate(*kind, params);
            }
        } catch (const Error&) {
        }
    }
    return linearized_rate(f, x);
}

}  // namespace detail

/// Fixed point of the rhs near `guess`: damped Newton with a finite-difference
/// Jacobian, falling back to bisection for one-dimensional models. Roots with
/// negative components are rejected.
inline SteadyStateReport find_steady_state(const ModelSystem& model, const ParameterSet& params,
                                           const StateVector& guess) {
    require_valid(model, params, guess);
    const detail::BoundSystem f(model, params);
    auto accept = [](const detail::NewtonResult& r) {
        return r.residual <= kSteadyResidualTolerance &&
               std::all_of(r.x.begin(), r.x.end(), [](double v) { return std::isfinite(v) && v >= -1e-12; });
    };

    auto newton = detail::damped_newton(f, guess.values());
    SteadyStateMethod method = SteadyStateMethod::newton;
    std::optional<detail::NewtonResult> result;
    if (accept(newton)) {
        result = newton;
    } else if (model.dimension() == 1) {
        auto bisected = detail::bisect_scalar(f, params);
        if (bisected && accept(*bisected)) {
            result = bisected;
            method = SteadyStateMethod::bisection;
        }
    }
    if (!result) {
        throw NoConvergenceError(newton.x, newton.residual,
                                 "no steady state found for model '" + model.name() + "' (best residual " +
                                     std::to_string(newton.residual) + ")");
    }
    SteadyStateReport report;
    report.values = model.make_state(result->x);
    report.residual = result->residual;
    report.method = method;
    report.relaxation_rate = detail::report_rate(model, params, f, result->x);
    return report;
}

/// Report built directly from the closed-form steady state.
inline SteadyStateReport formula_steady_state(PaperModelKind kind, const ParameterSet& params) {
    const ParameterSet canon = canonical_params(params);
    const ModelSystem model = make_paper_model(kind, canon);
    SteadyStateReport report;
    report.values = steady_state_formula(kind, canon);
    report.residual = detail::max_norm(eval_rhs(model, 0.0, report.values, canon).values());
    report.method = SteadyStateMethod::formula;
    report.relaxation_rate = relaxation_rate(kind, canon);
    return report;
}

namespace detail {

/// Attracting steady state reached from state0: Newton from state0 first, then
/// from the end of progressively longer integrations.
inline SteadyStateReport attracting_steady_state(const ModelSystem& model, const ParameterSet& params,
                                                 const StateVector& state0) {
    try {
        auto report = find_steady_state(model, params, state0);
        if (report.relaxation_rate > 0.0) return report;
    } catch (const NoConvergenceError&) {
    }
    for (double horizon : {10.0, 100.0, 1000.0}) {
        const auto traj = integrate_adaptive(model, params, state0, 0.0, horizon, 1e-8, 1e-12);
        try {
            auto report = find_steady_state(model, params, traj.back());
            if (report.relaxation_rate > 0.0) return report;
        } catch (const NoConvergenceError&) {
        }
    }
    throw NoConvergenceError(state0.values(), std::numeric_limits<double>::infinity(),
                             "no attracting steady state reachable from the initial state of '" + model.name() + "'");
}

inline std::size_t component_or_first(const ModelSystem& model, std::string_view component) {
    if (auto idx = model.state_index(component)) return *idx;
    if (component != "T") throw UsageError("model '" + model.name() + "' has no component '" + std::string(component) + "'");
    return 0;
}

}  // namespace detail

/// Smallest t with |T(t) - T*| <= epsilon |T(0) - T*|, from integration to
/// 50/rate. The crossing is located on the cubic Hermite interpolant of the
/// bracketing step.
inline double time_to_epsilon(const ModelSystem& model, const ParameterSet& params, const StateVector& state0,
                              double epsilon, std::string_view component = "T") {
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw UsageError("epsilon must lie in (0, 1)");
    require_valid(model, params, state0);
    const std::size_t idx = detail::component_or_first(model, component);
    const auto steady = detail::attracting_steady_state(model, params, state0);
    const double target = steady.values[idx];
    const double d0 = std::abs(state0[idx] - target);
    if (d0 <= 1e-14 * std::max(1.0, std::abs(target))) return 0.0;

    const double rate = steady.relaxation_rate;
    const double horizon = 50.0 / rate;
    double magnitude = 1.0;
    for (double v : state0.values()) magnitude = std::max(magnitude, std::abs(v));
    AdaptiveOptions options;
    options.max_step = 1.0 / (40.0 * rate);
    const auto traj = integrate_adaptive(model, params, state0, 0.0, horizon, 1e-10, 1e-12 * magnitude, options);

    const double bound = epsilon * d0;
    const auto& times = traj.times();
    const auto& rows = traj.rows();
    const detail::BoundSystem f(model, params);
    std::vector<double> k0(model.dimension()), k1(model.dimension());
    for (std::size_t i = 1; i < traj.size(); ++i) {
        if (std::abs(rows[i][idx] - target) > bound) continue;
        const double t0 = times[i - 1], h = times[i] - t0;
        f(t0, rows[i - 1], k0);
        f(times[i], rows[i], k1);
        const double x0 = rows[i - 1][idx], x1 = rows[i][idx];
        const double m0 = h * k0[idx], m1 = h * k1[idx];
        auto excess = [&](double s) {
            const double s2 = s * s, s3 = s2 * s;
            const double x = (2 * s3 - 3 * s2 + 1) * x0 + (s3 - 2 * s2 + s) * m0 + (-2 * s3 + 3 * s2) * x1 +
                             (s3 - s2) * m1;
            return std::abs(x - target) - bound;
        };
        double lo = 0.0, hi = 1.0;
        for (int it = 0; it < 60; ++it) {
            const double mid = 0.5 * (lo + hi);
            (excess(mid) > 0.0 ? lo : hi) = mid;
        }
        return t0 + hi * h;
    }
    throw TimeoutError("residual of '" + model.name() + "' did not fall to epsilon within 50/rate = " +
                       std::to_string(horizon));
}

enum class CurvatureClass { decelerating_decline, accelerating_decline, mixed, non_monotonic, flat };

inline const char* to_string(CurvatureClass c) {
    switch (c) {
        case CurvatureClass::decelerating_decline: return "decelerating-decline";
        case CurvatureClass::accelerating_decline: return "accelerating-decline";
        case CurvatureClass::mixed: return "mixed";
        case CurvatureClass::non_monotonic: return "non-monotonic";
        case CurvatureClass::flat: return "flat";
    }
    return "?";
}

/// Older naming: a flattening decline is "concave" and an accelerating one
/// "convex", the reverse of the usual sign convention.
inline const char* traditional_label(CurvatureClass c) {
    switch (c) {
        case CurvatureClass::decelerating_decline: return "concave";
        case CurvatureClass::accelerating_decline: return "convex";
        default: return "";
    }
}

struct CurvatureVerdict {
    CurvatureClass cls = CurvatureClass::flat;
    std::pair<double, double> window;  ///< span of the analyzed decreasing run
    double positive_fraction = 0.0;    ///< share of signed second differences > 0
    double negative_fraction = 0.0;
    double zero_fraction = 0.0;        ///< share below the noise floor, excluded from the vote
    std::size_t samples = 0;
    std::string traditional;
};

/// Majority share a sign must reach for a decline to count as one class.
inline constexpr double kCurvatureMajority = 0.9;

namespace detail {

inline double interpolate(const std::vector<double>& ts, const std::vector<double>& vs, double t) {
    auto it = std::upper_bound(ts.begin(), ts.end(), t);
    if (it == ts.begin()) return vs.front();
    if (it == ts.end()) return vs.back();
    const auto i = static_cast<std::size_t>(it - ts.begin());
    const double w = (t - ts[i - 1]) / (ts[i] - ts[i - 1]);
    return vs[i - 1] + w * (vs[i] - vs[i - 1]);
}

}  // namespace detail

/// Resamples `component` on a uniform grid, takes the longest non-increasing
/// run and votes on the sign of its second differences.
inline CurvatureVerdict classify_curvature(const Trajectory& traj, std::string_view component,
                                           std::optional<std::pair<double, double>> window = std::nullopt) {
    const auto values = traj.component(component);
    const auto& times = traj.times();
    double lo = times.front(), hi = times.back();
    if (window) {
        if (!(window->second > window->first)) throw UsageError("curvature window must have positive length");
        lo = std::max(lo, window->first);
        hi = std::min(hi, window->second);
        if (!(hi > lo)) throw UsageError("curvature window lies outside the trajectory");
    }
    std::size_t inside = 0;
    for (double t : times) inside += (t >= lo && t <= hi) ? 1 : 0;
    if (inside < 8) {
        throw InsufficientDataError("curvature classification needs >= 8 trajectory points in the window, got " +
                                    std::to_string(inside));
    }

    const std::size_t n = std::min<std::size_t>(inside, 20000);
    std::vector<double> grid(n), v(n);
    for (std::size_t i = 0; i < n; ++i) {
        grid[i] = i + 1 == n ? hi : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
        v[i] = detail::interpolate(times, values, grid[i]);
    }

    CurvatureVerdict verdict;
    verdict.window = {lo, hi};
    double variation = 0.0;
    for (std::size_t i = 1; i < n; ++i) variation += std::abs(v[i] - v[i - 1]);
    if (variation <= 1e-9 * std::abs(v.front())) {
        verdict.cls = CurvatureClass::flat;
        verdict.traditional = traditional_label(verdict.cls);
        return verdict;
    }

    std::size_t best_start = 0, best_end = 0, run_start = 0;
    for (std::size_t i = 1; i < n; ++i) {
        if (v[i] > v[i - 1]) run_start = i;
        if (i - run_start > best_end - best_start) {
            best_start = run_start;
            best_end = i;
        }
    }
    verdict.window = {grid[best_start], grid[best_end]};
    if (grid[best_end] - grid[best_start] < 0.5 * (hi - lo) || best_end - best_start < 2) {
        verdict.cls = CurvatureClass::non_monotonic;
        verdict.traditional = traditional_label(verdict.cls);
        return verdict;
    }

    double vmax = v[best_start], vmin = v[best_end];
    const double floor = 1e-12 * std::max(vmax - vmin, std::numeric_limits<double>::min());
    std::size_t pos = 0, neg = 0, zero = 0;
    for (std::size_t i = best_start + 1; i < best_end; ++i) {
        const double d2 = v[i + 1] - 2.0 * v[i] + v[i - 1];
        if (d2 > floor) {
            ++pos;
        } else if (d2 < -floor) {
            ++neg;
        } else {
            ++zero;
        }
    }
    const std::size_t total = pos + neg + zero;
    verdict.samples = total;
    verdict.zero_fraction = static_cast<double>(zero) / static_cast<double>(total);
    const std::size_t signed_count = pos + neg;
    if (signed_count == 0) {
        verdict.cls = CurvatureClass::mixed;
        verdict.traditional = traditional_label(verdict.cls);
        return verdict;
    }
    verdict.positive_fraction = static_cast<double>(pos) / static_cast<double>(signed_count);
    verdict.negative_fraction = static_cast<double>(neg) / static_cast<double>(signed_count);
    if (verdict.positive_fraction >= kCurvatureMajority) {
        verdict.cls = CurvatureClass::decelerating_decline;
    } else if (verdict.negative_fraction >= kCurvatureMajority) {
        verdict.cls = CurvatureClass::accelerating_decline;
    } else {
        verdict.cls = CurvatureClass::mixed;
    }
    verdict.traditional = traditional_label(verdict.cls);
    return verdict;
}

struct ReducedModel {
    ModelSystem model;
    ParameterSet params;
};

/// Eliminates the fast destroyer D of the coupled-agent model by its
/// quasi-steady value D = (x/delta_D) T, giving power-destruction with n = 2
/// and gamma = x/delta_D (or the healthy model when x = 0).
inline ReducedModel qss_reduce(const ModelSystem& model, const ParameterSet& params) {
    if (detail::catalog_kind(model) != PaperModelKind::coupled_agent) {
        throw UnsupportedKindError("qss_reduce applies to the coupled-agent model, not '" + model.name() + "'");
    }
    (void)bind_parameters(model, params);
    const double a = params.at("a"), y = params.at("y"), x = params.at("x"), delta_D = params.at("delta_D");
    if (!(y > 0.0)) throw DomainError("qss_reduce requires y > 0");
    if (x == 0.0) {
        ParameterSet reduced{{"a", a}, {"y", y}};
        return {make_paper_model(PaperModelKind::healthy, reduced), reduced};
    }
    ParameterSet reduced{{"a", a}, {"y", y}, {"gamma", x / delta_D}, {"n", 2.0}};
    return {make_paper_model(PaperModelKind::power_destruction, reduced), reduced};
}

// Mechanism-level measurements.

/// Per-capita removal r = (a - yT - dT/dt) / T at every stored point: all
/// T losses other than baseline turnover, divided by T.
inline std::vector<double> per_capita_removal(const ModelSystem& model, const ParameterSet& params,
                                              const Trajectory& traj) {
    const double a = params.at("a"), y = params.at("y");
    const detail::BoundSystem f(model, params);
    const auto idx = model.state_index("T").value_or(0);
    std::vector<double> out(model.dimension()), r;
    r.reserve(traj.size());
    for (std::size_t i = 0; i < traj.size(); ++i) {
        f(traj.times()[i], traj.rows()[i], out);
        const double T = traj.rows()[i][idx];
        r.push_back((a - y * T - out[idx]) / T);
    }
    return r;
}

/// Time T stays within `fraction` of its initial value (the whole span if it never leaves).
inline double plateau_length(const Trajectory& traj, std::string_view component = "T", double fraction = 0.1) {
    const auto values = traj.component(component);
    const double limit = (1.0 - fraction) * values.front();
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] <= limit) {
            const double w = (values[i - 1] - limit) / (values[i - 1] - values[i]);
            return traj.times()[i - 1] + w * (traj.times()[i] - traj.times()[i - 1]) - traj.times().front();
        }
    }
    return traj.times().back() - traj.times().front();
}

struct CollapseWindow {
    double start;
    double steepest;
    std::size_t first_index;
    std::size_t last_index;
};

/// From the start of the terminal run of decreasing T to the point of steepest descent.
inline CollapseWindow collapse_window(const ModelSystem& model, const ParameterSet& params, const Trajectory& traj) {
    const auto idx = model.state_index("T").value_or(0);
    const auto& rows = traj.rows();
    std::size_t start = 0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i][idx] > rows[i - 1][idx]) start = i;
    }
    const detail::BoundSystem f(model, params);
    std::vector<double> out(model.dimension());
    std::size_t steepest = start;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = start; i < rows.size(); ++i) {
        f(traj.times()[i], rows[i], out);
        if (-out[idx] > best) {
            best = -out[idx];
            steepest = i;
        }
    }
    return {traj.times()[start], traj.times()[steepest], start, steepest};
}

}  // namespace qss
