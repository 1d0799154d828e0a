#pragma once

// Analytic solutions, steady states and relaxation rates of the
// single-population models. These are the oracles the numerical modules are
// tested against.

#include <cmath>
#include <string>

#include "qss/catalog.hpp"
#include "qss/error.hpp"
#include "qss/model.hpp"

namespace qss {

namespace detail {

inline void require_time(double t) {
    if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("time must be finite and >= 0");
}

/// Positive root of a + y T - gamma T^2 (gamma > 0), free of cancellation for either sign of y.
inline double logistic_positive_root(double a, double y, double gamma) {
    const double s = std::sqrt(y * y + 4.0 * a * gamma);
    if (y >= 0.0) return (y + s) / (2.0 * gamma);
    if (a == 0.0) return 0.0;
    return 2.0 * a / (s - y);
}

/// Positive root of a - y T - g T^2 for g > 0.
inline double destruction_quadratic_root(double a, double y, double g) {
    return 2.0 * a / (y + std::sqrt(y * y + 4.0 * a * g));
}

inline double checked(const ParameterSet& params, const char* name, Constraint c) {
    auto v = params.find(name);
    if (!v) throw DomainError(std::string("missing parameter '") + name + "'");
    if (!satisfies(c, *v)) throw DomainError(std::string("parameter '") + name + "' must be " + describe(c));
    return *v;
}

}  // namespace detail

/// T(t) = a/y + (T0 - a/y) e^{-y t}
inline double linear_solution(double a, double y, double T0, double t) {
    if (!(y > 0.0)) throw DomainError("linear_solution requires y > 0");
    detail::require_time(t);
    const double steady = a / y;
    return steady + (T0 - steady) * std::exp(-y * t);
}

/// The linear solution with the total removal rate y + gamma.
inline double linear_destruction_solution(double a, double y, double gamma, double T0, double t) {
    if (!(y + gamma > 0.0)) throw DomainError("linear_destruction_solution requires y + gamma > 0");
    return linear_solution(a, y + gamma, T0, t);
}

/// Exact solution of dT/dt = a + y T - gamma T^2 with T(0) = T0.
///
/// With s = sqrt(y^2 + 4 a gamma) and T+ the positive root, u = T - T+
/// satisfies the Bernoulli equation du/dt = -s u - gamma u^2, so
///   u(t) = u0 e^{-s t} / (1 + gamma u0 (1 - e^{-s t}) / s).
/// Between the roots this is the tanh form y/(2 gamma) + s/(2 gamma) tanh(s t/2 + c)
/// with tanh(c) = (2 gamma T0 - y)/s; above T+ it is the matching coth branch.
inline double logistic_solution(double a, double y, double gamma, double T0, double t) {
    if (!(gamma > 0.0)) throw DomainError("logistic_solution requires gamma > 0");
    if (!(a >= 0.0)) throw DomainError("logistic_solution requires a >= 0");
    if (a == 0.0 && !(y > 0.0)) throw DomainError("logistic_solution requires a > 0 or y > 0");
    if (!(T0 >= 0.0)) throw DomainError("logistic_solution requires T0 >= 0");
    detail::require_time(t);
    if (a == 0.0 && T0 == 0.0) return 0.0;
    const double s = std::sqrt(y * y + 4.0 * a * gamma);
    const double root = detail::logistic_positive_root(a, y, gamma);
    const double u0 = T0 - root;
    const double decay = std::exp(-s * t);
    const double phi = s > 0.0 ? -std::expm1(-s * t) / s : t;
    return root + u0 * decay / (1.0 + gamma * u0 * phi);
}

/// Exact steady state of a catalog model: {T} or {T, D} for coupled-agent.
/// The power-destruction root has no closed form and is refused.
inline StateVector steady_state_formula(PaperModelKind kind, const ParameterSet& raw) {
    using detail::checked;
    const ParameterSet params = canonical_params(raw);
    switch (kind) {
        case PaperModelKind::healthy: {
            const double a = checked(params, "a", Constraint::nonnegative);
            const double y = checked(params, "y", Constraint::positive);
            return {{"T", a / y}};
        }
        case PaperModelKind::linear_destruction: {
            const double a = checked(params, "a", Constraint::nonnegative);
            const double y = checked(params, "y", Constraint::positive);
            const double gamma = checked(params, "gamma", Constraint::nonnegative);
            return {{"T", a / (y + gamma)}};
        }
        case PaperModelKind::coupled_agent: {
            const double a = checked(params, "a", Constraint::nonnegative);
            const double y = checked(params, "y", Constraint::nonnegative);
            const double x = checked(params, "x", Constraint::nonnegative);
            const double delta_D = checked(params, "delta_D", Constraint::positive);
            const double g = x / delta_D;
            double T = 0.0;
            if (g > 0.0) {
                T = detail::destruction_quadratic_root(a, y, g);
            } else if (y > 0.0) {
                T = a / y;
            } else if (a > 0.0) {
                throw DomainError("coupled-agent with x = 0 and y = 0 has no steady state");
            }
            return {{"T", T}, {"D", x * T / delta_D}};
        }
        case PaperModelKind::power_destruction:
            throw UnsupportedKindError(
                "power-destruction has no exact steady-state formula; use power_approx_steady for the "
                "first-order approximation or find_steady_state for the numerical root");
        case PaperModelKind::logistic_source:
        case PaperModelKind::logistic_proliferation: {
            const double a = checked(params, "a", Constraint::nonnegative);
            const double y = checked(params, "y", kind == PaperModelKind::logistic_source ? Constraint::nonnegative
                                                                                         : Constraint::any);
            const double gamma = checked(params, "gamma", Constraint::positive);
            return {{"T", detail::logistic_positive_root(a, y, gamma)}};
        }
    }
    throw UnsupportedKindError("unknown model kind");
}

/// (a + (n-1) gamma (a/y)^n) / (y + n gamma (a/y)^{n-1}): one Newton step on
/// a - yT - gamma T^n from T = a/y. Exact at n = 1 and gamma = 0 only.
inline double power_approx_steady(double a, double y, double gamma, double n) {
    if (!(y > 0.0)) throw DomainError("power_approx_steady requires y > 0");
    if (!(gamma >= 0.0)) throw DomainError("power_approx_steady requires gamma >= 0");
    if (!(n >= 1.0)) throw DomainError("power_approx_steady requires n >= 1");
    const double r = a / y;
    return (a + (n - 1.0) * gamma * std::pow(r, n)) / (y + n * gamma * std::pow(r, n - 1.0));
}

/// Exponential approach rate to the steady state (the approach time is its reciprocal).
///
/// Linear models return their exact rate. Power-destruction returns the
/// first-order rate at a/y. The logistic models return the linearized rate
/// 2 gamma T* - y = sqrt(y^2 + 4 a gamma) at the positive root, which is
/// 2 sqrt(a gamma) when y = 0 and y when a = 0. Coupled-agent returns the
/// linearized rate y + 2 (x/delta_D) T* of its quasi-steady reduction.
inline double relaxation_rate(PaperModelKind kind, const ParameterSet& raw) {
    using detail::checked;
    const ParameterSet params = canonical_params(raw);
    switch (kind) {
        case PaperModelKind::healthy: return checked(params, "y", Constraint::positive);
        case PaperModelKind::linear_destruction:
            return checked(params, "y", Constraint::positive) + checked(params, "gamma", Constraint::nonnegative);
        case PaperModelKind::power_destruction: {
            const double a = checked(params, "a", Constraint::nonnegative);
            const double y = checked(params, "y", Constraint::positive);
            const double gamma = checked(params, "gamma", Constraint::nonnegative);
            const double n = checked(params, "n", Constraint::greater_than_one);
            return y + gamma * n * std::pow(a / y, n - 1.0);
        }
        case PaperModelKind::coupled_agent: {
            const double y = checked(params, "y", Constraint::nonnegative);
            const double g = checked(params, "x", Constraint::nonnegative) / checked(params, "delta_D", Constraint::positive);
            const double T = steady_state_formula(kind, params).at("T");
            const double rate = y + 2.0 * g * T;
            if (!(rate > 0.0)) throw DomainError("coupled-agent steady state is not attracting");
            return rate;
        }
        case PaperModelKind::logistic_source:
        case PaperModelKind::logistic_proliferation: {
            const double a = checked(params, "a", Constraint::nonnegative);
            const double y = checked(params, "y", kind == PaperModelKind::logistic_source ? Constraint::nonnegative
                                                                                         : Constraint::any);
            const double gamma = checked(params, "gamma", Constraint::positive);
            const double rate = std::sqrt(y * y + 4.0 * a * gamma);
            if (!(rate > 0.0)) throw DomainError("logistic model with a = 0 and y = 0 has no exponential approach");
            return rate;
        }
    }
    throw UnsupportedKindError("unknown model kind");
}

/// Initial slope of the two homeostatic regimes.
///   logistic-source:        -(T0^2 gamma - a)
///   logistic-proliferation: -(T0 gamma - y) T0   (per-capita reading, equal to the rhs at a = 0)
inline double initial_slope(PaperModelKind kind, const ParameterSet& params, double T0) {
    using detail::checked;
    switch (kind) {
        case PaperModelKind::logistic_source: {
            const double a = checked(params, "a", Constraint::nonnegative);
            const double gamma = checked(params, "gamma", Constraint::positive);
            return -(T0 * T0 * gamma - a);
        }
        case PaperModelKind::logistic_proliferation: {
            const double y = checked(params, "y", Constraint::any);
            const double gamma = checked(params, "gamma", Constraint::positive);
            return -(T0 * gamma - y) * T0;
        }
        default:
            throw UnsupportedKindError("initial_slope is defined for logistic-source and logistic-proliferation only, not " +
                                       kind_name(kind));
    }
}

}  // namespace qss
