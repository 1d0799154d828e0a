#pragma once

// Time stepping for ModelSystem: classic fixed-step RK4 and the adaptive
// Dormand-Prince 5(4) embedded pair.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qss/error.hpp"
#include "qss/model.hpp"

namespace qss {

struct SolverInfo {
    std::string scheme;
    double step = 0.0;  ///< fixed step, or the initial step for adaptive runs
    double rtol = 0.0;
    double atol = 0.0;
    std::size_t accepted = 0;
    std::size_t rejected = 0;
};

/// Solution samples on a strictly increasing time grid.
class Trajectory {
public:
    Trajectory(std::vector<std::string> names, std::vector<double> times, std::vector<std::vector<double>> states,
               SolverInfo info = {})
        : names_(std::move(names)), times_(std::move(times)), states_(std::move(states)), info_(std::move(info)) {
        if (times_.size() != states_.size()) throw ShapeError("trajectory needs one state per time point");
        if (times_.size() < 2) throw InsufficientDataError("trajectory needs at least two time points");
        for (std::size_t i = 0; i < times_.size(); ++i) {
            if (!std::isfinite(times_[i])) throw ShapeError("trajectory time is not finite");
            if (i > 0 && !(times_[i] > times_[i - 1])) throw ShapeError("trajectory times must be strictly increasing");
            if (states_[i].size() != names_.size()) throw ShapeError("trajectory row has the wrong dimension");
            for (double v : states_[i]) {
                if (!std::isfinite(v)) throw ShapeError("trajectory state is not finite");
            }
        }
        (void)StateVector(names_, states_.front());
    }

    const std::vector<std::string>& names() const noexcept { return names_; }
    const std::vector<double>& times() const noexcept { return times_; }
    const std::vector<std::vector<double>>& rows() const noexcept { return states_; }
    const SolverInfo& info() const noexcept { return info_; }
    std::size_t size() const noexcept { return times_.size(); }

    StateVector state(std::size_t i) const { return StateVector(names_, states_.at(i)); }
    StateVector back() const { return state(size() - 1); }

    std::optional<std::size_t> component_index(std::string_view name) const {
        for (std::size_t i = 0; i < names_.size(); ++i) {
            if (names_[i] == name) return i;
        }
        return std::nullopt;
    }

    std::vector<double> component(std::string_view name) const {
        auto idx = component_index(name);
        if (!idx) throw UsageError("trajectory has no component '" + std::string(name) + "'");
        std::vector<double> out;
        out.reserve(size());
        for (const auto& row : states_) out.push_back(row[*idx]);
        return out;
    }

private:
    std::vector<std::string> names_;
    std::vector<double> times_;
    std::vector<std::vector<double>> states_;
    SolverInfo info_;
};

namespace detail {

/// Parameters resolved once; evaluates f(t, x) into out.
class BoundSystem {
public:
    BoundSystem(const ModelSystem& model, const ParameterSet& params)
        : model_(model), params_(bind_parameters(model, params)) {}

    void operator()(double t, std::span<const double> x, std::span<double> out) const {
        model_.rhs()(t, x, params_, out);
    }

    std::size_t dimension() const noexcept { return model_.dimension(); }

private:
    const ModelSystem& model_;
    std::vector<double> params_;
};

inline bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

inline void check_interval(double t0, double t_end) {
    if (!std::isfinite(t0) || !std::isfinite(t_end) || !(t_end > t0)) {
        throw UsageError("integration interval requires finite t_end > t0");
    }
}

}  // namespace detail

/// Classic four-stage RK4 with step `dt`; the final step is shortened to land on t_end.
inline Trajectory integrate_fixed(const ModelSystem& model, const ParameterSet& params, const StateVector& state0,
                                  double t0, double t_end, double dt) {
    detail::check_interval(t0, t_end);
    if (!(dt > 0.0) || !std::isfinite(dt)) throw UsageError("fixed step dt must be positive");
    require_valid(model, params, state0);
    const detail::BoundSystem f(model, params);
    const std::size_t n = f.dimension();

    std::vector<double> times{t0};
    std::vector<std::vector<double>> states{state0.values()};
    std::vector<double> x = state0.values(), k1(n), k2(n), k3(n), k4(n), tmp(n);

    const double span = t_end - t0;
    const auto full_steps = static_cast<std::size_t>(std::floor(span / dt * (1.0 + 1e-12)));
    double t = t0;
    for (std::size_t step = 1;; ++step) {
        double t_next = step <= full_steps ? t0 + static_cast<double>(step) * dt : t_end;
        if (t_next > t_end || t_end - t_next < 1e-12 * dt) t_next = t_end;
        const double h = t_next - t;
        f(t, x, k1);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k1[i];
        f(t + 0.5 * h, tmp, k2);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k2[i];
        f(t + 0.5 * h, tmp, k3);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + h * k3[i];
        f(t + h, tmp, k4);
        for (std::size_t i = 0; i < n; ++i) x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        t = t_next;
        if (!detail::all_finite(x)) {
            throw BlowupError(t, "state became nonfinite at t = " + std::to_string(t));
        }
        times.push_back(t);
        states.push_back(x);
        if (t >= t_end) break;
    }
    SolverInfo info{"rk4", dt, 0.0, 0.0, times.size() - 1, 0};
    return Trajectory(model.state_names(), std::move(times), std::move(states), std::move(info));
}

struct AdaptiveOptions {
    /// Upper bound on accepted steps; analysis code caps it to keep linear interpolation accurate.
    double max_step = std::numeric_limits<double>::infinity();
    std::size_t max_attempts = 5'000'000;
};

/// Dormand-Prince 5(4) with proportional step control
///   dt_new = dt * clamp(0.9 (1/err)^{1/5}, 0.2, 5),
/// where err is the max over components of |e_i| / (atol + rtol max(|x_i|, |x_i'|)).
/// Every accepted point is stored. Starts from dt = (t_end - t0) / 100.
inline Trajectory integrate_adaptive(const ModelSystem& model, const ParameterSet& params, const StateVector& state0,
                                     double t0, double t_end, double rtol, double atol, AdaptiveOptions options = {}) {
    detail::check_interval(t0, t_end);
    if (!(rtol > 0.0) || !(atol > 0.0)) throw UsageError("rtol and atol must be positive");
    if (!(options.max_step > 0.0)) throw UsageError("max_step must be positive");
    require_valid(model, params, state0);
    const detail::BoundSystem f(model, params);
    const std::size_t n = f.dimension();

    // Dormand & Prince (1980) tableau.
    constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    constexpr double a21 = 1.0 / 5;
    constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                     a65 = -5103.0 / 18656;
    constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                     e6 = 22.0 / 525, e7 = -1.0 / 40;

    const double span = t_end - t0;
    const double min_step = 1e-14 * span;
    double h = std::min(span / 100.0, options.max_step);

    std::vector<double> times{t0};
    std::vector<std::vector<double>> states{state0.values()};
    std::vector<double> x = state0.values(), x_new(n), tmp(n);
    std::vector<double> k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n);
    SolverInfo info{"dopri5", h, rtol, atol, 0, 0};

    double t = t0;
    f(t, x, k1);
    bool last_failure_nonfinite = false;
    std::size_t attempts = 0;
    while (t < t_end) {
        if (++attempts > options.max_attempts) {
            throw StiffnessError(t, "adaptive integration exceeded " + std::to_string(options.max_attempts) +
                                        " step attempts at t = " + std::to_string(t));
        }
        bool last = false;
        if (t + h >= t_end || t_end - (t + h) < min_step) {
            h = t_end - t;
            last = true;
        }
        for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + h * a21 * k1[i];
        f(t + c2 * h, tmp, k2);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + h * (a31 * k1[i] + a32 * k2[i]);
        f(t + c3 * h, tmp, k3);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
        f(t + c4 * h, tmp, k4);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
        f(t + c5 * h, tmp, k5);
        for (std::size_t i = 0; i < n; ++i)
            tmp[i] = x[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
        f(t + h, tmp, k6);
        for (std::size_t i = 0; i < n; ++i)
            x_new[i] = x[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
        const double t_next = last ? t_end : t + h;
        f(t_next, x_new, k7);

        double err = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double e = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
            const double scale = atol + rtol * std::max(std::abs(x[i]), std::abs(x_new[i]));
            err = std::max(err, std::abs(e) / scale);
        }
        const bool finite = std::isfinite(err) && detail::all_finite(x_new) && detail::all_finite(k7);

        if (finite && err <= 1.0) {
            t = t_next;
            x.swap(x_new);
            k1.swap(k7);
            times.push_back(t);
            states.push_back(x);
            ++info.accepted;
            last_failure_nonfinite = false;
            const double factor = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
            h = std::min(h * factor, options.max_step);
        } else {
            ++info.rejected;
            last_failure_nonfinite = !finite;
            const double factor = finite ? std::clamp(0.9 * std::pow(err, -0.2), 0.2, 1.0) : 0.2;
            h *= factor;
            if (h < min_step) {
                if (last_failure_nonfinite) {
                    throw BlowupError(t, "state became nonfinite near t = " + std::to_string(t));
                }
                throw StiffnessError(t, "step size underflow at t = " + std::to_string(t));
            }
        }
    }
    return Trajectory(model.state_names(), std::move(times), std::move(states), std::move(info));
}

}  // namespace qss
