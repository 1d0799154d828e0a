#pragma once

// Model abstraction shared by every other module: named parameters, named
// state vectors, and an ODE right-hand side evaluated over them.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qss/error.hpp"

namespace qss {

/// Admissible range of a parameter value.
enum class Constraint { any, nonnegative, positive, greater_than_one };

inline const char* describe(Constraint c) {
    switch (c) {
        case Constraint::any: return "any finite value";
        case Constraint::nonnegative: return ">= 0";
        case Constraint::positive: return "> 0";
        case Constraint::greater_than_one: return "> 1";
    }
    return "?";
}

inline bool satisfies(Constraint c, double v) {
    switch (c) {
        case Constraint::any: return true;
        case Constraint::nonnegative: return v >= 0.0;
        case Constraint::positive: return v > 0.0;
        case Constraint::greater_than_one: return v > 1.0;
    }
    return false;
}

struct ParamSpec {
    std::string name;
    Constraint constraint = Constraint::any;
    std::optional<double> default_value;
    /// Conventional mathematical symbol, shown in catalog listings.
    std::string symbol;
};

/// Immutable map from parameter name to a finite value.
class ParameterSet {
public:
    using Map = std::map<std::string, double, std::less<>>;

    ParameterSet() = default;

    ParameterSet(std::initializer_list<std::pair<const std::string, double>> entries)
        : entries_(entries) {
        check_finite();
    }

    explicit ParameterSet(Map entries) : entries_(std::move(entries)) { check_finite(); }

    /// Value of `name`; an undeclared name is a ParameterError, never a default.
    double at(std::string_view name) const {
        auto it = entries_.find(name);
        if (it == entries_.end()) {
            throw ParameterError(std::string(name), "missing parameter '" + std::string(name) + "'");
        }
        return it->second;
    }

    std::optional<double> find(std::string_view name) const {
        auto it = entries_.find(name);
        if (it == entries_.end()) return std::nullopt;
        return it->second;
    }

    bool contains(std::string_view name) const { return entries_.find(name) != entries_.end(); }

    ParameterSet with(const std::string& name, double value) const {
        Map copy = entries_;
        copy[name] = value;
        return ParameterSet(std::move(copy));
    }

    ParameterSet without(std::string_view name) const {
        Map copy = entries_;
        if (auto it = copy.find(name); it != copy.end()) copy.erase(it);
        return ParameterSet(std::move(copy));
    }

    /// Copy of *this with every entry of `overrides` replacing or adding.
    ParameterSet merged(const ParameterSet& overrides) const {
        Map copy = entries_;
        for (const auto& [k, v] : overrides.entries_) copy[k] = v;
        return ParameterSet(std::move(copy));
    }

    const Map& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }

    friend bool operator==(const ParameterSet&, const ParameterSet&) = default;

private:
    void check_finite() const {
        for (const auto& [k, v] : entries_) {
            if (!std::isfinite(v)) throw ParameterError(k, "parameter '" + k + "' is not finite");
        }
    }

    Map entries_;
};

/// Ordered (name, value) components. Also used for derivatives, so values may
/// be negative; initial-state nonnegativity is checked by validate().
class StateVector {
public:
    StateVector() = default;

    StateVector(std::vector<std::string> names, std::vector<double> values)
        : names_(std::move(names)), values_(std::move(values)) {
        if (names_.size() != values_.size()) {
            throw ShapeError("state vector has " + std::to_string(names_.size()) + " names but " +
                             std::to_string(values_.size()) + " values");
        }
        for (std::size_t i = 0; i < names_.size(); ++i) {
            for (std::size_t j = 0; j < i; ++j) {
                if (names_[i] == names_[j]) throw ShapeError("duplicate state component '" + names_[i] + "'");
            }
        }
    }

    StateVector(std::initializer_list<std::pair<std::string, double>> components) {
        std::vector<std::string> names;
        std::vector<double> values;
        for (const auto& [n, v] : components) {
            names.push_back(n);
            values.push_back(v);
        }
        *this = StateVector(std::move(names), std::move(values));
    }

    std::size_t size() const noexcept { return values_.size(); }
    const std::vector<std::string>& names() const noexcept { return names_; }
    const std::vector<double>& values() const noexcept { return values_; }
    double operator[](std::size_t i) const { return values_.at(i); }

    std::optional<std::size_t> index_of(std::string_view name) const {
        for (std::size_t i = 0; i < names_.size(); ++i) {
            if (names_[i] == name) return i;
        }
        return std::nullopt;
    }

    double at(std::string_view name) const {
        auto i = index_of(name);
        if (!i) throw ShapeError("state has no component '" + std::string(name) + "'");
        return values_[*i];
    }

    friend bool operator==(const StateVector&, const StateVector&) = default;

private:
    std::vector<std::string> names_;
    std::vector<double> values_;
};

/// Right-hand side over raw storage: parameters arrive in schema order.
using RhsFunction = std::function<void(double t, std::span<const double> state,
                                       std::span<const double> params, std::span<double> out)>;

/// An ODE system: named states, a parameter schema and a pure right-hand side.
class ModelSystem {
public:
    ModelSystem(std::string name, std::vector<std::string> state_names,
                std::vector<ParamSpec> param_schema, RhsFunction rhs, bool time_dependent,
                std::string reference)
        : name_(std::move(name)),
          state_names_(std::move(state_names)),
          param_schema_(std::move(param_schema)),
          rhs_(std::move(rhs)),
          time_dependent_(time_dependent),
          reference_(std::move(reference)) {
        if (state_names_.empty()) throw ShapeError("model '" + name_ + "' declares no states");
        if (!rhs_) throw ShapeError("model '" + name_ + "' has no right-hand side");
        (void)StateVector(state_names_, std::vector<double>(state_names_.size()));
        for (std::size_t i = 0; i < param_schema_.size(); ++i) {
            for (std::size_t j = 0; j < i; ++j) {
                if (param_schema_[i].name == param_schema_[j].name) {
                    throw ParameterError(param_schema_[i].name, "duplicate parameter '" + param_schema_[i].name + "'");
                }
            }
        }
    }

    const std::string& name() const noexcept { return name_; }
    const std::vector<std::string>& state_names() const noexcept { return state_names_; }
    const std::vector<ParamSpec>& param_schema() const noexcept { return param_schema_; }
    const RhsFunction& rhs() const noexcept { return rhs_; }
    bool time_dependent() const noexcept { return time_dependent_; }
    const std::string& reference() const noexcept { return reference_; }
    std::size_t dimension() const noexcept { return state_names_.size(); }

    std::optional<std::size_t> state_index(std::string_view name) const {
        for (std::size_t i = 0; i < state_names_.size(); ++i) {
            if (state_names_[i] == name) return i;
        }
        return std::nullopt;
    }

    const ParamSpec* find_param(std::string_view name) const {
        for (const auto& p : param_schema_) {
            if (p.name == name) return &p;
        }
        return nullptr;
    }

    StateVector make_state(std::vector<double> values) const {
        if (values.size() != dimension()) {
            throw ShapeError("model '" + name_ + "' expects " + std::to_string(dimension()) +
                             " state components, got " + std::to_string(values.size()));
        }
        return StateVector(state_names_, std::move(values));
    }

private:
    std::string name_;
    std::vector<std::string> state_names_;
    std::vector<ParamSpec> param_schema_;
    RhsFunction rhs_;
    bool time_dependent_;
    std::string reference_;
};

/// Resolves `params` against the schema, in schema order. Missing entries fall
/// back to schema defaults; constraint violations are ParameterErrors.
inline std::vector<double> bind_parameters(const ModelSystem& model, const ParameterSet& params) {
    std::vector<double> bound;
    bound.reserve(model.param_schema().size());
    for (const auto& spec : model.param_schema()) {
        double v = 0.0;
        if (auto found = params.find(spec.name)) {
            v = *found;
        } else if (spec.default_value) {
            v = *spec.default_value;
        } else {
            throw ParameterError(spec.name, "missing parameter '" + spec.name + "'");
        }
        if (!satisfies(spec.constraint, v)) {
            throw ParameterError(spec.name, "parameter '" + spec.name + "' must be " + describe(spec.constraint));
        }
        bound.push_back(v);
    }
    return bound;
}

inline void check_state_shape(const ModelSystem& model, const StateVector& state) {
    if (state.size() != model.dimension()) {
        throw ShapeError("model '" + model.name() + "' expects " + std::to_string(model.dimension()) +
                         " state components, got " + std::to_string(state.size()));
    }
    for (std::size_t i = 0; i < state.size(); ++i) {
        if (state.names()[i] != model.state_names()[i]) {
            throw ShapeError("state component " + std::to_string(i) + " is '" + state.names()[i] +
                             "', model '" + model.name() + "' declares '" + model.state_names()[i] + "'");
        }
    }
}

/// Derivative of `state` at time `t`. Pure: equal arguments give bitwise-equal results.
inline StateVector eval_rhs(const ModelSystem& model, double t, const StateVector& state,
                            const ParameterSet& params) {
    check_state_shape(model, state);
    const auto bound = bind_parameters(model, params);
    std::vector<double> out(model.dimension(), 0.0);
    model.rhs()(t, state.values(), bound, out);
    return StateVector(model.state_names(), std::move(out));
}

struct Violation {
    enum class Kind { parameter, state };
    Kind kind;
    std::string subject;
    std::string message;
};

using ValidationReport = std::vector<Violation>;

/// Collects every problem with (params, state0); an empty report means valid.
inline ValidationReport validate(const ModelSystem& model, const ParameterSet& params,
                                 const StateVector& state0) {
    ValidationReport report;
    for (const auto& spec : model.param_schema()) {
        auto v = params.find(spec.name);
        if (!v && spec.default_value) v = spec.default_value;
        if (!v) {
            report.push_back({Violation::Kind::parameter, spec.name, "missing parameter '" + spec.name + "'"});
        } else if (!satisfies(spec.constraint, *v)) {
            report.push_back({Violation::Kind::parameter, spec.name, "parameter '" + spec.name + "' must be " + describe(spec.constraint)});
        }
    }
    for (const auto& [k, v] : params.entries()) {
        if (!model.find_param(k)) {
            report.push_back({Violation::Kind::parameter, k, "parameter '" + k + "' is not declared by model '" + model.name() + "'"});
        }
    }
    if (state0.size() != model.dimension()) {
        report.push_back({Violation::Kind::state, "state", "expected " + std::to_string(model.dimension()) + " state components, got " +
                                       std::to_string(state0.size())});
    } else {
        for (std::size_t i = 0; i < state0.size(); ++i) {
            const auto& name = state0.names()[i];
            if (name != model.state_names()[i]) {
                report.push_back({Violation::Kind::state, name, "state component " + std::to_string(i) + " should be '" +
                                            model.state_names()[i] + "'"});
            }
            if (!std::isfinite(state0[i])) {
                report.push_back({Violation::Kind::state, name, "initial value of '" + name + "' is not finite"});
            } else if (state0[i] < 0.0) {
                report.push_back({Violation::Kind::state, name, "initial value of '" + name + "' is negative"});
            }
        }
    }
    return report;
}

inline std::string to_string(const ValidationReport& report) {
    std::string out;
    for (const auto& v : report) {
        if (!out.empty()) out += "; ";
        out += v.message;
    }
    return out;
}

/// Throws the error matching the first violation class, with every message attached.
inline void require_valid(const ModelSystem& model, const ParameterSet& params, const StateVector& state0) {
    auto report = validate(model, params, state0);
    if (report.empty()) return;
    for (const auto& v : report) {
        if (v.kind == Violation::Kind::parameter) throw ParameterError(v.subject, to_string(report));
    }
    throw ShapeError(to_string(report));
}

}  // namespace qss
