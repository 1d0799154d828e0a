#pragma once

// Built-in model catalog: the six single-population T-cell equations and the
// four slow positive-feedback mechanism models.

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "qss/error.hpp"
#include "qss/model.hpp"

namespace qss {

enum class PaperModelKind {
    healthy,
    linear_destruction,
    coupled_agent,
    power_destruction,
    logistic_source,
    logistic_proliferation,
};

enum class MechanismModelKind {
    virulence_drift,
    cytokine_inversion,
    humoral_cellular_competition,
    bcell_depletion,
};

using ModelKind = std::variant<PaperModelKind, MechanismModelKind>;

inline constexpr std::array<PaperModelKind, 6> kPaperModelKinds = {
    PaperModelKind::healthy,           PaperModelKind::linear_destruction,
    PaperModelKind::coupled_agent,     PaperModelKind::power_destruction,
    PaperModelKind::logistic_source,   PaperModelKind::logistic_proliferation,
};

inline constexpr std::array<MechanismModelKind, 4> kMechanismModelKinds = {
    MechanismModelKind::virulence_drift,
    MechanismModelKind::cytokine_inversion,
    MechanismModelKind::humoral_cellular_competition,
    MechanismModelKind::bcell_depletion,
};

inline std::string kind_name(PaperModelKind kind) {
    switch (kind) {
        case PaperModelKind::healthy: return "healthy";
        case PaperModelKind::linear_destruction: return "linear-destruction";
        case PaperModelKind::coupled_agent: return "coupled-agent";
        case PaperModelKind::power_destruction: return "power-destruction";
        case PaperModelKind::logistic_source: return "logistic-source";
        case PaperModelKind::logistic_proliferation: return "logistic-proliferation";
    }
    return "?";
}

inline std::string kind_name(MechanismModelKind kind) {
    switch (kind) {
        case MechanismModelKind::virulence_drift: return "virulence-drift";
        case MechanismModelKind::cytokine_inversion: return "cytokine-inversion";
        case MechanismModelKind::humoral_cellular_competition: return "humoral-cellular-competition";
        case MechanismModelKind::bcell_depletion: return "bcell-depletion";
    }
    return "?";
}

inline std::string kind_name(const ModelKind& kind) {
    return std::visit([](auto k) { return kind_name(k); }, kind);
}

inline std::optional<PaperModelKind> parse_paper_kind(std::string_view name) {
    for (auto k : kPaperModelKinds) {
        if (kind_name(k) == name) return k;
    }
    return std::nullopt;
}

inline std::optional<MechanismModelKind> parse_mechanism_kind(std::string_view name) {
    for (auto k : kMechanismModelKinds) {
        if (kind_name(k) == name) return k;
    }
    return std::nullopt;
}

inline std::optional<ModelKind> parse_kind(std::string_view name) {
    if (auto k = parse_paper_kind(name)) return ModelKind{*k};
    if (auto k = parse_mechanism_kind(name)) return ModelKind{*k};
    return std::nullopt;
}

inline std::vector<std::string> catalog_names() {
    std::vector<std::string> names;
    for (auto k : kPaperModelKinds) names.push_back(kind_name(k));
    for (auto k : kMechanismModelKinds) names.push_back(kind_name(k));
    return names;
}

namespace detail {

inline ParamSpec nonneg(std::string name, std::string symbol) {
    return {std::move(name), Constraint::nonnegative, std::nullopt, std::move(symbol)};
}
inline ParamSpec positive(std::string name, std::string symbol) {
    return {std::move(name), Constraint::positive, std::nullopt, std::move(symbol)};
}
inline ParamSpec any_sign(std::string name, std::string symbol) {
    return {std::move(name), Constraint::any, std::nullopt, std::move(symbol)};
}

inline std::vector<ParamSpec> paper_schema(PaperModelKind kind) {
    switch (kind) {
        case PaperModelKind::healthy:
            return {nonneg("a", "a"), positive("y", "y = δ_T − b")};
        case PaperModelKind::linear_destruction:
            return {nonneg("a", "a"), positive("y", "y"), nonneg("gamma", "γ")};
        case PaperModelKind::coupled_agent:
            return {nonneg("a", "a"), nonneg("y", "y"), nonneg("x", "x"), positive("delta_D", "δ_D")};
        case PaperModelKind::power_destruction:
            return {nonneg("a", "a"), positive("y", "y"), nonneg("gamma", "γ"),
                    {"n", Constraint::greater_than_one, std::nullopt, "n"}};
        case PaperModelKind::logistic_source:
            return {nonneg("a", "a"), nonneg("y", "y"), positive("gamma", "γ")};
        case PaperModelKind::logistic_proliferation:
            return {nonneg("a", "a"), any_sign("y", "y"), positive("gamma", "γ")};
    }
    return {};
}

inline std::vector<ParamSpec> mechanism_schema(MechanismModelKind kind) {
    switch (kind) {
        case MechanismModelKind::virulence_drift:
            return {nonneg("a", "a"), positive("y", "y"), nonneg("gamma0", "γ₀"), nonneg("rho", "ρ")};
        case MechanismModelKind::cytokine_inversion:
            return {nonneg("a", "a"),         positive("y", "y"),         nonneg("beta", "β"),
                    nonneg("delta_I", "δ_I"), nonneg("k", "k"),           nonneg("p", "p"),
                    nonneg("delta_C", "δ_C"), positive("kappa", "κ"),     positive("h", "h"),
                    nonneg("c1", "c₁"),       nonneg("c2", "c₂"),         positive("d_K", "d_K")};
        case MechanismModelKind::humoral_cellular_competition:
            return {nonneg("a", "a"),         positive("y", "y"),         nonneg("beta", "β"),
                    nonneg("delta_I", "δ_I"), nonneg("k", "k"),           nonneg("pi", "π"),
                    positive("c", "c"),       nonneg("k_B", "k_B"),       nonneg("p_C", "p_C"),
                    positive("h", "h"),       nonneg("delta_C", "δ_C"),   positive("theta", "θ"),
                    nonneg("p_B", "p_B"),     positive("h_B", "h_B"),     nonneg("delta_B", "δ_B")};
        case MechanismModelKind::bcell_depletion:
            return {nonneg("a", "a"),       positive("y", "y"),     nonneg("beta", "β"),
                    nonneg("delta_I", "δ_I"), nonneg("pi", "π"),    positive("c0", "c₀"),
                    nonneg("c1", "c₁"),     nonneg("mu", "μ")};
    }
    return {};
}

inline std::vector<std::string> mechanism_states(MechanismModelKind kind) {
    switch (kind) {
        case MechanismModelKind::virulence_drift: return {"T"};
        case MechanismModelKind::cytokine_inversion: return {"T", "I", "C", "K1", "K2"};
        case MechanismModelKind::humoral_cellular_competition: return {"T", "I", "V", "C", "B"};
        case MechanismModelKind::bcell_depletion: return {"T", "I", "V", "L"};
    }
    return {};
}

// Right-hand sides. Parameters are indexed in schema order.

inline void rhs_healthy(double, std::span<const double> s, std::span<const double> p, std::span<double> out) {
    out[0] = p[0] - p[1] * s[0];
}

inline void rhs_linear(double, std::span<const double> s, std::span<const double> p, std::span<double> out) {
    out[0] = p[0] - p[1] * s[0] - p[2] * s[0];
}

inline void rhs_coupled(double, std::span<const double> s, std::span<const double> p, std::span<double> out) {
    const double T = s[0], D = s[1];
    out[0] = p[0] - p[1] * T - D * T;
    out[1] = p[2] * T - p[3] * D;
}

inline void rhs_power(double, std::span<const double> s, std::span<const double> p, std::span<double> out) {
    out[0] = p[0] - p[1] * s[0] - p[2] * std::pow(s[0], p[3]);
}

inline void rhs_logistic(double, std::span<const double> s, std::span<const double> p, std::span<double> out) {
    out[0] = p[0] + p[1] * s[0] - p[2] * s[0] * s[0];
}

inline void rhs_virulence(double t, std::span<const double> s, std::span<const double> p, std::span<double> out) {
    const double a = p[0], y = p[1], gamma0 = p[2], rho = p[3];
    const double gamma = gamma0 * std::exp(rho * t);
    out[0] = a - y * s[0] - gamma * s[0];
}

inline void rhs_cytokine(double, std::span<const double> s, std::span<const double> p, std::span<double> out) {
    const double a = p[0], y = p[1], beta = p[2], delta_I = p[3], k = p[4], prolif = p[5];
    const double delta_C = p[6], kappa = p[7], h = p[8], c1 = p[9], c2 = p[10], d_K = p[11];
    const double T = s[0], I = s[1], C = s[2], K1 = s[3], K2 = s[4];
    const double infection = beta * T * I;
    const double th1_share = K1 / (K1 + K2 + kappa);
    out[0] = a - y * T - infection;
    out[1] = infection - delta_I * I - k * C * I;
    out[2] = prolif * th1_share * C * I / (h + I) - delta_C * C;
    out[3] = c1 * C - d_K * K1;
    out[4] = c2 * I - d_K * K2;
}

inline void rhs_competition(double, std::span<const double> s, std::span<const double> p, std::span<double> out) {
    const double a = p[0], y = p[1], beta = p[2], delta_I = p[3], k = p[4], pi = p[5], c = p[6];
    const double k_B = p[7], p_C = p[8], h = p[9], delta_C = p[10], theta = p[11], p_B = p[12];
    const double h_B = p[13], delta_B = p[14];
    const double T = s[0], I = s[1], V = s[2], C = s[3], B = s[4];
    const double infection = beta * T * V;
    out[0] = a - y * T - infection;
    out[1] = infection - delta_I * I - k * C * I;
    out[2] = pi * I - c * V - k_B * B * V;
    // TH2 output of B cells suppresses CTL proliferation.
    out[3] = p_C * C * I / (h + I) * theta / (theta + B) - delta_C * C;
    out[4] = p_B * B * V / (h_B + V) - delta_B * B;
}

inline void rhs_bcell(double, std::span<const double> s, std::span<const double> p, std::span<double> out) {
    const double a = p[0], y = p[1], beta = p[2], delta_I = p[3], pi = p[4], c0 = p[5], c1 = p[6], mu = p[7];
    const double T = s[0], I = s[1], V = s[2], L = s[3];
    const double infection = beta * T * V;
    out[0] = a - y * T - infection;
    out[1] = infection - delta_I * I;
    out[2] = pi * I - (c0 + c1 * L) * V;
    out[3] = -mu * I * L;
}

inline void require_schema(const ModelSystem& model, const ParameterSet& params) {
    std::vector<double> ignored = bind_parameters(model, params);
    (void)ignored;
    for (const auto& [name, value] : params.entries()) {
        if (!model.find_param(name)) {
            throw ParameterError(name, "parameter '" + name + "' is not declared by model '" + model.name() + "'");
        }
    }
}

}  // namespace detail

/// Equation text shown by `catalog` listings.
inline std::string model_reference(PaperModelKind kind) {
    switch (kind) {
        case PaperModelKind::healthy: return "dT/dt = a + (b - delta_T) T = a - y T";
        case PaperModelKind::linear_destruction: return "dT/dt = a - y T - gamma T";
        case PaperModelKind::coupled_agent: return "dT/dt = a - y T - D T; dD/dt = x T - delta_D D";
        case PaperModelKind::power_destruction: return "dT/dt = a - y T - gamma T^n, n > 1";
        case PaperModelKind::logistic_source: return "dT/dt = a + y T - gamma T^2 (source-dominated)";
        case PaperModelKind::logistic_proliferation: return "dT/dt = a + y T - gamma T^2 (proliferation-dominated)";
    }
    return "";
}

inline std::string model_reference(MechanismModelKind kind) {
    switch (kind) {
        case MechanismModelKind::virulence_drift:
            return "dT/dt = a - y T - gamma0 exp(rho t) T (slow drift toward more destructive variants)";
        case MechanismModelKind::cytokine_inversion:
            return "TH1 (K1, from CTL C) vs TH2 (K2, from infected I) cytokines gate CTL proliferation";
        case MechanismModelKind::humoral_cellular_competition:
            return "B cells (on virus V) and CTL (on infected I) compete; TH2 from B suppresses CTL";
        case MechanismModelKind::bcell_depletion:
            return "slow loss of lymph-node architecture L lowers antibody clearance of virus V";
    }
    return "";
}

inline std::string model_reference(const ModelKind& kind) {
    return std::visit([](auto k) { return model_reference(k); }, kind);
}

/// Rewrites the (b, delta_T) spelling of the net death rate into canonical y = delta_T - b.
inline ParameterSet canonical_params(const ParameterSet& params) {
    if (params.contains("y")) return params;
    auto b = params.find("b");
    auto delta_T = params.find("delta_T");
    if (!b || !delta_T) return params;
    return params.without("b").without("delta_T").with("y", *delta_T - *b);
}

/// Builds one of the six single-population models; params must satisfy its schema.
inline ModelSystem make_paper_model(PaperModelKind kind, const ParameterSet& params) {
    std::vector<std::string> states = {"T"};
    RhsFunction rhs;
    switch (kind) {
        case PaperModelKind::healthy: rhs = detail::rhs_healthy; break;
        case PaperModelKind::linear_destruction: rhs = detail::rhs_linear; break;
        case PaperModelKind::coupled_agent:
            rhs = detail::rhs_coupled;
            states = {"T", "D"};
            break;
        case PaperModelKind::power_destruction: rhs = detail::rhs_power; break;
        case PaperModelKind::logistic_source:
        case PaperModelKind::logistic_proliferation: rhs = detail::rhs_logistic; break;
    }
    ModelSystem model(kind_name(kind), std::move(states), detail::paper_schema(kind), std::move(rhs), false,
                      model_reference(kind));
    detail::require_schema(model, canonical_params(params));
    return model;
}

inline ModelSystem make_mechanism_model(MechanismModelKind kind, const ParameterSet& params) {
    RhsFunction rhs;
    switch (kind) {
        case MechanismModelKind::virulence_drift: rhs = detail::rhs_virulence; break;
        case MechanismModelKind::cytokine_inversion: rhs = detail::rhs_cytokine; break;
        case MechanismModelKind::humoral_cellular_competition: rhs = detail::rhs_competition; break;
        case MechanismModelKind::bcell_depletion: rhs = detail::rhs_bcell; break;
    }
    ModelSystem model(kind_name(kind), detail::mechanism_states(kind), detail::mechanism_schema(kind),
                      std::move(rhs), kind == MechanismModelKind::virulence_drift, model_reference(kind));
    detail::require_schema(model, params);
    return model;
}

inline ModelSystem make_model(const ModelKind& kind, const ParameterSet& params) {
    return std::visit(
        [&](auto k) -> ModelSystem {
            if constexpr (std::is_same_v<decltype(k), PaperModelKind>) {
                return make_paper_model(k, params);
            } else {
                return make_mechanism_model(k, params);
            }
        },
        kind);
}

inline ParameterSet default_params(PaperModelKind kind) {
    switch (kind) {
        case PaperModelKind::healthy: return {{"a", 1.0}, {"y", 1.0}};
        case PaperModelKind::linear_destruction: return {{"a", 1.0}, {"y", 1.0}, {"gamma", 1.0}};
        case PaperModelKind::coupled_agent: return {{"a", 1.0}, {"y", 1.0}, {"x", 1.0}, {"delta_D", 1.0}};
        case PaperModelKind::power_destruction: return {{"a", 1.0}, {"y", 1.0}, {"gamma", 1.0}, {"n", 2.0}};
        case PaperModelKind::logistic_source: return {{"a", 1.0}, {"y", 0.0}, {"gamma", 1.0}};
        case PaperModelKind::logistic_proliferation: return {{"a", 0.0}, {"y", 1.0}, {"gamma", 1.0}};
    }
    return {};
}

/// Mechanism defaults. Every slow process runs at a rate <= y/100 and the
/// latent plateau lasts > 50/y; see docs/mechanism-tuning.md for how the
/// proliferation constants p and p_C were chosen.
inline ParameterSet default_params(MechanismModelKind kind) {
    switch (kind) {
        case MechanismModelKind::virulence_drift:
            return {{"a", 1.0}, {"y", 1.0}, {"gamma0", 0.01}, {"rho", 0.01}};
        case MechanismModelKind::cytokine_inversion:
            return {{"a", 1.0},      {"y", 1.0},       {"beta", 10.0},  {"delta_I", 1.0},
                    {"k", 7.0},      {"p", 0.0209286}, {"delta_C", 0.01}, {"kappa", 0.01},
                    {"h", 0.01},     {"c1", 1.0},      {"c2", 20.0},    {"d_K", 1.0}};
        case MechanismModelKind::humoral_cellular_competition:
            return {{"a", 1.0},       {"y", 1.0},      {"beta", 1.0},      {"delta_I", 1.0},
                    {"k", 7.0},       {"pi", 100.0},   {"c", 10.0},        {"k_B", 0.01},
                    {"p_C", 0.0205952}, {"h", 0.001},  {"delta_C", 0.01},  {"theta", 1.0},
                    {"p_B", 0.02},    {"h_B", 0.25},   {"delta_B", 0.005}};
        case MechanismModelKind::bcell_depletion:
            return {{"a", 1.0}, {"y", 1.0},  {"beta", 1.0}, {"delta_I", 1.0},
                    {"pi", 100.0}, {"c0", 10.0}, {"c1", 70.0}, {"mu", 0.005}};
    }
    return {};
}

inline ParameterSet default_params(const ModelKind& kind) {
    return std::visit([](auto k) { return default_params(k); }, kind);
}

/// Latent-stage starting point: the slow compartments (C, B, L) are set to
/// `slow_level` and the fast compartments to their equilibrium given those.
inline StateVector latent_state(MechanismModelKind kind, const ParameterSet& params, double slow_level = 1.0) {
    const double a = params.at("a"), y = params.at("y");
    const auto model_states = detail::mechanism_states(kind);
    auto need_infection = [&](double T) {
        if (!(T > 0.0) || !(T < a / y)) {
            throw DomainError(kind_name(kind) + ": parameters admit no latent infection (T* = " + std::to_string(T) +
                              ", healthy level " + std::to_string(a / y) + ")");
        }
    };
    switch (kind) {
        case MechanismModelKind::virulence_drift:
            return StateVector(model_states, {a / (y + params.at("gamma0"))});
        case MechanismModelKind::cytokine_inversion: {
            const double beta = params.at("beta"), C = slow_level;
            const double T = (params.at("delta_I") + params.at("k") * C) / beta;
            need_infection(T);
            const double I = (a - y * T) / (beta * T);
            const double d_K = params.at("d_K");
            return StateVector(model_states, {T, I, C, params.at("c1") * C / d_K, params.at("c2") * I / d_K});
        }
        case MechanismModelKind::humoral_cellular_competition: {
            const double C = slow_level, B = slow_level;
            const double u = params.at("delta_I") + params.at("k") * C;
            const double w = params.at("c") + params.at("k_B") * B;
            const double T = u * w / (params.at("beta") * params.at("pi"));
            need_infection(T);
            const double I = (a - y * T) / u;
            return StateVector(model_states, {T, I, params.at("pi") * I / w, C, B});
        }
        case MechanismModelKind::bcell_depletion: {
            const double L = slow_level;
            const double clearance = params.at("c0") + params.at("c1") * L;
            const double T = params.at("delta_I") * clearance / (params.at("beta") * params.at("pi"));
            need_infection(T);
            const double I = (a - y * T) / params.at("delta_I");
            return StateVector(model_states, {T, I, params.at("pi") * I / clearance, L});
        }
    }
    throw UnsupportedKindError("unknown mechanism kind");
}

/// Default simulated span: from the latent state to just past the steepest point of the collapse.
inline double default_horizon(MechanismModelKind kind) {
    switch (kind) {
        case MechanismModelKind::virulence_drift: return 470.0;
        case MechanismModelKind::cytokine_inversion: return 500.0;
        case MechanismModelKind::humoral_cellular_competition: return 195.0;
        case MechanismModelKind::bcell_depletion: return 290.0;
    }
    return 0.0;
}

/// Rate of the slowest (destruction-driving) process at `state`.
inline double slow_process_rate(MechanismModelKind kind, const ParameterSet& params, const StateVector& state) {
    switch (kind) {
        case MechanismModelKind::virulence_drift: return params.at("rho");
        case MechanismModelKind::cytokine_inversion: return params.at("delta_C");
        case MechanismModelKind::humoral_cellular_competition:
            return std::max(params.at("delta_C"), params.at("delta_B"));
        case MechanismModelKind::bcell_depletion: return params.at("mu") * state.at("I");
    }
    return 0.0;
}

/// Compartments other than T through which each mechanism removes T cells.
inline std::vector<std::string> destruction_route(MechanismModelKind kind) {
    switch (kind) {
        case MechanismModelKind::virulence_drift: return {"virulence gamma(t)"};
        case MechanismModelKind::cytokine_inversion: return {"I"};
        case MechanismModelKind::humoral_cellular_competition: return {"V"};
        case MechanismModelKind::bcell_depletion: return {"V"};
    }
    return {};
}

}  // namespace qss
