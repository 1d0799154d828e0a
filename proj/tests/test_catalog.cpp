#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "qss/analysis.hpp"
#include "qss/catalog.hpp"
#include "qss/integrate.hpp"

using namespace qss;

TEST(Catalog, KindNamesRoundTrip) {
    for (auto k : kPaperModelKinds) EXPECT_EQ(parse_paper_kind(kind_name(k)), k);
    for (auto k : kMechanismModelKinds) EXPECT_EQ(parse_mechanism_kind(kind_name(k)), k);
    EXPECT_FALSE(parse_kind("nosuch").has_value());
    EXPECT_EQ(catalog_names().size(), 10u);
    EXPECT_EQ(kind_name(PaperModelKind::linear_destruction), "linear-destruction");
}

TEST(Catalog, LinearDestructionZeroAtSteadyLevel) {
    const ParameterSet p{{"a", 10.0}, {"y", 1.0}, {"gamma", 1.0}};
    const auto m = make_paper_model(PaperModelKind::linear_destruction, p);
    EXPECT_EQ(eval_rhs(m, 0.0, {{"T", 5.0}}, p)[0], 0.0);
}

TEST(Catalog, CoupledAgentJointFixedPoint) {
    const ParameterSet p{{"a", 1.0}, {"y", 0.0}, {"x", 1.0}, {"delta_D", 1.0}};
    const auto m = make_paper_model(PaperModelKind::coupled_agent, p);
    const auto d = eval_rhs(m, 0.0, {{"T", 1.0}, {"D", 1.0}}, p);
    EXPECT_EQ(d[0], 0.0);
    EXPECT_EQ(d[1], 0.0);
    EXPECT_EQ(m.dimension(), 2u);
}

TEST(Catalog, LogisticProliferationHasPlusSignOnY) {
    const ParameterSet p{{"a", 0.0}, {"y", 2.0}, {"gamma", 1.0}};
    const auto m = make_paper_model(PaperModelKind::logistic_proliferation, p);
    EXPECT_EQ(eval_rhs(m, 0.0, {{"T", 2.0}}, p)[0], 0.0);
    EXPECT_EQ(eval_rhs(m, 0.0, {{"T", 1.0}}, p)[0], 1.0);
}

TEST(Catalog, SchemaViolationsAreParameterErrors) {
    EXPECT_THROW(make_paper_model(PaperModelKind::healthy, {{"a", 1.0}, {"y", -1.0}}), ParameterError);
    EXPECT_THROW(make_paper_model(PaperModelKind::power_destruction, {{"a", 1.0}, {"y", 1.0}, {"gamma", 1.0}, {"n", 1.0}}),
                 ParameterError);
    EXPECT_THROW(make_paper_model(PaperModelKind::healthy, {{"a", 1.0}}), ParameterError);
    EXPECT_THROW(make_paper_model(PaperModelKind::healthy, {{"a", 1.0}, {"y", 1.0}, {"bogus", 1.0}}), ParameterError);
    EXPECT_THROW(make_mechanism_model(MechanismModelKind::cytokine_inversion,
                                      default_params(MechanismModelKind::cytokine_inversion).with("kappa", 0.0)),
                 ParameterError);
}

TEST(Catalog, ProliferationAndDeathSpellingMapsToNetRate) {
    const ParameterSet p{{"a", 2.0}, {"b", 0.5}, {"delta_T", 1.0}};
    const auto canon = canonical_params(p);
    EXPECT_DOUBLE_EQ(canon.at("y"), 0.5);
    EXPECT_FALSE(canon.contains("b"));
    const auto m = make_paper_model(PaperModelKind::healthy, p);
    EXPECT_EQ(eval_rhs(m, 0.0, {{"T", 4.0}}, canon)[0], 0.0);
}

TEST(Catalog, DefaultsPassValidation) {
    EXPECT_EQ(default_params(PaperModelKind::healthy), (ParameterSet{{"a", 1.0}, {"y", 1.0}}));
    EXPECT_EQ(default_params(PaperModelKind::power_destruction),
              (ParameterSet{{"a", 1.0}, {"y", 1.0}, {"gamma", 1.0}, {"n", 2.0}}));
    for (auto k : kPaperModelKinds) {
        const auto p = default_params(k);
        const auto m = make_paper_model(k, p);
        EXPECT_TRUE(validate(m, p, m.make_state(std::vector<double>(m.dimension(), 1.0))).empty()) << kind_name(k);
    }
    for (auto k : kMechanismModelKinds) {
        const auto p = default_params(k);
        const auto m = make_mechanism_model(k, p);
        EXPECT_TRUE(validate(m, p, latent_state(k, p)).empty()) << kind_name(k);
    }
}

TEST(Catalog, MechanismDefaultsAreSlow) {
    for (auto k : kMechanismModelKinds) {
        const auto p = default_params(k);
        EXPECT_LE(slow_process_rate(k, p, latent_state(k, p)), p.at("y") / 100.0) << kind_name(k);
    }
    EXPECT_LE(default_params(MechanismModelKind::cytokine_inversion).at("delta_C"), 0.01);
}

TEST(Catalog, ZeroDriftVirulenceIsHealthy) {
    const ParameterSet p{{"a", 1.0}, {"y", 1.0}, {"gamma0", 0.0}, {"rho", 0.0}};
    const auto m = make_mechanism_model(MechanismModelKind::virulence_drift, p);
    const auto h = make_paper_model(PaperModelKind::healthy, {{"a", 1.0}, {"y", 1.0}});
    EXPECT_TRUE(m.time_dependent());
    EXPECT_FALSE(h.time_dependent());
    for (double t : {0.0, 1.0, 100.0, 1e4}) {
        for (double T : {0.0, 0.5, 3.0}) {
            EXPECT_EQ(eval_rhs(m, t, {{"T", T}}, p)[0], eval_rhs(h, t, {{"T", T}}, {{"a", 1.0}, {"y", 1.0}})[0]);
        }
    }
}

TEST(Catalog, OnlyVirulenceDriftIsTimeDependent) {
    for (auto k : kPaperModelKinds) EXPECT_FALSE(make_paper_model(k, default_params(k)).time_dependent());
    for (auto k : kMechanismModelKinds) {
        EXPECT_EQ(make_mechanism_model(k, default_params(k)).time_dependent(), k == MechanismModelKind::virulence_drift);
    }
}

TEST(Catalog, CytokineWithoutInfectionDecouples) {
    const auto p = default_params(MechanismModelKind::cytokine_inversion);
    const auto m = make_mechanism_model(MechanismModelKind::cytokine_inversion, p);
    for (double T : {0.2, 1.0, 3.0}) {
        const auto d = eval_rhs(m, 0.0, {{"T", T}, {"I", 0.0}, {"C", 0.0}, {"K1", 0.0}, {"K2", 0.0}}, p);
        EXPECT_DOUBLE_EQ(d[0], p.at("a") - p.at("y") * T);
        for (std::size_t i = 1; i < d.size(); ++i) EXPECT_EQ(d[i], 0.0);
    }
}

TEST(Catalog, CoupledAgentAtQuasiSteadyDestroyerEqualsPowerTwo) {
    oracle::Random rng(7);
    for (int i = 0; i < 100; ++i) {
        const double a = rng.uniform(0, 5), y = rng.uniform(0.1, 3), x = rng.uniform(0, 4), dD = rng.uniform(0.1, 50);
        const double T = rng.uniform(0, 10);
        const ParameterSet pc{{"a", a}, {"y", y}, {"x", x}, {"delta_D", dD}};
        const ParameterSet pp{{"a", a}, {"y", y}, {"gamma", x / dD}, {"n", 2.0}};
        const auto c = eval_rhs(make_paper_model(PaperModelKind::coupled_agent, pc), 0.0, {{"T", T}, {"D", x / dD * T}}, pc);
        const auto p = eval_rhs(make_paper_model(PaperModelKind::power_destruction, pp), 0.0, {{"T", T}}, pp);
        EXPECT_NEAR(c[0], p[0], 1e-12 * std::max(1.0, std::abs(p[0])));
        EXPECT_NEAR(c[1], 0.0, 1e-12 * std::max(1.0, x * T));
    }
}

TEST(Catalog, PowerDestructionAtExponentOneIsLinear) {
    // Relaxed schema: the catalog forbids n = 1.
    const auto power = make_paper_model(PaperModelKind::power_destruction, default_params(PaperModelKind::power_destruction));
    const ModelSystem relaxed("power-relaxed", {"T"},
                              {{"a", Constraint::any, std::nullopt, "a"},
                               {"y", Constraint::any, std::nullopt, "y"},
                               {"gamma", Constraint::any, std::nullopt, "gamma"},
                               {"n", Constraint::any, std::nullopt, "n"}},
                              power.rhs(), false, "");
    const auto linear = make_paper_model(PaperModelKind::linear_destruction, default_params(PaperModelKind::linear_destruction));
    oracle::Random rng(11);
    for (int i = 0; i < 50; ++i) {
        const double a = rng.uniform(0, 5), y = rng.uniform(0.1, 3), g = rng.uniform(0, 4), T = rng.uniform(0, 10);
        const ParameterSet pl{{"a", a}, {"y", y}, {"gamma", g}};
        EXPECT_EQ(eval_rhs(relaxed, 0.0, {{"T", T}}, pl.with("n", 1.0))[0], eval_rhs(linear, 0.0, {{"T", T}}, pl)[0]);
    }
}

TEST(Catalog, MechanismDestructionIsIndirect) {
    // dT/dt depends only on T and on the compartments of the destruction route.
    oracle::Random rng(3);
    for (auto k : kMechanismModelKinds) {
        const auto p = default_params(k);
        const auto m = make_mechanism_model(k, p);
        const auto route = destruction_route(k);
        for (int trial = 0; trial < 20; ++trial) {
            std::vector<double> base(m.dimension());
            for (auto& v : base) v = rng.uniform(0.0, 5.0);
            const double dT = eval_rhs(m, 10.0, m.make_state(base), p)[0];
            for (std::size_t j = 1; j < m.dimension(); ++j) {
                if (std::find(route.begin(), route.end(), m.state_names()[j]) != route.end()) continue;
                auto moved = base;
                moved[j] += rng.uniform(0.5, 3.0);
                EXPECT_EQ(eval_rhs(m, 10.0, m.make_state(moved), p)[0], dT) << kind_name(k) << " " << m.state_names()[j];
            }
        }
    }
}

TEST(Catalog, LatentStateIsAQuasiEquilibrium) {
    for (auto k : kMechanismModelKinds) {
        const auto p = default_params(k);
        const auto m = make_mechanism_model(k, p);
        const auto s = latent_state(k, p);
        const auto d = eval_rhs(m, 0.0, s, p);
        // T and the fast compartments start balanced; only slow drift remains.
        EXPECT_NEAR(d[0], 0.0, 1e-12) << kind_name(k);
        EXPECT_LT(s.at("T"), p.at("a") / p.at("y")) << kind_name(k);
    }
    EXPECT_THROW(latent_state(MechanismModelKind::bcell_depletion,
                              default_params(MechanismModelKind::bcell_depletion).with("pi", 1.0)),
                 DomainError);
}

TEST(Catalog, BcellDepletionCollapseAccelerates) {
    const auto k = MechanismModelKind::bcell_depletion;
    const auto p = default_params(k);
    const auto m = make_mechanism_model(k, p);
    const auto traj = integrate_adaptive(m, p, latent_state(k, p), 0.0, default_horizon(k), 1e-9, 1e-12);
    const auto w = collapse_window(m, p, traj);
    const auto verdict = classify_curvature(traj, "T", std::make_pair(w.start, w.steepest));
    EXPECT_EQ(verdict.cls, CurvatureClass::accelerating_decline);
}

TEST(Catalog, ReferencesDescribeTheEquations) {
    EXPECT_NE(model_reference(PaperModelKind::logistic_source).find("a + y T - gamma T^2"), std::string::npos);
    EXPECT_NE(model_reference(PaperModelKind::coupled_agent).find("x T - delta_D D"), std::string::npos);
    for (auto k : kMechanismModelKinds) EXPECT_FALSE(model_reference(k).empty());
}
