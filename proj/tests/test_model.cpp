#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "qss/catalog.hpp"
#include "qss/model.hpp"

using namespace qss;

namespace {

ModelSystem healthy(const ParameterSet& p = {{"a", 1.0}, {"y", 1.0}}) {
    return make_paper_model(PaperModelKind::healthy, p);
}

}  // namespace

TEST(ParameterSet, RejectsNonfiniteValues) {
    EXPECT_THROW((ParameterSet{{"a", std::numeric_limits<double>::quiet_NaN()}}), ParameterError);
    EXPECT_THROW((ParameterSet{{"a", std::numeric_limits<double>::infinity()}}), ParameterError);
    EXPECT_THROW(ParameterSet(ParameterSet{{"a", 1.0}}).with("b", -INFINITY), ParameterError);
}

TEST(ParameterSet, MissingLookupIsAnErrorNamingTheParameter) {
    const ParameterSet p{{"a", 1.0}};
    try {
        (void)p.at("y");
        FAIL() << "expected ParameterError";
    } catch (const ParameterError& e) {
        EXPECT_EQ(e.parameter(), "y");
        EXPECT_NE(std::string(e.what()).find("'y'"), std::string::npos);
    }
    EXPECT_FALSE(p.find("y").has_value());
}

TEST(ParameterSet, WithWithoutMerged) {
    const ParameterSet p{{"a", 1.0}, {"y", 2.0}};
    EXPECT_EQ(p.with("a", 5.0).at("a"), 5.0);
    EXPECT_EQ(p.at("a"), 1.0);
    EXPECT_FALSE(p.without("a").contains("a"));
    const ParameterSet m = p.merged({{"y", 3.0}, {"z", 4.0}});
    EXPECT_EQ(m.at("y"), 3.0);
    EXPECT_EQ(m.at("z"), 4.0);
    EXPECT_EQ(m.size(), 3u);
}

TEST(StateVector, NamesMustBeUniqueAndMatchValues) {
    EXPECT_THROW(StateVector({"T", "T"}, {1.0, 2.0}), ShapeError);
    EXPECT_THROW(StateVector({"T"}, {1.0, 2.0}), ShapeError);
    const StateVector s{{"T", 1.0}, {"D", 2.0}};
    EXPECT_EQ(s.at("D"), 2.0);
    EXPECT_EQ(s.index_of("T"), 0u);
    EXPECT_THROW((void)s.at("X"), ShapeError);
}

TEST(EvalRhs, HealthyIsZeroAtItsSteadyLevel) {
    const ParameterSet p{{"a", 2.0}, {"y", 0.5}};
    EXPECT_EQ(eval_rhs(healthy(p), 0.0, {{"T", 4.0}}, p)[0], 0.0);
}

TEST(EvalRhs, EmptySystemStaysEmpty) {
    const ParameterSet p{{"a", 0.0}, {"y", 1.0}};
    EXPECT_EQ(eval_rhs(healthy(p), 0.0, {{"T", 0.0}}, p)[0], 0.0);
}

TEST(EvalRhs, PowerDestructionDirectSubstitution) {
    const ParameterSet p{{"a", 1.0}, {"y", 1.0}, {"gamma", 1.0}, {"n", 2.0}};
    const auto m = make_paper_model(PaperModelKind::power_destruction, p);
    EXPECT_DOUBLE_EQ(eval_rhs(m, 0.0, {{"T", 2.0}}, p)[0], -5.0);
}

TEST(EvalRhs, MissingParameterAndShapeMismatch) {
    const auto m = healthy();
    try {
        (void)eval_rhs(m, 0.0, {{"T", 1.0}}, ParameterSet{{"a", 1.0}});
        FAIL();
    } catch (const ParameterError& e) {
        EXPECT_EQ(e.parameter(), "y");
    }
    EXPECT_THROW((void)eval_rhs(m, 0.0, {{"T", 1.0}, {"D", 1.0}}, {{"a", 1.0}, {"y", 1.0}}), ShapeError);
    EXPECT_THROW((void)eval_rhs(m, 0.0, {{"X", 1.0}}, {{"a", 1.0}, {"y", 1.0}}), ShapeError);
}

TEST(EvalRhs, IsBitwiseRepeatable) {
    const auto p = default_params(MechanismModelKind::cytokine_inversion);
    const auto m = make_mechanism_model(MechanismModelKind::cytokine_inversion, p);
    const auto s = latent_state(MechanismModelKind::cytokine_inversion, p);
    const auto first = eval_rhs(m, 3.25, s, p);
    for (int i = 0; i < 5; ++i) EXPECT_EQ(eval_rhs(m, 3.25, s, p), first);
}

TEST(Validate, ValidInputGivesEmptyReport) {
    EXPECT_TRUE(validate(healthy(), {{"a", 1.0}, {"y", 1.0}}, {{"T", 10.0}}).empty());
}

TEST(Validate, MissingParameterIsReported) {
    const auto report = validate(healthy(), {{"a", 1.0}}, {{"T", 10.0}});
    ASSERT_EQ(report.size(), 1u);
    EXPECT_EQ(report[0].subject, "y");
    EXPECT_EQ(report[0].kind, Violation::Kind::parameter);
}

TEST(Validate, PowerExponentMustExceedOne) {
    const auto m = make_paper_model(PaperModelKind::power_destruction, default_params(PaperModelKind::power_destruction));
    const auto report = validate(m, {{"a", 1.0}, {"y", 1.0}, {"gamma", 1.0}, {"n", 0.5}}, {{"T", 1.0}});
    ASSERT_EQ(report.size(), 1u);
    EXPECT_EQ(report[0].subject, "n");
    EXPECT_NE(report[0].message.find("> 1"), std::string::npos);
}

TEST(Validate, ReportsEveryViolationAtOnce) {
    const auto m = healthy();
    const StateVector bad_state({"T"}, {-1.0});
    const auto report = validate(m, {{"a", -1.0}, {"q", 1.0}}, bad_state);
    // a negative, y missing, q undeclared, T negative
    EXPECT_EQ(report.size(), 4u);
    const auto wrong_dim = validate(m, {{"a", 1.0}, {"y", 1.0}}, {{"T", 1.0}, {"D", 1.0}});
    EXPECT_EQ(wrong_dim.size(), 1u);
    const auto nonfinite = validate(m, {{"a", 1.0}, {"y", 1.0}}, StateVector({"T"}, {NAN}));
    EXPECT_EQ(nonfinite.size(), 1u);
}

TEST(Validate, RequireValidPicksErrorClass) {
    const auto m = healthy();
    EXPECT_THROW(require_valid(m, {{"a", 1.0}}, {{"T", 1.0}}), ParameterError);
    EXPECT_THROW(require_valid(m, {{"a", 1.0}, {"y", 1.0}}, StateVector({"T"}, {-2.0})), ShapeError);
    EXPECT_NO_THROW(require_valid(m, {{"a", 1.0}, {"y", 1.0}}, {{"T", 1.0}}));
}

TEST(ModelSystem, RejectsDuplicateNamesAndEmptyStates) {
    auto rhs = [](double, std::span<const double>, std::span<const double>, std::span<double> out) { out[0] = 0; };
    EXPECT_THROW(ModelSystem("m", {}, {}, rhs, false, ""), ShapeError);
    EXPECT_THROW(ModelSystem("m", {"T", "T"}, {}, rhs, false, ""), ShapeError);
    EXPECT_THROW(ModelSystem("m", {"T"}, {{"a", Constraint::any, std::nullopt, "a"}, {"a", Constraint::any, std::nullopt, "a"}},
                             rhs, false, ""),
                 ParameterError);
}

TEST(BindParameters, UsesSchemaDefaults) {
    auto rhs = [](double, std::span<const double>, std::span<const double> p, std::span<double> out) { out[0] = p[0]; };
    const ModelSystem m("m", {"T"}, {{"k", Constraint::positive, 2.5, "k"}}, rhs, false, "");
    EXPECT_EQ(bind_parameters(m, {}), std::vector<double>{2.5});
    EXPECT_EQ(eval_rhs(m, 0.0, {{"T", 0.0}}, {})[0], 2.5);
    EXPECT_THROW(bind_parameters(m, {{"k", 0.0}}), ParameterError);
}
