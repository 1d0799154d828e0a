#include <gtest/gtest.h>

#include <regex>
#include <sstream>

#include "qss/catalog.hpp"
#include "qss/io.hpp"
#include "qss/svg.hpp"

using namespace qss;

namespace {

std::size_t count(const std::string& text, const std::string& needle) {
    std::size_t n = 0;
    for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
    return n;
}

}  // namespace

TEST(TrajectoryCsv, RoundTripsBitExactly) {
    const ParameterSet p{{"a", 1.0}, {"y", 0.3}, {"x", 2.0}, {"delta_D", 3.0}};
    const auto m = make_paper_model(PaperModelKind::coupled_agent, p);
    const auto traj = integrate_adaptive(m, p, {{"T", 3.0}, {"D", 0.1}}, 0.0, 7.0, 1e-9, 1e-12);
    std::stringstream ss;
    write_trajectory_csv(ss, traj);
    const std::string text = ss.str();
    EXPECT_EQ(text.rfind("t,T,D\n", 0), 0u);
    EXPECT_EQ(text.find('\r'), std::string::npos);
    const auto back = read_trajectory_csv(ss);
    EXPECT_EQ(back.names(), traj.names());
    EXPECT_EQ(back.times(), traj.times());
    EXPECT_EQ(back.rows(), traj.rows());
}

TEST(TrajectoryCsv, AcceptsCrlfAndRejectsGarbage) {
    std::istringstream crlf("t,T\r\n0,1\r\n1,0.5\r\n");
    const auto traj = read_trajectory_csv(crlf);
    EXPECT_EQ(traj.size(), 2u);
    EXPECT_EQ(traj.rows()[1][0], 0.5);

    std::istringstream empty("");
    EXPECT_THROW((void)read_trajectory_csv(empty), UsageError);
    std::istringstream bad_header("time,T\n0,1\n1,2\n");
    EXPECT_THROW((void)read_trajectory_csv(bad_header), UsageError);
    std::istringstream bad_field("t,T\n0,1\n1,abc\n");
    EXPECT_THROW((void)read_trajectory_csv(bad_field), UsageError);
    std::istringstream short_row("t,T,D\n0,1,2\n1,2\n");
    EXPECT_THROW((void)read_trajectory_csv(short_row), UsageError);
    std::istringstream one_row("t,T\n0,1\n");
    EXPECT_THROW((void)read_trajectory_csv(one_row), InsufficientDataError);
}

TEST(FormatDouble, SeventeenSignificantDigits) {
    EXPECT_EQ(format_double(0.1), "0.10000000000000001");
    EXPECT_EQ(format_double(5.0), "5");
    EXPECT_EQ(std::stod(format_double(1.0 / 3.0)), 1.0 / 3.0);
}

TEST(Json, ClaimReportCarriesSchemaVersion) {
    ClaimReport r;
    r.claim_id = "x";
    r.verdict = Verdict::pass;
    GridPoint pt;
    pt.label = "p";
    pt.metrics = {{"T*", 0.5}};
    pt.passed = true;
    r.grid.push_back(pt);
    const auto j = to_json(r);
    EXPECT_EQ(j["schema"], 1);
    EXPECT_EQ(j["verdict"], "pass");
    EXPECT_EQ(j["grid"][0]["metrics"]["T*"], 0.5);
    EXPECT_TRUE(j["grid"][0]["error"].is_null());
}

TEST(SweepCsv, ColumnsAndErrors) {
    SweepRow ok;
    ok.value = 1.0;
    ok.numbers["T*"] = 0.5;
    ok.curvature = "decelerating-decline";
    SweepRow failed;
    failed.value = 2.0;
    failed.error = "no steady state, giving up";
    std::ostringstream out;
    write_sweep_csv(out, "gamma", {Metric::steady_state, Metric::curvature}, {ok, failed});
    EXPECT_EQ(out.str(), "gamma,T*,curvature,error\n1,0.5,decelerating-decline,\n2,,,no steady state; giving up\n");
}

TEST(Svg, OnePolylinePerSeries) {
    std::vector<PlotSeries> series = {
        {"healthy", {0, 1, 2}, {1, 1.5, 1.8}}, {"linear", {0, 1, 2}, {1, 1.2, 1.3}}, {"power", {0, 1, 2}, {1, 1.1, 1.15}}};
    const auto svg = render_plot(series, {"relaxation", "t", "T", 720, 480, {}});
    EXPECT_EQ(count(svg, "<polyline"), 3u);
    EXPECT_NE(svg.find("<svg xmlns=\"http://www.w3.org/2000/svg\""), std::string::npos);
    EXPECT_NE(svg.find(">healthy</text>"), std::string::npos);
    EXPECT_EQ(svg, render_plot(series, {"relaxation", "t", "T", 720, 480, {}}));
}

TEST(Svg, ConstantSeriesIsHorizontalWithMargin) {
    const auto svg = render_plot({{"flat", {0, 1, 2}, {2, 2, 2}}});
    const std::regex points("points=\"([^\"]*)\"");
    std::smatch m;
    ASSERT_TRUE(std::regex_search(svg, m, points));
    std::istringstream in(m[1].str());
    std::string pair;
    std::string first_y;
    while (in >> pair) {
        const auto y = pair.substr(pair.find(',') + 1);
        if (first_y.empty()) first_y = y;
        EXPECT_EQ(y, first_y);
    }
    // Axis spans 2 +- 0.1.
    EXPECT_NE(svg.find(">1.9</text>"), std::string::npos);
    EXPECT_NE(svg.find(">2.1</text>"), std::string::npos);
}

TEST(Svg, BandsAndErrors) {
    PlotOptions options;
    options.bands.push_back({1.0, 2.0, 0});
    const auto svg = render_plot({{"T", {0, 1, 2, 3}, {4, 3, 1, 0}}}, options);
    EXPECT_EQ(count(svg, "class=\"band\""), 1u);
    EXPECT_THROW((void)render_plot({}), UsageError);
    EXPECT_THROW((void)render_plot({{"bad", {0, 0}, {1, 2}}}), UsageError);
    EXPECT_THROW((void)render_plot({{"bad", {0, 1}, {1}}}), UsageError);
    options.bands = {{0.0, 1.0, 3}};
    EXPECT_THROW((void)render_plot({{"T", {0, 1}, {1, 2}}}, options), UsageError);
}

TEST(Svg, EscapesLabels) {
    const auto svg = render_plot({{"a<b & c", {0, 1}, {0, 1}}});
    EXPECT_NE(svg.find("a&lt;b &amp; c"), std::string::npos);
}
