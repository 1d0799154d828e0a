#pragma once

// CSV trajectories and JSON reports.

#include <charconv>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "qss/analysis.hpp"
#include "qss/claims.hpp"
#include "qss/error.hpp"
#include "qss/integrate.hpp"
#include "qss/model.hpp"

namespace qss {

using Json = nlohmann::ordered_json;

inline constexpr int kJsonSchemaVersion = 1;

/// Decimal text with 17 significant digits: parses back to the same double.
inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Header `t,<names>`, one row per time point, LF line endings.
inline void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
    out << "t";
    for (const auto& name : traj.names()) out << ',' << name;
    out << '\n';
    for (std::size_t i = 0; i < traj.size(); ++i) {
        out << format_double(traj.times()[i]);
        for (double v : traj.rows()[i]) out << ',' << format_double(v);
        out << '\n';
    }
}

namespace detail {

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        fields.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return fields;
}

inline double parse_field(std::string_view text, std::size_t line) {
    while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
    while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
        throw UsageError("CSV line " + std::to_string(line) + ": '" + std::string(text) + "' is not a number");
    }
    return value;
}

}  // namespace detail

/// Reads the format written by write_trajectory_csv (LF or CRLF).
inline Trajectory read_trajectory_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw UsageError("CSV input is empty");
    const auto header = detail::split_csv_line(line);
    if (header.empty() || header.front() != "t") throw UsageError("CSV header must start with 't'");
    std::vector<std::string> names(header.begin() + 1, header.end());
    if (names.empty()) throw UsageError("CSV header names no state components");

    std::vector<double> times;
    std::vector<std::vector<double>> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != header.size()) {
            throw UsageError("CSV line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                             " fields, expected " + std::to_string(header.size()));
        }
        times.push_back(detail::parse_field(fields[0], line_no));
        std::vector<double> row;
        for (std::size_t i = 1; i < fields.size(); ++i) row.push_back(detail::parse_field(fields[i], line_no));
        rows.push_back(std::move(row));
    }
    return Trajectory(std::move(names), std::move(times), std::move(rows), SolverInfo{"csv", 0.0, 0.0, 0.0, 0, 0});
}

inline Json to_json(const ParameterSet& params) {
    Json out = Json::object();
    for (const auto& [k, v] : params.entries()) out[k] = v;
    return out;
}

inline Json to_json(const StateVector& state) {
    Json out = Json::object();
    for (std::size_t i = 0; i < state.size(); ++i) out[state.names()[i]] = state[i];
    return out;
}

inline Json to_json(const SteadyStateReport& report) {
    Json out;
    out["values"] = to_json(report.values);
    out["residual"] = report.residual;
    out["method"] = to_string(report.method);
    out["relaxation_rate"] = report.relaxation_rate;
    out["time_to_epsilon"] = report.time_to_epsilon ? Json(*report.time_to_epsilon) : Json(nullptr);
    return out;
}

inline Json to_json(const CurvatureVerdict& v) {
    Json out;
    out["class"] = to_string(v.cls);
    out["traditional_label"] = v.traditional;
    out["window"] = Json::array({v.window.first, v.window.second});
    out["positive_fraction"] = v.positive_fraction;
    out["negative_fraction"] = v.negative_fraction;
    out["zero_fraction"] = v.zero_fraction;
    out["samples"] = v.samples;
    return out;
}

inline Json to_json(const ClaimReport& report) {
    Json out;
    out["schema"] = kJsonSchemaVersion;
    out["claim_id"] = report.claim_id;
    out["verdict"] = to_string(report.verdict);
    out["narrative"] = report.narrative;
    Json settings = Json::object();
    for (const auto& [k, v] : report.settings) settings[k] = v;
    out["settings"] = settings;
    Json grid = Json::array();
    for (const auto& pt : report.grid) {
        Json row;
        row["label"] = pt.label;
        row["model"] = pt.model;
        row["params"] = to_json(pt.params);
        Json metrics = Json::object();
        for (const auto& [k, v] : pt.metrics) metrics[k] = v;
        row["metrics"] = metrics;
        Json labels = Json::object();
        for (const auto& [k, v] : pt.labels) labels[k] = v;
        row["labels"] = labels;
        row["passed"] = pt.passed;
        row["note"] = pt.note;
        row["error"] = pt.error.empty() ? Json(nullptr) : Json(pt.error);
        grid.push_back(std::move(row));
    }
    out["grid"] = grid;
    return out;
}

/// Sweep table: the swept parameter, one column per metric, then `error`.
inline void write_sweep_csv(std::ostream& out, const std::string& parameter, const std::vector<Metric>& metrics,
                            const std::vector<SweepRow>& rows) {
    out << parameter;
    for (Metric m : metrics) out << ',' << to_string(m);
    out << ",error\n";
    for (const auto& row : rows) {
        out << format_double(row.value);
        for (Metric m : metrics) {
            out << ',';
            if (m == Metric::curvature) {
                out << row.curvature;
            } else if (auto it = row.numbers.find(to_string(m)); it != row.numbers.end()) {
                out << format_double(it->second);
            }
        }
        std::string error = row.error;
        for (char& c : error) {
            if (c == ',' || c == '\n' || c == '\r') c = ';';
        }
        out << ',' << error << '\n';
    }
}

}  // namespace qss
