// SPDX-License-Identifier: Apache-2.0
#include <prunetir/report.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <iomanip>
#include <sstream>

namespace prunetir
{

namespace
{

    nlohmann::ordered_json to_json(GroupStats const& g)
    {
        return {
            { "episodes", g.episodes },   { "mean", g.mean },
            { "median", g.median },       { "prop_mean", g.prop_mean },
            { "prop_median", g.prop_median },
        };
    }

    std::string fixed(double value, int precision)
    {
        auto out = std::ostringstream {};
        out << std::fixed << std::setprecision(precision) << value;
        return out.str();
    }

} // namespace

std::string format_number(double value)
{
    char buffer[32];
    for (int precision = 1; precision <= 17; ++precision)
    {
        std::snprintf(buffer, sizeof buffer, "%.*g", precision, value);
        if (std::strtod(buffer, nullptr) == value)
            break;
    }
    return buffer;
}

nlohmann::ordered_json to_json(RunSetSummary const& s)
{
    auto histogram = nlohmann::ordered_json::object();
    for (auto const& [turns, count]: s.resolution_histogram.resolved)
        histogram[std::to_string(turns)] = count;

    auto recurrence = nlohmann::ordered_json::object();
    for (auto const& [type, mean]: s.recurrence_by_type)
        recurrence[type] = mean;

    return {
        { "episodes", s.episodes },
        { "infra_failed", s.infra_failed },
        { "pass_at_1", s.pass_at_1 ? nlohmann::ordered_json(*s.pass_at_1) : nlohmann::ordered_json(nullptr) },
        { "tcn_mean", s.tcn_mean },
        { "wtn_mean", s.wtn_mean },
        { "tn_mean", s.tn_mean },
        { "tcn_percentiles",
          { { "p95", s.tcn_percentiles.p95 }, { "p99", s.tcn_percentiles.p99 }, { "max", s.tcn_percentiles.max } } },
        { "recurrence_by_type", recurrence },
        { "resolution_histogram", { { "resolved", histogram }, { "unresolved", s.resolution_histogram.unresolved } } },
        { "err_stats_by_correctness",
          { { "correct", to_json(s.err_stats_by_correctness.correct) },
            { "incorrect", to_json(s.err_stats_by_correctness.incorrect) } } },
    };
}

nlohmann::ordered_json to_json(ReportRow const& row)
{
    return {
        { "label", row.label },
        { "token_estimator", TokenEstimatorName },
        { "coverage",
          { { "cells", row.coverage.cells },
            { "completed", row.coverage.completed },
            { "failed", row.coverage.failed } } },
        { "config", row.config },
        { "metrics", to_json(row.summary) },
    };
}

std::string format_table(std::span<ReportRow const> rows)
{
    auto width = std::size_t { 6 };
    for (auto const& row: rows)
        width = std::max(width, row.label.size());

    auto out = std::ostringstream {};
    auto const line = [&](std::string const& label, std::string const& pass, std::string const& tcn,
                          std::string const& wtn) {
        out << std::left << std::setw(static_cast<int>(width)) << label << "  " << std::right << std::setw(8) << pass
            << "  " << std::setw(8) << tcn << "  " << std::setw(10) << wtn << '\n';
    };
    line("Method", "Pass@1", "TCN", "WTN");
    out << std::string(width + 2 + 8 + 2 + 8 + 2 + 10, '-') << '\n';
    for (auto const& row: rows)
        line(row.label, row.summary.pass_at_1 ? fixed(*row.summary.pass_at_1, 1) : "n/a", fixed(row.summary.tcn_mean, 2),
             fixed(row.summary.wtn_mean, 1));
    out << "tokens: " << TokenEstimatorName << '\n';
    return out.str();
}

std::string histogram_csv(ResolutionHistogram const& histogram)
{
    auto out = std::ostringstream {};
    out << "turns,segments\n";
    for (auto const& [turns, count]: histogram.resolved)
        out << turns << ',' << count << '\n';
    out << "unresolved," << histogram.unresolved << '\n';
    return out.str();
}

} // namespace prunetir
