// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <prunetir/metrics.hpp>

#include <json.hpp>

#include <cstddef>
#include <span>
#include <string>

namespace prunetir
{

struct Coverage
{
    std::size_t cells = 0;     // problems × runs scheduled
    std::size_t completed = 0; // summaries present
    std::size_t failed = 0;    // backend_failure outcomes among them

    bool operator==(Coverage const&) const = default;
};

/// One row of a comparison table, usually one method or ablation step.
struct ReportRow
{
    std::string label;
    RunSetSummary summary;
    Coverage coverage;
    nlohmann::ordered_json config = nlohmann::ordered_json::object();
};

inline constexpr char const* TokenEstimatorName = "chars/4";

[[nodiscard]] nlohmann::ordered_json to_json(RunSetSummary const& summary);
[[nodiscard]] nlohmann::ordered_json to_json(ReportRow const& row);

/// Fixed-width table with rows = labels and columns Pass@1 / TCN / WTN.
[[nodiscard]] std::string format_table(std::span<ReportRow const> rows);

/// "turns,segments" lines, then an "unresolved" row.
[[nodiscard]] std::string histogram_csv(ResolutionHistogram const& histogram);

/// Shortest round-trip decimal rendering used in file names and tables.
[[nodiscard]] std::string format_number(double value);

} // namespace prunetir
