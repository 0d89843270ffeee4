// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <prunetir/controller.hpp>
#include <prunetir/trajectory.hpp>

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace prunetir
{

/// Aggregation needs at least one usable input.
class UndefinedInput: public std::invalid_argument
{
  public:
    using std::invalid_argument::invalid_argument;
};

struct SegmentRecord
{
    Ordinal start = 0;
    std::size_t attempts = 0;
    SegmentOutcome outcome = SegmentOutcome::Open;
    std::optional<Ordinal> resolved_at;
    std::string error_type;

    bool operator==(SegmentRecord const&) const = default;
};

struct ErrorRecord
{
    Ordinal ordinal = 0;
    std::string type;

    bool operator==(ErrorRecord const&) const = default;
};

/// Everything the aggregates need from one episode.
struct EpisodeRecord
{
    std::string problem_id;
    std::size_t run_index = 0;
    std::optional<bool> correct;
    bool infra_failed = false;
    std::size_t tool_calls = 0;
    std::size_t erroneous_calls = 0;
    std::size_t working_tokens = 0;
    std::size_t total_tokens = 0;
    std::vector<SegmentRecord> segments;
    std::vector<ErrorRecord> errors; // executed erroneous calls in order

    bool operator==(EpisodeRecord const&) const = default;
};

[[nodiscard]] EpisodeRecord make_record(EpisodeResult const& result, std::string problem_id, std::size_t run_index);

struct CorrectnessCell
{
    std::string problem_id;
    std::size_t run_index = 0;
    bool correct = false;
    bool infra_failed = false;
};

struct PercentileStats
{
    std::size_t p95 = 0;
    std::size_t p99 = 0;
    std::size_t max = 0;

    bool operator==(PercentileStats const&) const = default;
};

struct ResolutionHistogram
{
    std::map<std::size_t, std::size_t> resolved; // turns needed -> segments
    std::size_t unresolved = 0;

    bool operator==(ResolutionHistogram const&) const = default;
};

struct GroupStats
{
    std::size_t episodes = 0;
    double mean = 0.0;
    double median = 0.0;
    double prop_mean = 0.0;
    double prop_median = 0.0;

    bool operator==(GroupStats const&) const = default;
};

struct CorrectnessSplit
{
    GroupStats correct;
    GroupStats incorrect;

    bool operator==(CorrectnessSplit const&) const = default;
};

struct RunSetSummary
{
    std::size_t episodes = 0;
    std::size_t infra_failed = 0;
    std::optional<double> pass_at_1;
    double tcn_mean = 0.0;
    double wtn_mean = 0.0;
    double tn_mean = 0.0;
    PercentileStats tcn_percentiles;
    std::map<std::string, double> recurrence_by_type;
    ResolutionHistogram resolution_histogram;
    CorrectnessSplit err_stats_by_correctness;

    bool operator==(RunSetSummary const&) const = default;
};

/// Mean over runs of per-run accuracy, in percent. Infrastructure-failed cells leave both numerator
/// and denominator of their run. Throws UndefinedInput when no run has a usable cell.
[[nodiscard]] double pass_at_1(std::span<CorrectnessCell const> grid);

// Episode aggregates. Infrastructure-failed episodes are skipped by all of them.
[[nodiscard]] double tcn(std::span<EpisodeRecord const> episodes);
[[nodiscard]] double wtn(std::span<EpisodeRecord const> episodes);
[[nodiscard]] double tn(std::span<EpisodeRecord const> episodes);

/// Nearest-rank percentile: the ceil(q·n)-th smallest value, q in percent.
[[nodiscard]] std::size_t nearest_rank(std::span<std::size_t const> values, unsigned percent);

/// Throws UndefinedInput on an empty input.
[[nodiscard]] PercentileStats tail_stats(std::span<EpisodeRecord const> episodes);

/// Mean count of `type` errors after the first resolved segment that opened with `type`.
[[nodiscard]] double error_recurrence(std::span<EpisodeRecord const> episodes, std::string_view type);

[[nodiscard]] ResolutionHistogram resolution_histogram(std::span<EpisodeRecord const> episodes);

[[nodiscard]] CorrectnessSplit err_stats_by_correctness(std::span<EpisodeRecord const> episodes);

[[nodiscard]] double median(std::vector<double> values);

/// Every aggregate at once. pass_at_1 is left empty when no episode carries a correctness label.
[[nodiscard]] RunSetSummary summarize(std::span<EpisodeRecord const> episodes);

} // namespace prunetir
