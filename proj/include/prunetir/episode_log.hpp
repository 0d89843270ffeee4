// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <prunetir/controller.hpp>
#include <prunetir/metrics.hpp>

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace prunetir
{

/// One line of a trajectory log.
struct LogEvent
{
    std::string episode_id;
    Ordinal ordinal = 0;
    EventKind event = EventKind::Generate;
    std::string turn_kind = "model"; // "model" | "instruction"
    std::string reasoning;
    std::string code;
    std::string stdout_text;
    std::string stderr_text;
    bool is_error = false;
    std::optional<std::string> error_type;
    bool suspended = false;
    bool pruned = false;
    std::size_t resample_generation = 0;
    std::size_t prompt_tokens = 0;
    std::size_t completion_tokens = 0;
    std::optional<Ordinal> segment_start; // stp / stpr
    std::optional<std::string> answer;

    bool operator==(LogEvent const&) const = default;
};

/// Builds the log line for an observer callback. For stp events `reasoning` is the merged text.
[[nodiscard]] LogEvent make_log_event(std::string_view episode_id, EpisodeEvent const& event,
                                      Trajectory const& trajectory);

[[nodiscard]] std::string to_json_line(LogEvent const& event);

/// Throws std::invalid_argument on a malformed line.
[[nodiscard]] LogEvent parse_log_event(std::string_view line);

/// Observer that streams events to `out`, one JSON object per line.
[[nodiscard]] EpisodeObserver log_writer(std::string episode_id, std::ostream& out);

/// Per-episode summary line.
struct EpisodeSummary
{
    std::string episode_id;
    std::string problem_id;
    std::size_t run_index = 0;
    EpisodeOutcome outcome = EpisodeOutcome::Answered;
    std::optional<bool> correct;
    std::optional<std::string> answer;
    std::size_t tcn = 0;
    std::size_t erroneous = 0;
    std::size_t wtn = 0;
    std::size_t wtn_peak = 0;
    std::size_t tn = 0;
    std::size_t stp = 0;
    std::size_t stpr = 0;
    std::size_t rtts = 0;
    std::size_t generations = 0;
    double seconds = 0.0;
    std::string failure;
    std::string token_estimator = "chars/4";

    bool operator==(EpisodeSummary const&) const = default;
};

[[nodiscard]] EpisodeSummary make_summary(EpisodeResult const& result, std::string episode_id, std::string problem_id,
                                          std::size_t run_index, double seconds);

[[nodiscard]] std::string to_json_line(EpisodeSummary const& summary);
[[nodiscard]] EpisodeSummary parse_summary(std::string_view line);

/// Rebuilds an EpisodeRecord from a summary and the episode's trajectory log events. Segments are
/// replayed from execute events; stpr events close the open segment as stuck.
[[nodiscard]] EpisodeRecord record_from_log(EpisodeSummary const& summary, std::span<LogEvent const> events);

/// Reads every non-empty line of a JSONL stream.
[[nodiscard]] std::vector<LogEvent> read_log(std::istream& in);

} // namespace prunetir
