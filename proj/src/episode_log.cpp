// SPDX-License-Identifier: Apache-2.0
#include <prunetir/episode_log.hpp>

#include <json.hpp>

#include <istream>
#include <ostream>
#include <stdexcept>

namespace prunetir
{

namespace
{

    std::optional<EventKind> parse_event_kind(std::string_view text)
    {
        for (auto k: { EventKind::Generate, EventKind::Execute, EventKind::Stp, EventKind::Stpr, EventKind::Rtts })
            if (to_string(k) == text)
                return k;
        return std::nullopt;
    }

    template <typename T>
    nlohmann::json optional_json(std::optional<T> const& value)
    {
        return value ? nlohmann::json(*value) : nlohmann::json(nullptr);
    }

    template <typename T>
    std::optional<T> optional_field(nlohmann::json const& j, char const* key)
    {
        auto const it = j.find(key);
        if (it == j.end() || it->is_null())
            return std::nullopt;
        return it->get<T>();
    }

} // namespace

LogEvent make_log_event(std::string_view episode_id, EpisodeEvent const& event, Trajectory const& trajectory)
{
    auto const& turn = trajectory.at(event.ordinal);
    auto line = LogEvent {};
    line.episode_id = std::string(episode_id);
    line.ordinal = event.ordinal;
    line.event = event.kind;
    line.turn_kind = turn.kind == TurnKind::Instruction ? "instruction" : "model";
    line.reasoning = event.kind == EventKind::Stp ? std::string(trajectory.working_reasoning(event.ordinal))
                                                  : turn.reasoning;
    if (turn.tool_call)
        line.code = turn.tool_call->code;
    if (turn.tool_feedback)
    {
        line.stdout_text = turn.tool_feedback->stdout_text;
        line.stderr_text = turn.tool_feedback->stderr_text;
        line.is_error = turn.tool_feedback->is_error;
        line.error_type = turn.tool_feedback->error_type;
        line.suspended = turn.tool_feedback->suspended;
    }
    line.pruned = turn.pruned;
    line.resample_generation = turn.resample_generation;
    line.prompt_tokens = turn.prompt_tokens;
    line.completion_tokens = turn.completion_tokens;
    if (event.segment)
        line.segment_start = event.segment->start_ordinal;
    line.answer = turn.answer;
    return line;
}

std::string to_json_line(LogEvent const& e)
{
    auto j = nlohmann::ordered_json {
        { "episode_id", e.episode_id },
        { "ordinal", e.ordinal },
        { "event", to_string(e.event) },
        { "turn_kind", e.turn_kind },
        { "reasoning", e.reasoning },
        { "code", e.code },
        { "stdout", e.stdout_text },
        { "stderr", e.stderr_text },
        { "is_error", e.is_error },
        { "error_type", optional_json(e.error_type) },
        { "suspended", e.suspended },
        { "pruned", e.pruned },
        { "resample_generation", e.resample_generation },
        { "token_counts", { { "prompt", e.prompt_tokens }, { "completion", e.completion_tokens } } },
        { "segment_start", optional_json(e.segment_start) },
        { "answer", optional_json(e.answer) },
    };
    return j.dump();
}

LogEvent parse_log_event(std::string_view line)
{
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw std::invalid_argument("trajectory log: line is not a JSON object");
    try
    {
        auto e = LogEvent {};
        e.episode_id = j.at("episode_id").get<std::string>();
        e.ordinal = j.at("ordinal").get<Ordinal>();
        auto kind = parse_event_kind(j.at("event").get<std::string>());
        if (!kind)
            throw std::invalid_argument("trajectory log: unknown event " + j.at("event").get<std::string>());
        e.event = *kind;
        e.turn_kind = j.value("turn_kind", std::string("model"));
        e.reasoning = j.value("reasoning", std::string {});
        e.code = j.value("code", std::string {});
        e.stdout_text = j.value("stdout", std::string {});
        e.stderr_text = j.value("stderr", std::string {});
        e.is_error = j.value("is_error", false);
        e.error_type = optional_field<std::string>(j, "error_type");
        e.suspended = j.value("suspended", false);
        e.pruned = j.value("pruned", false);
        e.resample_generation = j.value("resample_generation", std::size_t { 0 });
        if (auto const tc = j.find("token_counts"); tc != j.end() && tc->is_object())
        {
            e.prompt_tokens = tc->value("prompt", std::size_t { 0 });
            e.completion_tokens = tc->value("completion", std::size_t { 0 });
        }
        e.segment_start = optional_field<Ordinal>(j, "segment_start");
        e.answer = optional_field<std::string>(j, "answer");
        return e;
    }
    catch (nlohmann::json::exception const& ex)
    {
        throw std::invalid_argument(std::string("trajectory log: ") + ex.what());
    }
}

EpisodeObserver log_writer(std::string episode_id, std::ostream& out)
{
    return [id = std::move(episode_id), &out](EpisodeEvent const& event, Trajectory const& trajectory,
                                              ControllerState const&) {
        out << to_json_line(make_log_event(id, event, trajectory)) << '\n';
    };
}

// ----------------------------------------------------------------------------

EpisodeSummary make_summary(EpisodeResult const& result, std::string episode_id, std::string problem_id,
                            std::size_t run_index, double seconds)
{
    auto s = EpisodeSummary {};
    s.episode_id = std::move(episode_id);
    s.problem_id = std::move(problem_id);
    s.run_index = run_index;
    s.outcome = result.outcome;
    s.correct = result.correct;
    s.answer = result.answer;
    s.tcn = result.counters.tool_calls_total;
    s.erroneous = result.counters.erroneous_calls_total;
    s.wtn = result.counters.working_tokens_final;
    s.wtn_peak = result.counters.working_tokens_peak;
    s.tn = result.counters.total_tokens;
    s.stp = result.counters.stp_count;
    s.stpr = result.counters.stpr_count;
    s.rtts = result.counters.rtts_count;
    s.generations = result.counters.generations_used;
    s.seconds = seconds;
    s.failure = result.failure;
    return s;
}

std::string to_json_line(EpisodeSummary const& s)
{
    auto j = nlohmann::ordered_json {
        { "episode_id", s.episode_id },
        { "problem_id", s.problem_id },
        { "run_index", s.run_index },
        { "outcome", to_string(s.outcome) },
        { "correct", optional_json(s.correct) },
        { "answer", optional_json(s.answer) },
        { "tcn", s.tcn },
        { "erroneous", s.erroneous },
        { "wtn", s.wtn },
        { "wtn_peak", s.wtn_peak },
        { "tn", s.tn },
        { "stp", s.stp },
        { "stpr", s.stpr },
        { "rtts", s.rtts },
        { "generations", s.generations },
        { "seconds", s.seconds },
        { "failure", s.failure },
        { "token_estimator", s.token_estimator },
    };
    return j.dump();
}

EpisodeSummary parse_summary(std::string_view line)
{
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw std::invalid_argument("episode summary: line is not a JSON object");
    try
    {
        auto s = EpisodeSummary {};
        s.episode_id = j.at("episode_id").get<std::string>();
        s.problem_id = j.at("problem_id").get<std::string>();
        s.run_index = j.at("run_index").get<std::size_t>();
        auto outcome = parse_outcome(j.at("outcome").get<std::string>());
        if (!outcome)
            throw std::invalid_argument("episode summary: unknown outcome");
        s.outcome = *outcome;
        s.correct = optional_field<bool>(j, "correct");
        s.answer = optional_field<std::string>(j, "answer");
        s.tcn = j.at("tcn").get<std::size_t>();
        s.erroneous = j.value("erroneous", std::size_t { 0 });
        s.wtn = j.at("wtn").get<std::size_t>();
        s.wtn_peak = j.value("wtn_peak", s.wtn);
        s.tn = j.at("tn").get<std::size_t>();
        s.stp = j.at("stp").get<std::size_t>();
        s.stpr = j.at("stpr").get<std::size_t>();
        s.rtts = j.at("rtts").get<std::size_t>();
        s.generations = j.value("generations", std::size_t { 0 });
        s.seconds = j.value("seconds", 0.0);
        s.failure = j.value("failure", std::string {});
        s.token_estimator = j.value("token_estimator", std::string("chars/4"));
        return s;
    }
    catch (nlohmann::json::exception const& ex)
    {
        throw std::invalid_argument(std::string("episode summary: ") + ex.what());
    }
}

EpisodeRecord record_from_log(EpisodeSummary const& summary, std::span<LogEvent const> events)
{
    auto record = EpisodeRecord {};
    record.problem_id = summary.problem_id;
    record.run_index = summary.run_index;
    record.correct = summary.correct;
    record.infra_failed = summary.outcome == EpisodeOutcome::BackendFailure;
    record.working_tokens = summary.wtn;
    record.total_tokens = summary.tn;

    auto open = std::optional<SegmentRecord> {};
    for (auto const& e: events)
    {
        if (e.event == EventKind::Execute)
        {
            ++record.tool_calls;
            if (e.is_error)
            {
                ++record.erroneous_calls;
                auto const type = e.error_type.value_or("UnknownError");
                record.errors.push_back({ e.ordinal, type });
                if (!open)
                    open = SegmentRecord { e.ordinal, 0, SegmentOutcome::Open, std::nullopt, type };
                ++open->attempts;
            }
            else if (open)
            {
                ++open->attempts;
                open->outcome = SegmentOutcome::Resolved;
                open->resolved_at = e.ordinal;
                record.segments.push_back(*open);
                open.reset();
            }
        }
        else if (e.event == EventKind::Stpr && open)
        {
            open->outcome = SegmentOutcome::Stuck;
            record.segments.push_back(*open);
            open.reset();
        }
    }
    if (open)
        record.segments.push_back(*open);
    return record;
}

std::vector<LogEvent> read_log(std::istream& in)
{
    auto events = std::vector<LogEvent> {};
    for (auto line = std::string {}; std::getline(in, line);)
        if (line.find_first_not_of(" \t\r") != std::string::npos)
            events.push_back(parse_log_event(line));
    return events;
}

} // namespace prunetir
