// SPDX-License-Identifier: Apache-2.0
#include <prunetir/metrics.hpp>

#include <algorithm>
#include <numeric>
#include <set>

namespace prunetir
{

EpisodeRecord make_record(EpisodeResult const& result, std::string problem_id, std::size_t run_index)
{
    auto record = EpisodeRecord {};
    record.problem_id = std::move(problem_id);
    record.run_index = run_index;
    record.correct = result.correct;
    record.infra_failed = result.outcome == EpisodeOutcome::BackendFailure;
    record.tool_calls = result.counters.tool_calls_total;
    record.erroneous_calls = result.counters.erroneous_calls_total;
    record.working_tokens = result.counters.working_tokens_final;
    record.total_tokens = result.counters.total_tokens;

    for (auto const& segment: result.segments)
        record.segments.push_back(
            { segment.start_ordinal, segment.attempts.size(), segment.outcome, segment.resolved_at, segment.error_type });

    for (auto const& turn: result.trajectory.full_log())
        if (turn.executed() && turn.is_error())
            record.errors.push_back({ turn.ordinal, turn.tool_feedback->error_type.value_or("UnknownError") });
    return record;
}

double pass_at_1(std::span<CorrectnessCell const> grid)
{
    struct Tally
    {
        std::size_t correct = 0;
        std::size_t counted = 0;
    };
    auto runs = std::map<std::size_t, Tally> {};
    for (auto const& cell: grid)
    {
        auto& tally = runs[cell.run_index];
        if (cell.infra_failed)
            continue;
        ++tally.counted;
        tally.correct += cell.correct ? 1 : 0;
    }

    auto sum = 0.0;
    auto usable = std::size_t { 0 };
    for (auto const& [run, tally]: runs)
    {
        if (tally.counted == 0)
            continue;
        sum += static_cast<double>(tally.correct) / static_cast<double>(tally.counted);
        ++usable;
    }
    if (usable == 0)
        throw UndefinedInput("pass_at_1: empty correctness grid");
    return 100.0 * sum / static_cast<double>(usable);
}

namespace
{

    template <typename Field>
    double mean_of(std::span<EpisodeRecord const> episodes, Field field)
    {
        auto sum = 0.0;
        auto n = std::size_t { 0 };
        for (auto const& e: episodes)
        {
            if (e.infra_failed)
                continue;
            sum += static_cast<double>(field(e));
            ++n;
        }
        return n == 0 ? 0.0 : sum / static_cast<double>(n);
    }

    GroupStats group_stats(std::vector<EpisodeRecord const*> const& group)
    {
        auto stats = GroupStats {};
        stats.episodes = group.size();
        if (group.empty())
            return stats;
        auto counts = std::vector<double> {};
        auto proportions = std::vector<double> {};
        for (auto const* e: group)
        {
            counts.push_back(static_cast<double>(e->erroneous_calls));
            proportions.push_back(e->tool_calls == 0 ? 0.0
                                                     : static_cast<double>(e->erroneous_calls)
                                                           / static_cast<double>(e->tool_calls));
        }
        auto const n = static_cast<double>(group.size());
        stats.mean = std::accumulate(counts.begin(), counts.end(), 0.0) / n;
        stats.prop_mean = std::accumulate(proportions.begin(), proportions.end(), 0.0) / n;
        stats.median = median(std::move(counts));
        stats.prop_median = median(std::move(proportions));
        return stats;
    }

} // namespace

double tcn(std::span<EpisodeRecord const> episodes)
{
    return mean_of(episodes, [](auto const& e) { return e.tool_calls; });
}

double wtn(std::span<EpisodeRecord const> episodes)
{
    return mean_of(episodes, [](auto const& e) { return e.working_tokens; });
}

double tn(std::span<EpisodeRecord const> episodes)
{
    return mean_of(episodes, [](auto const& e) { return e.total_tokens; });
}

std::size_t nearest_rank(std::span<std::size_t const> values, unsigned percent)
{
    if (values.empty())
        throw UndefinedInput("nearest_rank: no values");
    auto sorted = std::vector<std::size_t>(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    auto const n = sorted.size();
    auto rank = (static_cast<std::size_t>(percent) * n + 99) / 100; // ceil(percent * n / 100)
    rank = std::clamp<std::size_t>(rank, 1, n);
    return sorted[rank - 1];
}

PercentileStats tail_stats(std::span<EpisodeRecord const> episodes)
{
    auto counts = std::vector<std::size_t> {};
    for (auto const& e: episodes)
        if (!e.infra_failed)
            counts.push_back(e.tool_calls);
    if (counts.empty())
        throw UndefinedInput("tail_stats: no episodes");
    return { nearest_rank(counts, 95), nearest_rank(counts, 99), *std::max_element(counts.begin(), counts.end()) };
}

double error_recurrence(std::span<EpisodeRecord const> episodes, std::string_view type)
{
    auto total = 0.0;
    auto n = std::size_t { 0 };
    for (auto const& e: episodes)
    {
        if (e.infra_failed)
            continue;
        ++n;
        auto const first = std::find_if(e.segments.begin(), e.segments.end(), [&](SegmentRecord const& s) {
            return s.outcome == SegmentOutcome::Resolved && s.error_type == type;
        });
        if (first == e.segments.end())
            continue;
        auto const after = *first->resolved_at;
        total += static_cast<double>(std::count_if(e.errors.begin(), e.errors.end(), [&](ErrorRecord const& r) {
            return r.ordinal > after && r.type == type;
        }));
    }
    return n == 0 ? 0.0 : total / static_cast<double>(n);
}

ResolutionHistogram resolution_histogram(std::span<EpisodeRecord const> episodes)
{
    auto histogram = ResolutionHistogram {};
    for (auto const& e: episodes)
    {
        if (e.infra_failed)
            continue;
        for (auto const& s: e.segments)
        {
            if (s.outcome == SegmentOutcome::Resolved)
                ++histogram.resolved[s.attempts - 1];
            else
                ++histogram.unresolved;
        }
    }
    return histogram;
}

double median(std::vector<double> values)
{
    if (values.empty())
        return 0.0;
    std::sort(values.begin(), values.end());
    auto const mid = values.size() / 2;
    if (values.size() % 2 == 1)
        return values[mid];
    return (values[mid - 1] + values[mid]) / 2.0;
}

CorrectnessSplit err_stats_by_correctness(std::span<EpisodeRecord const> episodes)
{
    auto correct = std::vector<EpisodeRecord const*> {};
    auto incorrect = std::vector<EpisodeRecord const*> {};
    for (auto const& e: episodes)
    {
        if (e.infra_failed || !e.correct)
            continue;
        (*e.correct ? correct : incorrect).push_back(&e);
    }
    return { group_stats(correct), group_stats(incorrect) };
}

RunSetSummary summarize(std::span<EpisodeRecord const> episodes)
{
    auto summary = RunSetSummary {};
    summary.episodes = episodes.size();
    summary.infra_failed = static_cast<std::size_t>(
        std::count_if(episodes.begin(), episodes.end(), [](auto const& e) { return e.infra_failed; }));

    auto grid = std::vector<CorrectnessCell> {};
    for (auto const& e: episodes)
        if (e.correct || e.infra_failed)
            grid.push_back({ e.problem_id, e.run_index, e.correct.value_or(false), e.infra_failed });
    try
    {
        summary.pass_at_1 = pass_at_1(grid);
    }
    catch (UndefinedInput const&)
    {
        summary.pass_at_1.reset();
    }

    summary.tcn_mean = tcn(episodes);
    summary.wtn_mean = wtn(episodes);
    summary.tn_mean = tn(episodes);
    if (summary.episodes > summary.infra_failed)
        summary.tcn_percentiles = tail_stats(episodes);

    auto types = std::set<std::string> {};
    for (auto const& e: episodes)
        for (auto const& s: e.segments)
            if (!e.infra_failed)
                types.insert(s.error_type);
    for (auto const& type: types)
        summary.recurrence_by_type[type] = error_recurrence(episodes, type);

    summary.resolution_histogram = resolution_histogram(episodes);
    summary.err_stats_by_correctness = err_stats_by_correctness(episodes);
    return summary;
}

} // namespace prunetir
