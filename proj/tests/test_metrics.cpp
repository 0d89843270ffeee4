// SPDX-License-Identifier: Apache-2.0
#include <prunetir/metrics.hpp>

#include <doctest.h>

#include <random>

#include "fixtures.hpp"

using namespace prunetir;
using namespace fixtures;

namespace
{

EpisodeRecord episode(std::size_t tool_calls, std::size_t errors, std::optional<bool> correct = std::nullopt,
                      std::size_t wtn = 0)
{
    auto e = EpisodeRecord {};
    e.tool_calls = tool_calls;
    e.erroneous_calls = errors;
    e.correct = correct;
    e.working_tokens = wtn;
    return e;
}

} // namespace

TEST_CASE("pass_at_1 averages per-run accuracy")
{
    auto rng = std::mt19937_64 { 3 };
    auto grid = std::vector<CorrectnessCell> {};
    for (int p = 0; p < 30; ++p)
        for (std::size_t r = 0; r < 32; ++r)
            grid.push_back({ "p" + std::to_string(p), r, rng() % 3 != 0, false });

    // spreadsheet-style recomputation: one column per run
    auto total = 0.0;
    for (std::size_t r = 0; r < 32; ++r)
    {
        auto correct = 0;
        for (auto const& c: grid)
            if (c.run_index == r && c.correct)
                ++correct;
        total += correct / 30.0;
    }
    CHECK(pass_at_1(grid) == doctest::Approx(100.0 * total / 32.0).epsilon(1e-12));
}

TEST_CASE("pass_at_1 edge cases")
{
    CHECK_THROWS_AS((void)pass_at_1({}), UndefinedInput);
    auto const failed = std::vector<CorrectnessCell> { { "a", 0, false, true } };
    CHECK_THROWS_AS((void)pass_at_1(failed), UndefinedInput);
    auto const mixed = std::vector<CorrectnessCell> { { "a", 0, true, false }, { "b", 0, false, true } };
    CHECK(pass_at_1(mixed) == 100.0);
}

TEST_CASE("tcn counts pruned calls")
{
    auto const r = run_script({ err(), err(), ok(), answer("1") }, EngineConfig {});
    auto const rec = make_record(r, "p", 0);
    CHECK(rec.tool_calls == 3);
    auto const records = std::vector<EpisodeRecord> { rec };
    CHECK(tcn(records) == 3.0);
}

TEST_CASE("means skip infrastructure failures")
{
    auto records = std::vector<EpisodeRecord> { episode(2, 0, true, 100), episode(4, 0, false, 300) };
    auto failed = episode(50, 0, std::nullopt, 9999);
    failed.infra_failed = true;
    records.push_back(failed);
    CHECK(tcn(records) == 3.0);
    CHECK(wtn(records) == 200.0);
}

TEST_CASE("nearest-rank percentiles")
{
    auto values = std::vector<std::size_t> {};
    for (std::size_t i = 1; i <= 100; ++i)
        values.push_back(101 - i);
    CHECK(nearest_rank(values, 95) == 95);
    CHECK(nearest_rank(values, 99) == 99);
    CHECK(nearest_rank(values, 100) == 100);
    CHECK(nearest_rank(std::vector<std::size_t> { 7 }, 95) == 7);
    CHECK(nearest_rank(std::vector<std::size_t> { 1, 2, 3 }, 50) == 2);
    CHECK_THROWS_AS((void)nearest_rank({}, 95), UndefinedInput);

    auto records = std::vector<EpisodeRecord> {};
    for (std::size_t i = 1; i <= 100; ++i)
        records.push_back(episode(i, 0));
    auto const t = tail_stats(records);
    CHECK(t == PercentileStats { 95, 99, 100 });
    CHECK_THROWS_AS((void)tail_stats({}), UndefinedInput);
}

TEST_CASE("error recurrence after the first resolution")
{
    // NameError resolved, then two later NameErrors
    auto const r = run_script(
        { err("NameError"), ok(), err("NameError"), ok(), err("NameError"), ok(), answer("1") }, EngineConfig {});
    auto const records = std::vector<EpisodeRecord> { make_record(r, "p", 0) };
    CHECK(error_recurrence(records, "NameError") == 2.0);
    CHECK(error_recurrence(records, "TypeError") == 0.0);

    auto const two = std::vector<EpisodeRecord> { records[0], episode(1, 0) };
    CHECK(error_recurrence(two, "NameError") == 1.0);
}

TEST_CASE("resolution histogram buckets by turns needed")
{
    auto const r = run_script({ err(), ok(), err(), err(), ok(), err(), err(), err(), answer("1") }, EngineConfig {});
    auto const records = std::vector<EpisodeRecord> { make_record(r, "p", 0) };
    auto const h = resolution_histogram(records);
    CHECK(h.resolved == std::map<std::size_t, std::size_t> { { 1, 1 }, { 2, 1 } });
    CHECK(h.unresolved == 1);
}

TEST_CASE("error statistics split by correctness")
{
    auto const records = std::vector<EpisodeRecord> {
        episode(4, 1, true), episode(2, 0, true), episode(0, 0, true), episode(5, 5, false), episode(4, 2, false),
        episode(3, 3),
    };
    auto const s = err_stats_by_correctness(records);
    CHECK(s.correct.episodes == 3);
    CHECK(s.correct.mean == doctest::Approx(1.0 / 3.0));
    CHECK(s.correct.median == 0.0);
    CHECK(s.correct.prop_mean == doctest::Approx(0.25 / 3.0));
    CHECK(s.correct.prop_median == 0.0);
    CHECK(s.incorrect.episodes == 2);
    CHECK(s.incorrect.mean == 3.5);
    CHECK(s.incorrect.median == 3.5);
    CHECK(s.incorrect.prop_mean == 0.75);
    CHECK(s.incorrect.prop_median == 0.75);
}

TEST_CASE("median")
{
    CHECK(median({}) == 0.0);
    CHECK(median({ 3, 1, 2 }) == 2.0);
    CHECK(median({ 4, 1, 2, 3 }) == 2.5);
}

TEST_CASE("summarize without labels leaves pass_at_1 empty")
{
    auto const records = std::vector<EpisodeRecord> { episode(1, 0), episode(3, 1) };
    auto const s = summarize(records);
    CHECK_FALSE(s.pass_at_1);
    CHECK(s.tcn_mean == 2.0);
    CHECK(s.tcn_percentiles.max == 3);
}
