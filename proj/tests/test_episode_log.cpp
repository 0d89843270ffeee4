// SPDX-License-Identifier: Apache-2.0
#include <prunetir/episode_log.hpp>

#include <doctest.h>
#include <json.hpp>

#include <algorithm>

#include <sstream>

#include "fixtures.hpp"

using namespace prunetir;
using namespace fixtures;

TEST_CASE("log events round-trip through JSON")
{
    auto e = LogEvent {};
    e.episode_id = "p1__r0";
    e.ordinal = 4;
    e.event = EventKind::Stpr;
    e.reasoning = "line\n\"quoted\"";
    e.code = "print(1)";
    e.stderr_text = "NameError: x";
    e.is_error = true;
    e.error_type = "NameError";
    e.resample_generation = 2;
    e.prompt_tokens = 10;
    e.completion_tokens = 3;
    e.segment_start = 2;
    CHECK(parse_log_event(to_json_line(e)) == e);

    auto const j = nlohmann::json::parse(to_json_line(e));
    for (auto const* key: { "episode_id", "ordinal", "event", "reasoning", "code", "stdout", "stderr", "is_error",
                            "error_type", "pruned", "resample_generation", "token_counts" })
        CHECK(j.contains(key));
    CHECK(j["event"] == "stpr");
}

TEST_CASE("malformed log lines are rejected")
{
    CHECK_THROWS_AS((void)parse_log_event("nope"), std::invalid_argument);
    CHECK_THROWS_AS((void)parse_log_event("{\"episode_id\":\"a\",\"ordinal\":0,\"event\":\"dance\"}"),
                    std::invalid_argument);
    CHECK_THROWS_AS((void)parse_log_event("{\"ordinal\":0,\"event\":\"generate\"}"), std::invalid_argument);
}

TEST_CASE("summaries round-trip and carry the required fields")
{
    auto const r = run_script({ err(), ok(), answer("1") }, EngineConfig {}, "1");
    auto const s = make_summary(r, "p__r3", "p", 3, 0.25);
    CHECK(parse_summary(to_json_line(s)) == s);
    auto const j = nlohmann::json::parse(to_json_line(s));
    for (auto const* key: { "episode_id", "problem_id", "run_index", "outcome", "correct", "tcn", "wtn", "tn", "stp",
                            "stpr", "rtts", "seconds" })
        CHECK(j.contains(key));
    CHECK(j["outcome"] == "answered");
    CHECK(j["correct"] == true);
    CHECK(j["tcn"] == 2);
    CHECK(j["stp"] == 1);
}

TEST_CASE("records rebuilt from logs equal in-memory records")
{
    auto params = StochasticModelParams {};
    for (std::uint64_t seed = 0; seed < 200; ++seed)
    {
        for (auto features: { FeatureFlags::none(), FeatureFlags::all() })
        {
            params.rng_seed = seed;
            auto backend = StochasticBackend(params, "38.5");
            auto tool = SimulatedTool {};
            auto log = std::ostringstream {};
            auto options = EpisodeOptions {};
            options.observer = log_writer("e", log);
            auto config = EngineConfig {};
            config.features = features;
            auto const r = run_episode("q", "38.5", config, backend, tool, options);

            auto in = std::istringstream(log.str());
            auto const events = read_log(in);
            auto const summary = parse_summary(to_json_line(make_summary(r, "e", "p", seed, 0.0)));
            REQUIRE(record_from_log(summary, events) == make_record(r, "p", seed));
        }
    }
}

TEST_CASE("stp events log the merged reasoning")
{
    auto log = std::ostringstream {};
    auto options = EpisodeOptions {};
    options.observer = log_writer("e", log);
    (void)run_script({ err("NameError", "a"), ok("1", "b"), answer("1") }, EngineConfig {}, std::nullopt, options);
    auto in = std::istringstream(log.str());
    auto const events = read_log(in);
    auto const stp = std::find_if(events.begin(), events.end(), [](auto const& e) { return e.event == EventKind::Stp; });
    REQUIRE(stp != events.end());
    CHECK(stp->reasoning == "a\n\nb");
    CHECK(stp->segment_start == 0u);
}
