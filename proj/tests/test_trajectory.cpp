// SPDX-License-Identifier: Apache-2.0
#include <prunetir/trajectory.hpp>

#include <doctest.h>
#include <json.hpp>

#include <fstream>
#include <random>
#include <sstream>

using namespace prunetir;

namespace
{

Turn model_turn(Ordinal ordinal, std::string reasoning, std::optional<std::string> code = std::nullopt,
                bool error = false)
{
    auto turn = Turn {};
    turn.ordinal = ordinal;
    turn.reasoning = std::move(reasoning);
    if (code)
    {
        turn.tool_call = ToolCall { "```python\n" + *code + "\n```", *code };
        auto fb = ToolFeedback {};
        fb.is_error = error;
        if (error)
        {
            fb.stderr_text = "NameError: name 'x' is not defined\n";
            fb.error_type = "NameError";
        }
        else
            fb.stdout_text = "ok\n";
        turn.tool_feedback = fb;
    }
    return turn;
}

ResolutionSegment segment(Ordinal start, std::vector<std::pair<Ordinal, bool>> attempts, SegmentOutcome outcome)
{
    auto s = ResolutionSegment {};
    s.start_ordinal = start;
    for (auto [o, e]: attempts)
        s.attempts.push_back({ o, e });
    s.outcome = outcome;
    if (outcome == SegmentOutcome::Resolved)
        s.resolved_at = attempts.back().first;
    return s;
}

std::string read(std::string const& path)
{
    auto in = std::ifstream(path);
    auto ss = std::stringstream {};
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("append keeps full log and working view in step")
{
    auto t = Trajectory("q");
    t.append(model_turn(0, "r0", "x = 1"));
    CHECK(t.full_log().size() == 1);
    CHECK(t.working().ordinals == std::vector<Ordinal> { 0 });
    t.append(model_turn(1, "r1"));
    CHECK(t.working().ordinals == std::vector<Ordinal> { 0, 1 });
}

TEST_CASE("append rejects contract breaks")
{
    auto t = Trajectory("q");
    CHECK_THROWS_AS(t.append(model_turn(1, "r")), ContractViolation);

    auto orphan = model_turn(0, "r");
    orphan.tool_feedback = ToolFeedback {};
    CHECK_THROWS_AS(t.append(orphan), ContractViolation);

    auto silent = model_turn(0, "r", "x = 1");
    silent.tool_feedback.reset();
    CHECK_THROWS_AS(t.append(silent), ContractViolation);

    auto pruned = model_turn(0, "r");
    pruned.pruned = true;
    CHECK_THROWS_AS(t.append(pruned), ContractViolation);
}

TEST_CASE("stp removes k..k*-1 and overlays merged reasoning on k*")
{
    auto t = Trajectory("q");
    t.append(model_turn(0, "plan", "a = 1"));
    t.append(model_turn(1, "try", "b", true));
    t.append(model_turn(2, "again", "c", true));
    t.append(model_turn(3, "fixed", "c = 1"));
    auto const s = segment(1, { { 1, true }, { 2, true }, { 3, false } }, SegmentOutcome::Resolved);

    stp_prune(t, s, "merged");
    CHECK(t.working().ordinals == std::vector<Ordinal> { 0, 3 });
    CHECK(t.working_reasoning(3) == "merged");
    CHECK(t.at(3).reasoning == "fixed");
    CHECK(t.at(1).pruned);
    CHECK(t.at(2).pruned);
    CHECK_FALSE(t.at(3).pruned);
    CHECK(t.full_log().size() == 4);
}

TEST_CASE("stpr restores the pre-error working view")
{
    auto t = Trajectory("q");
    t.append(model_turn(0, "plan", "a = 1"));
    auto const before = t.working();
    t.append(model_turn(1, "e1", "b", true));
    t.append(model_turn(2, "e2", "b", true));
    t.append(model_turn(3, "e3", "b", true));
    auto const s = segment(1, { { 1, true }, { 2, true }, { 3, true } }, SegmentOutcome::Stuck);

    stpr_prune(t, s);
    CHECK(t.working() == before);
    CHECK(t.full_log().size() == 4);
    CHECK(t.at(3).pruned);
}

TEST_CASE("pruning refuses segments in the wrong state")
{
    auto t = Trajectory("q");
    t.append(model_turn(0, "e", "b", true));
    t.append(model_turn(1, "ok", "c = 1"));
    auto open = segment(0, { { 0, true } }, SegmentOutcome::Open);
    CHECK_THROWS_AS(stp_prune(t, open, "m"), ContractViolation);
    CHECK_THROWS_AS(stpr_prune(t, open), ContractViolation);

    auto beyond = segment(0, { { 0, true }, { 7, false } }, SegmentOutcome::Resolved);
    CHECK_THROWS_AS(stp_prune(t, beyond, "m"), ContractViolation);
}

TEST_CASE("random edit sequences keep the working view a subsequence of the log")
{
    auto rng = std::mt19937_64 { 7 };
    for (int trial = 0; trial < 200; ++trial)
    {
        auto t = Trajectory("q");
        auto open = std::optional<ResolutionSegment> {};
        auto before = WorkingView {};
        for (Ordinal o = 0; o < 30; ++o)
        {
            auto const error = rng() % 3 == 0;
            if (error && !open)
                before = t.working();
            t.append(model_turn(o, "r" + std::to_string(o), "x", error));
            if (error)
            {
                if (!open)
                    open = segment(o, {}, SegmentOutcome::Open);
                open->attempts.push_back({ o, true });
                if (open->attempts.size() == 3)
                {
                    open->outcome = SegmentOutcome::Stuck;
                    stpr_prune(t, *open);
                    REQUIRE(t.working() == before);
                    open.reset();
                }
            }
            else if (open)
            {
                open->attempts.push_back({ o, false });
                open->outcome = SegmentOutcome::Resolved;
                open->resolved_at = o;
                stp_prune(t, *open, "m");
                open.reset();
            }

            auto const& ords = t.working().ordinals;
            REQUIRE(std::is_sorted(ords.begin(), ords.end()));
            REQUIRE(std::adjacent_find(ords.begin(), ords.end()) == ords.end());
            for (auto w: ords)
                REQUIRE_FALSE(t.at(w).pruned);
            auto pruned = std::size_t { 0 };
            for (auto const& turn: t.full_log())
                pruned += turn.pruned ? 1 : 0;
            REQUIRE(pruned + ords.size() == t.full_log().size());
        }
    }
}

TEST_CASE("working render matches the golden fixture")
{
    auto t = Trajectory("Find the sum of all multiples of 3 or 5 below 1000.");
    t.append(model_turn(0, "Sum them directly.", "print(s)", true));
    t.append(model_turn(1, "Define s first.", "s = 233168\nprint(s)"));
    auto const s = segment(0, { { 0, true }, { 1, false } }, SegmentOutcome::Resolved);
    stp_prune(t, s, "Sum them directly.\n\nDefine s first.");
    t.append(model_turn(2, "The answer is \\boxed{233168}."));

    auto rendered = nlohmann::ordered_json::array();
    for (auto const& m: render_working_context(t, PromptTemplate {}))
        rendered.push_back({ { "role", m.role }, { "content", m.content } });

    auto const golden = nlohmann::ordered_json::parse(read(PRUNETIR_TEST_GOLDEN "/working_render.json"));
    CHECK(rendered == golden);
}

TEST_CASE("full-log render keeps pruned turns with original reasoning")
{
    auto t = Trajectory("q");
    t.append(model_turn(0, "e", "b", true));
    t.append(model_turn(1, "ok", "c = 1"));
    stp_prune(t, segment(0, { { 0, true }, { 1, false } }, SegmentOutcome::Resolved), "merged");
    auto const full = render_full_log(t, PromptTemplate {});
    auto const working = render_working_context(t, PromptTemplate {});
    CHECK(full.size() == 2 + 4);
    CHECK(working.size() == 2 + 2);
    CHECK(full[4].content.starts_with("ok"));
    CHECK(working[2].content.starts_with("merged"));
}

TEST_CASE("token estimator rounds chars/4 up")
{
    CHECK(estimate_tokens("") == 0);
    CHECK(estimate_tokens("a") == 1);
    CHECK(estimate_tokens("abcd") == 1);
    CHECK(estimate_tokens("abcde") == 2);
    auto const msgs = std::vector<Message> { { "user", "abcde", MessageKind::Question }, { "assistant", "abc" } };
    CHECK(estimate_tokens(msgs) == 3);
}
