// SPDX-License-Identifier: Apache-2.0
#include <prunetir/similarity.hpp>
#include <prunetir/trajectory.hpp>

#include <doctest.h>
#include <json.hpp>

#include <fstream>

using namespace prunetir;

TEST_CASE("levenshtein examples")
{
    CHECK(levenshtein_distance(U"kitten", U"sitting") == 3);
    CHECK(levenshtein_ratio("kitten", "sitting") == doctest::Approx(1.0 - 3.0 / 7.0));
    CHECK(levenshtein_ratio("", "") == 1.0);
    CHECK(levenshtein_ratio("abc", "") == 0.0);
    CHECK(levenshtein_ratio("same", "same") == 1.0);
    // code points, not bytes
    CHECK(levenshtein_distance(decode_utf8("naïve"), decode_utf8("naive")) == 1);
    CHECK(levenshtein_ratio("naïve", "naive") == doctest::Approx(0.8));
}

TEST_CASE("decode_utf8 replaces invalid bytes one at a time")
{
    auto const s = decode_utf8(std::string("a\xff" "b"));
    CHECK(s == U"a�b");
}

TEST_CASE("remove_comments and extract_keywords agree with python tokenize")
{
    auto in = std::ifstream(PRUNETIR_TEST_DATA "/tokenize_oracle.json");
    auto const cases = nlohmann::json::parse(in);
    REQUIRE(cases.size() >= 8);
    for (auto const& c: cases)
    {
        auto const code = c.at("code").get<std::string>();
        CAPTURE(code);
        CHECK(remove_comments(code) == c.at("stripped").get<std::string>());
        auto const expected = c.at("keywords").get<std::vector<std::string>>();
        auto const kw = extract_keywords(code);
        CHECK(std::vector<std::string>(kw.begin(), kw.end()) == expected);
    }
}

TEST_CASE("keyword overlap")
{
    CHECK(keyword_overlap({}, {}) == 0.0);
    CHECK(keyword_overlap({ "a", "b" }, { "b", "c" }) == doctest::Approx(1.0 / 3.0));
    CHECK(keyword_overlap({ "a" }, { "a" }) == 1.0);
}

TEST_CASE("code_similarity combines the two components")
{
    auto const a = "for i in range(10):\n    print(i)";
    auto const b = "for j in range(10):\n    print(j)";
    auto const s = code_similarity(a, b, { 0.3, 0.5, {} });
    CHECK(s.total == doctest::Approx(0.3 * s.edit + 0.7 * s.keyword));
    CHECK(s.keyword == doctest::Approx(4.0 / 6.0));
    CHECK(s.edit == doctest::Approx(1.0 - 2.0 / 32.0));
}

TEST_CASE("comments never change the score")
{
    auto const a = "x = 1\nprint(x)";
    auto const b = "# compute\nx = 1  # one\n\nprint(x)  # show\n";
    auto const s = code_similarity(a, b);
    CHECK(s.edit == 1.0);
    CHECK(s.keyword == 1.0);
    CHECK(s.total == 1.0);
    CHECK_FALSE(is_intent_shift(a, b));
}

TEST_CASE("keyword exclusions drop listed tokens before scoring")
{
    auto params = SimilarityParams {};
    params.keyword_exclusions = { "print" };
    auto const s = code_similarity("print(a)", "print(b)", params);
    CHECK(s.keyword == 0.0);
    CHECK(code_similarity("print(a)", "print(b)").keyword == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("params validation")
{
    CHECK_THROWS_AS((SimilarityParams { -0.1, 0.5, {} }.validate()), ContractViolation);
    CHECK_THROWS_AS((SimilarityParams { 0.5, 1.5, {} }.validate()), ContractViolation);
    CHECK_NOTHROW((SimilarityParams { 0.0, 1.0, {} }.validate()));
}

TEST_CASE("merge appends reasoning only on intent shifts")
{
    auto const same = std::string("total = sum(range(10))\nprint(total)");
    auto const same_fixed = std::string("total = sum(range(11))\nprint(total)");
    auto const other = std::string("import math\nprint(math.factorial(7) // 3)");

    SUBCASE("consistent fix keeps only r_k")
    {
        auto const steps = std::vector<ResolutionStep> { { "r0", same }, { "r1", same_fixed } };
        CHECK(merge_reasoning_on_intent_shift(steps) == "r0");
    }
    SUBCASE("shift appends")
    {
        auto const steps = std::vector<ResolutionStep> { { "r0", same }, { "r1", other }, { "r2", other } };
        CHECK(merge_reasoning_on_intent_shift(steps) == "r0\n\nr1");
    }
    SUBCASE("pairs without code are skipped")
    {
        auto const steps = std::vector<ResolutionStep> { { "r0", same }, { "r1", "" }, { "r2", other } };
        CHECK(merge_reasoning_on_intent_shift(steps) == "r0");
    }
    SUBCASE("theta 1 treats every pair as a shift")
    {
        auto const steps = std::vector<ResolutionStep> { { "r0", same }, { "r1", same_fixed } };
        CHECK(merge_reasoning_on_intent_shift(steps, { 0.5, 1.0, {} }) == "r0\n\nr1");
    }
}
