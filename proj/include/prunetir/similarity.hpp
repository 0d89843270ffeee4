// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace prunetir
{

struct SimilarityParams
{
    double alpha = 0.5; // weight of edit similarity against keyword overlap
    double theta = 0.5; // intent shift when total <= theta
    std::vector<std::string> keyword_exclusions;

    /// Throws ContractViolation when alpha or theta leave [0, 1].
    void validate() const;
};

struct SimilarityScore
{
    double edit = 0.0;
    double keyword = 0.0;
    double total = 0.0;
};

using KeywordSet = std::set<std::string, std::less<>>;

/// Strips interpreter line comments outside string literals. Lines outside literals are
/// right-trimmed and dropped when nothing but whitespace remains. Triple-quoted strings are kept
/// verbatim, including when they are used as block comments.
[[nodiscard]] std::string remove_comments(std::string_view code);

/// Character-level (UTF-8 code point) Levenshtein distance.
[[nodiscard]] std::size_t levenshtein_distance(std::u32string_view a, std::u32string_view b);

/// 1 - D(a, b) / max(|a|, |b|, 1), lengths in code points.
[[nodiscard]] double levenshtein_ratio(std::string_view a, std::string_view b);

/// Identifier-like tokens outside string and numeric literals. Case-sensitive.
[[nodiscard]] KeywordSet extract_keywords(std::string_view code);

/// |a ∩ b| / max(1, |a ∪ b|)
[[nodiscard]] double keyword_overlap(KeywordSet const& a, KeywordSet const& b);

[[nodiscard]] SimilarityScore code_similarity(std::string_view a, std::string_view b, SimilarityParams const& params = {});

[[nodiscard]] bool is_intent_shift(std::string_view previous_code, std::string_view code, SimilarityParams const& params = {});

/// One turn of a resolved trace: its reasoning and the code of its tool call (empty when none).
struct ResolutionStep
{
    std::string reasoning;
    std::string code;
};

/// Walks turns k+1..k★ of a resolved trace and appends r_i to r_k whenever the code of turn i
/// shifts intent relative to turn i-1. Pairs where either side has no code are skipped.
/// `steps` runs from k to k★ inclusive.
[[nodiscard]] std::string merge_reasoning_on_intent_shift(std::span<ResolutionStep const> steps,
                                                          SimilarityParams const& params = {});

inline constexpr std::string_view ReasoningSeparator = "\n\n";

/// Decodes UTF-8; invalid bytes map to U+FFFD one byte at a time.
[[nodiscard]] std::u32string decode_utf8(std::string_view text);

} // namespace prunetir
