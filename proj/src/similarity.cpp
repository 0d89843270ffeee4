// SPDX-License-Identifier: Apache-2.0
#include <prunetir/similarity.hpp>
#include <prunetir/trajectory.hpp>

#include <algorithm>
#include <cctype>
#include <numeric>

namespace prunetir
{

void SimilarityParams::validate() const
{
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw ContractViolation("similarity: alpha must lie in [0, 1]");
    if (!(theta >= 0.0 && theta <= 1.0))
        throw ContractViolation("similarity: theta must lie in [0, 1]");
}

namespace
{

    bool is_ident_start(char c) noexcept
    {
        return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
    }

    bool is_ident_char(char c) noexcept
    {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
    }

    bool is_blank(std::string_view line) noexcept
    {
        return std::all_of(line.begin(), line.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
    }

    void rtrim(std::string& s)
    {
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
            s.pop_back();
    }

    bool is_string_prefix(std::string_view word) noexcept
    {
        if (word.empty() || word.size() > 2)
            return false;
        auto lower = std::string(word);
        std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
        return lower == "r" || lower == "b" || lower == "f" || lower == "u" || lower == "rb" || lower == "br"
               || lower == "fr" || lower == "rf";
    }

    /// Tracks whether a scan position is inside a quoted literal. Feed characters in order.
    class LiteralScanner
    {
      public:
        [[nodiscard]] bool inside() const noexcept { return _quote != 0; }

        /// Call at position i when not inside a literal and text[i] is a quote. Returns the
        /// number of characters consumed by the opening delimiter.
        std::size_t open(std::string_view text, std::size_t i)
        {
            _quote = text[i];
            _triple = text.substr(i, 3) == std::string(3, _quote);
            return _triple ? 3 : 1;
        }

        /// Call at position i while inside a literal. Returns characters consumed; sets inside()
        /// to false once the closing delimiter is consumed.
        std::size_t advance(std::string_view text, std::size_t i)
        {
            auto const c = text[i];
            if (c == '\\')
                return std::min<std::size_t>(2, text.size() - i);
            if (c == _quote)
            {
                if (!_triple)
                {
                    _quote = 0;
                    return 1;
                }
                if (text.substr(i, 3) == std::string(3, _quote))
                {
                    _quote = 0;
                    return 3;
                }
            }
            // An unterminated single-quoted literal ends at the line break.
            if (c == '\n' && !_triple)
                _quote = 0;
            return 1;
        }

      private:
        char _quote = 0;
        bool _triple = false;
    };

} // namespace

std::string remove_comments(std::string_view code)
{
    struct Line
    {
        std::string text;
        bool ends_in_literal = false;
    };
    std::vector<Line> lines(1);
    LiteralScanner literal;

    auto i = std::size_t { 0 };
    while (i < code.size())
    {
        auto const c = code[i];
        if (literal.inside())
        {
            auto const n = literal.advance(code, i);
            for (auto j = i; j < i + n; ++j)
            {
                if (code[j] == '\n')
                {
                    lines.back().ends_in_literal = literal.inside() || j + 1 < i + n;
                    lines.emplace_back();
                }
                else
                    lines.back().text += code[j];
            }
            i += n;
            continue;
        }
        if (c == '#')
        {
            while (i < code.size() && code[i] != '\n')
                ++i;
            continue;
        }
        if (c == '\'' || c == '"')
        {
            auto const n = literal.open(code, i);
            lines.back().text.append(code.substr(i, n));
            i += n;
            continue;
        }
        if (c == '\n')
            lines.emplace_back();
        else
            lines.back().text += c;
        ++i;
    }

    auto out = std::string {};
    auto first = true;
    auto previous_in_literal = false;
    for (auto& line: lines)
    {
        if (!line.ends_in_literal)
            rtrim(line.text);
        if (!previous_in_literal && !line.ends_in_literal && is_blank(line.text))
            continue;
        if (!first)
            out += '\n';
        out += line.text;
        first = false;
        previous_in_literal = line.ends_in_literal;
    }
    return out;
}

std::u32string decode_utf8(std::string_view text)
{
    auto out = std::u32string {};
    out.reserve(text.size());
    auto i = std::size_t { 0 };
    while (i < text.size())
    {
        auto const b0 = static_cast<unsigned char>(text[i]);
        auto len = std::size_t { 0 };
        auto cp = char32_t { 0 };
        if (b0 < 0x80)
        {
            len = 1;
            cp = b0;
        }
        else if ((b0 & 0xE0) == 0xC0)
        {
            len = 2;
            cp = b0 & 0x1F;
        }
        else if ((b0 & 0xF0) == 0xE0)
        {
            len = 3;
            cp = b0 & 0x0F;
        }
        else if ((b0 & 0xF8) == 0xF0)
        {
            len = 4;
            cp = b0 & 0x07;
        }

        auto valid = len != 0 && i + len <= text.size();
        for (auto j = std::size_t { 1 }; valid && j < len; ++j)
        {
            auto const b = static_cast<unsigned char>(text[i + j]);
            if ((b & 0xC0) != 0x80)
                valid = false;
            else
                cp = (cp << 6) | (b & 0x3F);
        }
        if (!valid)
        {
            out += U'�';
            ++i;
            continue;
        }
        out += cp;
        i += len;
    }
    return out;
}

std::size_t levenshtein_distance(std::u32string_view a, std::u32string_view b)
{
    if (a.size() < b.size())
        std::swap(a, b);
    if (b.empty())
        return a.size();

    std::vector<std::size_t> row(b.size() + 1);
    std::iota(row.begin(), row.end(), std::size_t { 0 });
    for (std::size_t i = 0; i < a.size(); ++i)
    {
        auto diagonal = row[0];
        row[0] = i + 1;
        for (std::size_t j = 0; j < b.size(); ++j)
        {
            auto const above = row[j + 1];
            auto const substitution = diagonal + (a[i] == b[j] ? 0 : 1);
            row[j + 1] = std::min({ above + 1, row[j] + 1, substitution });
            diagonal = above;
        }
    }
    return row[b.size()];
}

double levenshtein_ratio(std::string_view a, std::string_view b)
{
    auto const ua = decode_utf8(a);
    auto const ub = decode_utf8(b);
    auto const longest = std::max({ ua.size(), ub.size(), std::size_t { 1 } });
    return 1.0 - static_cast<double>(levenshtein_distance(ua, ub)) / static_cast<double>(longest);
}

KeywordSet extract_keywords(std::string_view code)
{
    KeywordSet out;
    LiteralScanner literal;
    auto i = std::size_t { 0 };
    while (i < code.size())
    {
        if (literal.inside())
        {
            i += literal.advance(code, i);
            continue;
        }
        auto const c = code[i];
        if (c == '\'' || c == '"')
        {
            i += literal.open(code, i);
            continue;
        }
        if (c == '#')
        {
            while (i < code.size() && code[i] != '\n')
                ++i;
            continue;
        }
        if (is_ident_char(c))
        {
            auto const start = i;
            while (i < code.size() && is_ident_char(code[i]))
                ++i;
            auto const word = code.substr(start, i - start);
            auto const prefixes_literal = i < code.size() && (code[i] == '\'' || code[i] == '"') && is_string_prefix(word);
            // Runs that start with a digit are numeric literals (1e5, 0x1F, 3j).
            if (is_ident_start(word.front()) && !prefixes_literal)
                out.emplace(word);
            continue;
        }
        ++i;
    }
    return out;
}

double keyword_overlap(KeywordSet const& a, KeywordSet const& b)
{
    std::size_t common = 0;
    for (auto const& k: a)
        common += b.contains(k) ? 1 : 0;
    auto const unionSize = a.size() + b.size() - common;
    return static_cast<double>(common) / static_cast<double>(std::max<std::size_t>(1, unionSize));
}

SimilarityScore code_similarity(std::string_view a, std::string_view b, SimilarityParams const& params)
{
    params.validate();
    auto const cleanA = remove_comments(a);
    auto const cleanB = remove_comments(b);

    auto keywordsA = extract_keywords(cleanA);
    auto keywordsB = extract_keywords(cleanB);
    for (auto const& excluded: params.keyword_exclusions)
    {
        keywordsA.erase(excluded);
        keywordsB.erase(excluded);
    }

    auto score = SimilarityScore {};
    score.edit = levenshtein_ratio(cleanA, cleanB);
    score.keyword = keyword_overlap(keywordsA, keywordsB);
    score.total = params.alpha * score.edit + (1.0 - params.alpha) * score.keyword;
    return score;
}

bool is_intent_shift(std::string_view previous_code, std::string_view code, SimilarityParams const& params)
{
    return code_similarity(previous_code, code, params).total <= params.theta;
}

std::string merge_reasoning_on_intent_shift(std::span<ResolutionStep const> steps, SimilarityParams const& params)
{
    if (steps.empty())
        throw ContractViolation("merge_reasoning_on_intent_shift: empty resolution trace");

    auto merged = steps.front().reasoning;
    for (std::size_t i = 1; i < steps.size(); ++i)
    {
        auto const& previous = steps[i - 1].code;
        auto const& current = steps[i].code;
        if (previous.empty() || current.empty())
            continue;
        if (is_intent_shift(previous, current, params))
        {
            merged += ReasoningSeparator;
            merged += steps[i].reasoning;
        }
    }
    return merged;
}

} // namespace prunetir
