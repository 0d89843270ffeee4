// SPDX-License-Identifier: Apache-2.0
#include <prunetir/answer.hpp>

#include <cctype>

namespace prunetir
{

namespace
{

    std::string_view trim(std::string_view s)
    {
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
            s.remove_prefix(1);
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
            s.remove_suffix(1);
        return s;
    }

    /// Canonical decimal digits of an integer literal ("-007" -> "-7"), or empty when not an integer.
    std::string canonical_integer(std::string_view s)
    {
        auto negative = false;
        if (!s.empty() && (s.front() == '-' || s.front() == '+'))
        {
            negative = s.front() == '-';
            s.remove_prefix(1);
        }
        if (s.empty())
            return {};
        for (auto c: s)
            if (!std::isdigit(static_cast<unsigned char>(c)))
                return {};
        while (s.size() > 1 && s.front() == '0')
            s.remove_prefix(1);
        if (s == "0")
            negative = false;
        return (negative ? "-" : "") + std::string(s);
    }

} // namespace

std::string normalize_answer(std::string_view text)
{
    auto s = trim(text);
    constexpr auto boxed = std::string_view("\\boxed{");
    while (s.starts_with(boxed) && s.ends_with('}'))
        s = trim(s.substr(boxed.size(), s.size() - boxed.size() - 1));
    while (s.size() >= 2 && s.front() == '$' && s.back() == '$')
        s = trim(s.substr(1, s.size() - 2));

    auto out = std::string {};
    auto pendingSpace = false;
    for (auto c: s)
    {
        if (std::isspace(static_cast<unsigned char>(c)))
        {
            pendingSpace = true;
            continue;
        }
        if (pendingSpace && !out.empty())
            out += ' ';
        pendingSpace = false;
        out += c;
    }
    if (out.ends_with(".0"))
        out.resize(out.size() - 2);
    return out;
}

bool check_answer(std::string_view predicted, std::string_view gold)
{
    auto const a = normalize_answer(predicted);
    auto const b = normalize_answer(gold);
    auto const ia = canonical_integer(a);
    auto const ib = canonical_integer(b);
    if (!ia.empty() && !ib.empty())
        return ia == ib;
    return a == b;
}

} // namespace prunetir
