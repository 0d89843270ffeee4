// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <span>
#include <string_view>

namespace prunetir
{

/// A code snippet with the interpreter output it produces under CPython 3.10.
struct PoolSnippet
{
    std::string_view code;
    std::string_view stdout_text;
    std::string_view stderr_text;
    std::string_view error_type; // empty when the snippet runs cleanly
};

/// One problem-solving approach: a working snippet and broken drafts of the same code.
struct SnippetFamily
{
    std::string_view name;
    PoolSnippet working;
    std::span<PoolSnippet const> broken;
};

[[nodiscard]] std::span<SnippetFamily const> snippet_families() noexcept;

struct PoolLookup
{
    std::size_t family = 0;
    PoolSnippet const* snippet = nullptr;
};

/// Finds a snippet by exact code match.
[[nodiscard]] std::optional<PoolLookup> find_snippet(std::string_view code) noexcept;

} // namespace prunetir
