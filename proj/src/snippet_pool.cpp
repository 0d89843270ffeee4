// SPDX-License-Identifier: Apache-2.0
#include <prunetir/snippet_pool.hpp>

#include <array>

namespace prunetir
{

namespace
{

    constexpr auto SumBroken = std::array {
        PoolSnippet {
            "total = sum(i for i in rang(1, 1000) if i % 3 == 0 or i % 5 == 0)\nprint(total)\n",
            "",
            "Traceback (most recent call last):\n  File \"<string>\", line 1, in <module>\nNameError: name 'rang' is not "
            "defined. Did you mean: 'range'?\n",
            "NameError",
        },
        PoolSnippet {
            "total = sum(i for i in range(1, 1000) if i % 3 == 0 or i % 5 = 0)\nprint(total)\n",
            "",
            "  File \"<string>\", line 1\n    total = sum(i for i in range(1, 1000) if i % 3 == 0 or i % 5 = 0)\n       "
            "                                                          ^\nSyntaxError: invalid syntax\n",
            "SyntaxError",
        },
    };

    constexpr auto CombBroken = std::array {
        PoolSnippet {
            "from math import combination\ncount = 0\nfor k in range(0, 21):\n    count += combination(20, k) * (k % "
            "2)\nprint(count)\n",
            "",
            "Traceback (most recent call last):\n  File \"<string>\", line 1, in <module>\nImportError: cannot import "
            "name 'combination' from 'math' (unknown location)\n",
            "ImportError",
        },
        PoolSnippet {
            "from math import comb\nfor k in range(0, 21):\n    count += comb(20, k) * (k % 2)\nprint(count)\n",
            "",
            "Traceback (most recent call last):\n  File \"<string>\", line 3, in <module>\nNameError: name 'count' is not "
            "defined. Did you mean: 'round'?\n",
            "NameError",
        },
    };

    constexpr auto LcmBroken = std::array {
        PoolSnippet {
            "from math import gcd\ndef lcm(a, b):\n    return a * b // gcd(a, b)\nvalue = 1\nfor n in range(1, 21):\n    "
            "value = lcm(value)\nprint(value)\n",
            "",
            "Traceback (most recent call last):\n  File \"<string>\", line 6, in <module>\nTypeError: lcm() missing 1 "
            "required positional argument: 'b'\n",
            "TypeError",
        },
        PoolSnippet {
            "from math import gcd\ndef lcm(a, b):\n    return a * b // gcd(a, b)\nvalue = 1\nfor n in range(1, 21):\n    "
            "value = lcm(value n)\nprint(value)\n",
            "",
            "  File \"<string>\", line 6\n    value = lcm(value n)\n                ^^^^^^^\nSyntaxError: invalid "
            "syntax. Perhaps you forgot a comma?\n",
            "SyntaxError",
        },
    };

    constexpr auto DigitsBroken = std::array {
        PoolSnippet {
            "digits = [int(d) for d in 2 ** 100]\nprint(sum(digits))\n",
            "",
            "Traceback (most recent call last):\n  File \"<string>\", line 1, in <module>\nTypeError: 'int' object is not "
            "iterable\n",
            "TypeError",
        },
        PoolSnippet {
            "digits = [int(d) for d in str(2 ** 100)]\nprint(sum(digit))\n",
            "",
            "Traceback (most recent call last):\n  File \"<string>\", line 2, in <module>\nNameError: name 'digit' is not "
            "defined. Did you mean: 'digits'?\n",
            "NameError",
        },
    };

    constexpr auto MeanBroken = std::array {
        PoolSnippet {
            "values = [n * n for n in range(1, 11)]\nmean = sum(values) / (len(values) - 10)\nprint(mean)\n",
            "",
            "Traceback (most recent call last):\n  File \"<string>\", line 2, in <module>\nZeroDivisionError: division by "
            "zero\n",
            "ZeroDivisionError",
        },
        PoolSnippet {
            "values = [n * n for n in range(1, 11)]\nmean = sum(values) / len(values)\nprint(values[10], mean)\n",
            "",
            "Traceback (most recent call last):\n  File \"<string>\", line 3, in <module>\nIndexError: list index out of "
            "range\n",
            "IndexError",
        },
    };

    constexpr auto Families = std::array {
        SnippetFamily {
            "sum-of-multiples",
            { "total = sum(i for i in range(1, 1000) if i % 3 == 0 or i % 5 == 0)\nprint(total)\n", "233168\n", "", "" },
            SumBroken,
        },
        SnippetFamily {
            "odd-binomial-sum",
            { "from math import comb\ncount = 0\nfor k in range(0, 21):\n    count += comb(20, k) * (k % 2)\nprint(count)\n",
              "524288\n",
              "",
              "" },
            CombBroken,
        },
        SnippetFamily {
            "lcm-ladder",
            { "from math import gcd\ndef lcm(a, b):\n    return a * b // gcd(a, b)\nvalue = 1\nfor n in range(1, 21):\n    "
              "value = lcm(value, n)\nprint(value)\n",
              "232792560\n",
              "",
              "" },
            LcmBroken,
        },
        SnippetFamily {
            "digit-sum",
            { "digits = [int(d) for d in str(2 ** 100)]\nprint(sum(digits))\n", "115\n", "", "" },
            DigitsBroken,
        },
        SnippetFamily {
            "mean-of-squares",
            { "values = [n * n for n in range(1, 11)]\nmean = sum(values) / len(values)\nprint(mean)\n", "38.5\n", "", "" },
            MeanBroken,
        },
    };

} // namespace

std::span<SnippetFamily const> snippet_families() noexcept
{
    return Families;
}

std::optional<PoolLookup> find_snippet(std::string_view code) noexcept
{
    auto const same = [](std::string_view a, std::string_view b) {
        while (a.ends_with('\n'))
            a.remove_suffix(1);
        while (b.ends_with('\n'))
            b.remove_suffix(1);
        return a == b;
    };
    for (std::size_t f = 0; f < Families.size(); ++f)
    {
        auto const& family = Families[f];
        if (same(family.working.code, code))
            return PoolLookup { f, &family.working };
        for (auto const& broken: family.broken)
            if (same(broken.code, code))
                return PoolLookup { f, &broken };
    }
    return std::nullopt;
}

} // namespace prunetir
