// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>

namespace prunetir
{

/// Trims, unwraps \boxed{...}, collapses internal whitespace and drops a trailing ".0".
[[nodiscard]] std::string normalize_answer(std::string_view text);

/// Equal as integers when both normalized forms are integers, otherwise equal as normalized strings.
[[nodiscard]] bool check_answer(std::string_view predicted, std::string_view gold);

} // namespace prunetir
