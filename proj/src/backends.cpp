// SPDX-License-Identifier: Apache-2.0
#include <prunetir/backends.hpp>
#include <prunetir/snippet_pool.hpp>
#include <prunetir/toolgate.hpp>

#include <array>
#include <charconv>
#include <cmath>
#include <thread>

namespace prunetir
{

std::optional<std::string> extract_boxed(std::string_view text)
{
    constexpr auto marker = std::string_view("\\boxed{");
    auto searchEnd = text.size();
    while (true)
    {
        auto const pos = text.rfind(marker, searchEnd);
        if (pos == std::string_view::npos)
            return std::nullopt;
        auto depth = 1;
        auto const start = pos + marker.size();
        for (auto i = start; i < text.size(); ++i)
        {
            if (text[i] == '{')
                ++depth;
            else if (text[i] == '}' && --depth == 0)
                return std::string(text.substr(start, i - start));
        }
        if (pos == 0)
            return std::nullopt;
        searchEnd = pos - 1;
    }
}

namespace
{

    std::string_view trim_space(std::string_view text)
    {
        auto const first = text.find_first_not_of(" \t\r\n");
        if (first == std::string_view::npos)
            return {};
        auto const last = text.find_last_not_of(" \t\r\n");
        return text.substr(first, last - first + 1);
    }

} // namespace

ParsedGeneration parse_generation(std::string_view text, std::string_view code_tag)
{
    auto const fence = std::string("```") + std::string(code_tag);
    auto parsed = ParsedGeneration {};

    auto open = std::string_view::npos;
    for (auto pos = text.find(fence); pos != std::string_view::npos; pos = text.find(fence, pos + 1))
    {
        auto const after = pos + fence.size();
        if (after < text.size() && (text[after] == '\n' || text[after] == '\r'))
            open = pos;
    }

    if (open != std::string_view::npos)
    {
        auto bodyStart = open + fence.size();
        if (text[bodyStart] == '\r')
            ++bodyStart;
        ++bodyStart; // '\n'
        auto const close = text.find("```", bodyStart);
        auto const rawEnd = close == std::string_view::npos ? text.size() : close + 3;
        auto body = text.substr(bodyStart, (close == std::string_view::npos ? text.size() : close) - bodyStart);
        if (body.ends_with('\n'))
            body.remove_suffix(1);
        if (body.ends_with('\r'))
            body.remove_suffix(1);

        auto const blank = body.find_first_not_of(" \t\r\n") == std::string_view::npos;
        if (!blank)
        {
            parsed.tool_call = ToolCall { std::string(text.substr(open, rawEnd - open)), std::string(body) };
            auto const before = trim_space(text.substr(0, open));
            auto const after = trim_space(text.substr(rawEnd));
            parsed.reasoning = std::string(before);
            if (!before.empty() && !after.empty())
                parsed.reasoning += "\n\n";
            parsed.reasoning.append(after);
            return parsed;
        }
    }

    parsed.reasoning = std::string(text);
    parsed.answer = extract_boxed(text);
    return parsed;
}

// ----------------------------------------------------------------------------

GenerationResult generate_with_retry(ModelBackend& backend, std::span<Message const> messages,
                                     SamplingParams const& sampling, RetryPolicy const& policy, Sleeper const& sleep)
{
    auto delay = policy.initial_delay;
    for (auto attempt = 1;; ++attempt)
    {
        try
        {
            return backend.generate(messages, sampling);
        }
        catch (BackendError const& e)
        {
            if (!e.retriable() || attempt >= policy.max_attempts)
                throw;
        }
        if (sleep)
            sleep(delay);
        else
            std::this_thread::sleep_for(delay);
        delay = std::chrono::milliseconds(
            static_cast<long long>(std::llround(static_cast<double>(delay.count()) * policy.multiplier)));
    }
}

// ----------------------------------------------------------------------------

ScriptedBackend::ScriptedBackend(std::vector<std::string> responses, std::string code_tag):
    _responses(std::move(responses)), _code_tag(std::move(code_tag))
{
}

GenerationResult ScriptedBackend::generate(std::span<Message const> messages, SamplingParams const&)
{
    if (messages.empty())
        throw ContractViolation("generate: empty message sequence");

    auto text = std::string {};
    {
        auto lock = std::lock_guard(_mutex);
        if (_cursor >= _responses.size())
            throw BackendError("scripted backend: script exhausted after " + std::to_string(_cursor) + " responses",
                               false);
        text = _responses[_cursor++];
    }

    auto parsed = parse_generation(text, _code_tag);
    auto result = GenerationResult {};
    result.reasoning = std::move(parsed.reasoning);
    result.tool_call = std::move(parsed.tool_call);
    result.final_answer = std::move(parsed.answer);
    result.completion_tokens = estimate_tokens(text);
    return result;
}

std::size_t ScriptedBackend::consumed() const
{
    auto lock = std::lock_guard(_mutex);
    return _cursor;
}

std::size_t ScriptedBackend::remaining() const
{
    auto lock = std::lock_guard(_mutex);
    return _responses.size() - _cursor;
}

// ----------------------------------------------------------------------------

void StochasticModelParams::validate() const
{
    auto const probability = [](double p) { return p >= 0.0 && p <= 1.0; };
    auto ok = probability(p_tool_turn) && probability(p_error_initial) && probability(p_correct_manual)
              && probability(p_intent_shift) && !resolve_schedule.empty();
    for (auto p: resolve_schedule)
        ok = ok && probability(p);
    for (auto const& band: p_correct_given_errors)
        ok = ok && probability(band.second);
    if (!ok)
        throw ContractViolation("stochastic model: probabilities must lie in [0, 1] and the schedule be non-empty");
}

PromptState read_prompt_state(std::span<Message const> messages, std::string_view code_tag)
{
    auto state = PromptState {};
    for (auto const& message: messages)
    {
        switch (message.kind)
        {
            case MessageKind::Assistant: {
                auto parsed = parse_generation(message.content, code_tag);
                if (parsed.tool_call)
                {
                    if (auto found = find_snippet(parsed.tool_call->code))
                        state.last_family = found->family;
                }
                else
                    ++state.progress;
                break;
            }
            case MessageKind::ToolResult:
                if (classify_error(message.content) != "UnknownError")
                {
                    ++state.visible_errors;
                    ++state.trailing_errors;
                }
                else
                {
                    ++state.progress;
                    state.trailing_errors = 0;
                }
                break;
            case MessageKind::Notice:
            case MessageKind::Instruction: state.trailing_errors = 0; break;
            case MessageKind::System:
            case MessageKind::Question: break;
        }
    }
    if (!messages.empty())
    {
        auto const last = messages.back().kind;
        state.manual_mode = last == MessageKind::Instruction || last == MessageKind::Notice;
    }
    return state;
}

namespace
{

    constexpr auto ReasoningLeads = std::array<std::string_view, 6> {
        "Let me set up the computation carefully.",
        "I will verify this numerically.",
        "Let me reconsider the structure of the problem.",
        "A direct computation should settle this.",
        "I can check the intermediate result with code.",
        "Let me organize what we know so far.",
    };

    constexpr auto ReasoningFillers = std::array<std::string_view, 8> {
        " The constraint couples the two quantities, so it helps to enumerate the small cases first.",
        " Symmetry suggests that only a handful of configurations need to be considered.",
        " Writing the expression in closed form reduces the search considerably.",
        " Each term can be bounded separately before combining them.",
        " The modular structure means we only need residues, not full values.",
        " Counting complementary cases is often simpler here.",
        " The recurrence stabilizes after a few steps, which we can confirm.",
        " It is worth double-checking the boundary cases explicitly.",
    };

    constexpr auto FixLeads = std::array<std::string_view, 4> {
        "The previous code raised an error; let me fix it.",
        "That failed. I will correct the mistake and rerun.",
        "The traceback points at a bug in my code.",
        "Let me try again with the error addressed.",
    };

    constexpr auto ShiftLeads = std::array<std::string_view, 3> {
        "Rather than patching that code, I will approach the problem differently.",
        "Let me switch to another method entirely.",
        "A different strategy may be more reliable here.",
    };

} // namespace

StochasticBackend::StochasticBackend(StochasticModelParams params, std::string gold_answer, std::string code_tag):
    _params(std::move(params)), _gold(std::move(gold_answer)), _code_tag(std::move(code_tag)), _rng(_params.rng_seed)
{
    _params.validate();
}

double StochasticBackend::uniform()
{
    // 53 high bits; mt19937_64 output is fixed by the standard, so streams match across platforms.
    return static_cast<double>(_rng() >> 11) * 0x1.0p-53;
}

std::size_t StochasticBackend::pick(std::size_t n)
{
    return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
}

std::string StochasticBackend::reasoning_text(std::string_view lead)
{
    auto text = std::string(lead);
    auto const sentences = 1 + pick(3);
    for (std::size_t i = 0; i < sentences; ++i)
        text += ReasoningFillers[pick(ReasoningFillers.size())];
    return text;
}

std::string StochasticBackend::wrong_answer()
{
    auto value = static_cast<long long>(0);
    auto const* first = _gold.data();
    auto const* last = _gold.data() + _gold.size();
    if (auto [ptr, ec] = std::from_chars(first, last, value); ec == std::errc() && ptr == last)
        return std::to_string(value + 1 + static_cast<long long>(pick(9)));
    return _gold + "'";
}

GenerationResult StochasticBackend::generate(std::span<Message const> messages, SamplingParams const&)
{
    if (messages.empty())
        throw ContractViolation("generate: empty message sequence");

    auto lock = std::lock_guard(_mutex);
    auto const state = read_prompt_state(messages, _code_tag);
    auto const families = snippet_families();

    auto text = std::string {};
    auto const answer = [&](double p_correct) {
        auto const value = uniform() < p_correct ? _gold : wrong_answer();
        text += "\n\nTherefore the answer is \\boxed{" + value + "}.";
    };
    auto const with_code = [&](std::string_view code) {
        text += "\n\n";
        text += render_code_block(code, PromptTemplate { .code_tag = _code_tag });
    };

    if (state.manual_mode)
    {
        text = reasoning_text("Working this out by hand without code.");
        answer(_params.p_correct_manual);
    }
    else if (state.trailing_errors > 0)
    {
        auto const& schedule = _params.resolve_schedule;
        auto const rho = schedule[std::min(state.trailing_errors - 1, schedule.size() - 1)];
        auto family = state.last_family.value_or(pick(families.size()));
        auto const shifted = uniform() < _params.p_intent_shift;
        if (shifted)
            family = (family + 1 + pick(families.size() - 1)) % families.size();
        auto const resolved = uniform() < rho;

        text = reasoning_text(shifted ? ShiftLeads[pick(ShiftLeads.size())] : FixLeads[pick(FixLeads.size())]);
        auto const& f = families[family];
        with_code(resolved ? f.working.code : f.broken[pick(f.broken.size())].code);
    }
    else if (state.progress >= _params.steps_to_answer)
    {
        text = reasoning_text("Collecting the verified results.");
        auto p_correct = _params.p_correct_given_errors.empty() ? 0.5 : _params.p_correct_given_errors.front().second;
        for (auto const& [minErrors, p]: _params.p_correct_given_errors)
            if (state.visible_errors >= minErrors)
                p_correct = p;
        answer(p_correct);
    }
    else if (uniform() < _params.p_tool_turn)
    {
        text = reasoning_text(ReasoningLeads[pick(ReasoningLeads.size())]);
        auto const& f = families[pick(families.size())];
        auto const errs = uniform() < _params.p_error_initial;
        with_code(errs ? f.broken[pick(f.broken.size())].code : f.working.code);
    }
    else
    {
        text = reasoning_text(ReasoningLeads[pick(ReasoningLeads.size())]);
    }

    auto parsed = parse_generation(text, _code_tag);
    auto result = GenerationResult {};
    result.reasoning = std::move(parsed.reasoning);
    result.tool_call = std::move(parsed.tool_call);
    result.final_answer = std::move(parsed.answer);
    result.completion_tokens = estimate_tokens(text);
    return result;
}

} // namespace prunetir
