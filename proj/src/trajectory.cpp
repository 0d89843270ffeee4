// SPDX-License-Identifier: Apache-2.0
#include <prunetir/trajectory.hpp>

#include <algorithm>
#include <string>

namespace prunetir
{

Trajectory::Trajectory(std::string question): _question(std::move(question))
{
}

Turn const& Trajectory::at(Ordinal ordinal) const
{
    if (ordinal >= _log.size())
        throw ContractViolation("trajectory: ordinal " + std::to_string(ordinal) + " out of range");
    return _log[ordinal];
}

std::string_view Trajectory::working_reasoning(Ordinal ordinal) const
{
    if (auto it = _working.reasoning_overlay.find(ordinal); it != _working.reasoning_overlay.end())
        return it->second;
    return at(ordinal).reasoning;
}

void Trajectory::append(Turn turn)
{
    if (turn.ordinal != _log.size())
        throw ContractViolation("trajectory: expected ordinal " + std::to_string(_log.size()) + ", got "
                                + std::to_string(turn.ordinal));
    if (turn.tool_feedback.has_value() != turn.has_code())
        throw ContractViolation("trajectory: feedback must accompany exactly the turns with code");
    if (turn.pruned)
        throw ContractViolation("trajectory: cannot append a pruned turn");

    _working.ordinals.push_back(turn.ordinal);
    _log.push_back(std::move(turn));
}

void Trajectory::mark_pruned(Ordinal first, Ordinal last)
{
    for (auto ordinal = first; ordinal <= last && ordinal < _log.size(); ++ordinal)
    {
        _log[ordinal].pruned = true;
        _working.reasoning_overlay.erase(ordinal);
    }
    std::erase_if(_working.ordinals, [&](Ordinal o) { return o >= first && o <= last; });
}

void Trajectory::prune_resolved(ResolutionSegment const& segment, std::string merged_reasoning)
{
    if (segment.outcome != SegmentOutcome::Resolved || !segment.resolved_at)
        throw ContractViolation("stp_prune: segment is not resolved");
    auto const k = segment.start_ordinal;
    auto const kStar = *segment.resolved_at;
    if (kStar <= k || kStar >= _log.size())
        throw ContractViolation("stp_prune: resolution ordinal outside the log");
    if (at(kStar).pruned)
        throw ContractViolation("stp_prune: resolving turn already pruned");

    mark_pruned(k, kStar - 1);
    _working.reasoning_overlay[kStar] = std::move(merged_reasoning);
}

void Trajectory::prune_stuck(ResolutionSegment const& segment)
{
    if (segment.outcome != SegmentOutcome::Stuck)
        throw ContractViolation("stpr_prune: segment is not stuck");
    if (segment.attempts.empty() || segment.last_ordinal() >= _log.size())
        throw ContractViolation("stpr_prune: segment outside the log");

    mark_pruned(segment.start_ordinal, segment.last_ordinal());
}

void append_turn(Trajectory& trajectory, Turn turn)
{
    trajectory.append(std::move(turn));
}

void stp_prune(Trajectory& trajectory, ResolutionSegment const& segment, std::string merged_reasoning)
{
    trajectory.prune_resolved(segment, std::move(merged_reasoning));
}

void stpr_prune(Trajectory& trajectory, ResolutionSegment const& segment)
{
    trajectory.prune_stuck(segment);
}

// ----------------------------------------------------------------------------

std::string PromptTemplate::default_system_prompt()
{
    return "Solve the following problem step by step. You may run Python code by writing it in a fenced "
           "```python block; the interpreter output is returned to you inside <result></result>. Put the "
           "final answer in \\boxed{}.";
}

std::string PromptTemplate::default_suspension_notice()
{
    return "Code execution is currently suspended. Continue with manual reasoning.";
}

std::string render_code_block(std::string_view code, PromptTemplate const& tmpl)
{
    auto block = std::string("```") + tmpl.code_tag + "\n";
    block.append(code);
    if (!code.empty() && code.back() != '\n')
        block += '\n';
    block += "```";
    return block;
}

namespace
{

    std::string wrap_result(std::string_view body, PromptTemplate const& tmpl)
    {
        if (!body.empty() && body.back() == '\n')
            body.remove_suffix(1);
        auto out = tmpl.result_open + "\n";
        out.append(body);
        out += "\n" + tmpl.result_close;
        return out;
    }

    std::string feedback_body(ToolFeedback const& feedback)
    {
        auto body = feedback.stdout_text;
        if (!feedback.stderr_text.empty())
        {
            if (!body.empty() && body.back() != '\n')
                body += '\n';
            body += feedback.stderr_text;
        }
        return body;
    }

    void render_turn(std::vector<Message>& out, Turn const& turn, std::string_view reasoning, PromptTemplate const& tmpl)
    {
        if (turn.kind == TurnKind::Instruction)
        {
            out.push_back({ tmpl.instruction_role, std::string(reasoning), MessageKind::Instruction });
            return;
        }

        auto content = std::string(reasoning);
        if (turn.tool_call)
        {
            if (!content.empty())
                content += "\n\n";
            content += render_code_block(turn.tool_call->code, tmpl);
        }
        out.push_back({ "assistant", std::move(content), MessageKind::Assistant });

        if (turn.tool_feedback)
        {
            if (turn.tool_feedback->suspended)
                out.push_back({ tmpl.tool_role, wrap_result(tmpl.suspension_notice, tmpl), MessageKind::Notice });
            else
                out.push_back(
                    { tmpl.tool_role, wrap_result(feedback_body(*turn.tool_feedback), tmpl), MessageKind::ToolResult });
        }
    }

    std::vector<Message> preamble(Trajectory const& trajectory, PromptTemplate const& tmpl)
    {
        return {
            { "system", tmpl.system_prompt, MessageKind::System },
            { "user", trajectory.question(), MessageKind::Question },
        };
    }

} // namespace

std::vector<Message> render_working_context(Trajectory const& trajectory, PromptTemplate const& tmpl)
{
    auto out = preamble(trajectory, tmpl);
    for (auto ordinal: trajectory.working().ordinals)
        render_turn(out, trajectory.at(ordinal), trajectory.working_reasoning(ordinal), tmpl);
    return out;
}

std::vector<Message> render_full_log(Trajectory const& trajectory, PromptTemplate const& tmpl)
{
    auto out = preamble(trajectory, tmpl);
    for (auto const& turn: trajectory.full_log())
        render_turn(out, turn, turn.reasoning, tmpl);
    return out;
}

std::size_t estimate_tokens(std::string_view text) noexcept
{
    return (text.size() + 3) / 4;
}

std::size_t estimate_tokens(std::span<Message const> messages) noexcept
{
    std::size_t total = 0;
    for (auto const& m: messages)
        total += estimate_tokens(m.content);
    return total;
}

} // namespace prunetir
