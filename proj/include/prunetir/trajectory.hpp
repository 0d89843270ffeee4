// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace prunetir
{

/// Raised when a caller breaks an operation's precondition.
class ContractViolation: public std::logic_error
{
  public:
    using std::logic_error::logic_error;
};

using Ordinal = std::size_t;

struct ToolCall
{
    std::string raw_text; // verbatim block as the model wrote it, fences included
    std::string code;     // executable body

    bool operator==(ToolCall const&) const = default;
};

struct ToolFeedback
{
    std::string stdout_text;
    std::string stderr_text;
    bool is_error = false;
    std::optional<std::string> error_type;
    std::chrono::milliseconds wall { 0 };
    // Set when the call was withheld because tool use is suspended.
    bool suspended = false;

    bool operator==(ToolFeedback const&) const = default;
};

enum class TurnKind
{
    Model,       // one model generation
    Instruction, // synthetic non-model turn (manual reasoning prompt)
};

struct Turn
{
    Ordinal ordinal = 0;
    TurnKind kind = TurnKind::Model;
    std::string reasoning;
    std::optional<ToolCall> tool_call;
    std::optional<ToolFeedback> tool_feedback;
    std::optional<std::string> answer;
    bool pruned = false;
    std::size_t resample_generation = 0;
    std::size_t prompt_tokens = 0;
    std::size_t completion_tokens = 0;

    [[nodiscard]] bool has_code() const noexcept { return tool_call && !tool_call->code.empty(); }
    [[nodiscard]] bool executed() const noexcept { return tool_feedback && !tool_feedback->suspended; }
    [[nodiscard]] bool is_error() const noexcept { return tool_feedback && tool_feedback->is_error; }

    bool operator==(Turn const&) const = default;
};

enum class SegmentOutcome
{
    Open,
    Resolved,
    Stuck,
};

struct ResolutionAttempt
{
    Ordinal ordinal = 0;
    bool is_error = true;

    bool operator==(ResolutionAttempt const&) const = default;
};

/// Retained context: ordinals into the full log plus per-ordinal reasoning overrides left by STP merges.
struct WorkingView
{
    std::vector<Ordinal> ordinals;
    std::map<Ordinal, std::string> reasoning_overlay;

    bool operator==(WorkingView const&) const = default;
};

/// Error-resolution trace: from the first erroneous call k to the resolving call k★ or a stuck verdict.
/// `attempts` holds the executed tool calls inside the trace, k first.
struct ResolutionSegment
{
    Ordinal start_ordinal = 0;
    std::vector<ResolutionAttempt> attempts;
    SegmentOutcome outcome = SegmentOutcome::Open;
    std::optional<Ordinal> resolved_at;
    std::string error_type;     // type of the initial error
    WorkingView working_before; // working view just before turn k was appended

    [[nodiscard]] Ordinal last_ordinal() const { return attempts.empty() ? start_ordinal : attempts.back().ordinal; }
    [[nodiscard]] std::size_t turns_to_resolve() const { return attempts.empty() ? 0 : attempts.size() - 1; }

    bool operator==(ResolutionSegment const&) const = default;
};

/// Full generation log plus the pruned working view over it. The log is append-only; pruning only
/// flips flags and edits the working view.
class Trajectory
{
  public:
    explicit Trajectory(std::string question);

    [[nodiscard]] std::string const& question() const noexcept { return _question; }
    [[nodiscard]] std::span<Turn const> full_log() const noexcept { return _log; }
    [[nodiscard]] WorkingView const& working() const noexcept { return _working; }
    [[nodiscard]] Turn const& at(Ordinal ordinal) const;
    [[nodiscard]] Ordinal next_ordinal() const noexcept { return _log.size(); }

    /// Reasoning as it appears in the working context (overlay applied).
    [[nodiscard]] std::string_view working_reasoning(Ordinal ordinal) const;

    void append(Turn turn);

    /// Success-triggered pruning: drops [k, k★) from the working view and overlays
    /// `merged_reasoning` on k★.
    void prune_resolved(ResolutionSegment const& segment, std::string merged_reasoning);

    /// Stuck-triggered pruning: drops every turn from k to the end of the segment.
    void prune_stuck(ResolutionSegment const& segment);

    bool operator==(Trajectory const&) const = default;

  private:
    void mark_pruned(Ordinal first, Ordinal last);

    std::string _question;
    std::vector<Turn> _log;
    WorkingView _working;
};

// Free-function spellings of the trajectory edits.
void append_turn(Trajectory& trajectory, Turn turn);
void stp_prune(Trajectory& trajectory, ResolutionSegment const& segment, std::string merged_reasoning);
void stpr_prune(Trajectory& trajectory, ResolutionSegment const& segment);

// ----------------------------------------------------------------------------
// Rendering

enum class MessageKind
{
    System,
    Question,
    Assistant,
    ToolResult,
    Notice,      // suspension notice standing in for a withheld tool result
    Instruction, // manual reasoning prompt
};

struct Message
{
    std::string role;
    std::string content;
    MessageKind kind = MessageKind::Assistant;

    bool operator==(Message const&) const = default;
};

struct PromptTemplate
{
    std::string system_prompt = default_system_prompt();
    std::string code_tag = "python";
    std::string result_open = "<result>";
    std::string result_close = "</result>";
    std::string tool_role = "tool";
    std::string instruction_role = "user";
    std::string suspension_notice = default_suspension_notice();

    static std::string default_system_prompt();
    static std::string default_suspension_notice();
};

/// Deterministic serialization of the working view.
[[nodiscard]] std::vector<Message> render_working_context(Trajectory const& trajectory, PromptTemplate const& tmpl);

/// Same layout over every turn of the full log with original reasoning; the unpruned history.
[[nodiscard]] std::vector<Message> render_full_log(Trajectory const& trajectory, PromptTemplate const& tmpl);

[[nodiscard]] std::string render_code_block(std::string_view code, PromptTemplate const& tmpl);

/// Fallback token estimator: ceil(chars / 4).
[[nodiscard]] std::size_t estimate_tokens(std::string_view text) noexcept;
[[nodiscard]] std::size_t estimate_tokens(std::span<Message const> messages) noexcept;

} // namespace prunetir
