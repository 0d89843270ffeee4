// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <prunetir/backends.hpp>
#include <prunetir/similarity.hpp>
#include <prunetir/toolgate.hpp>
#include <prunetir/trajectory.hpp>

#include <chrono>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace prunetir
{

struct FeatureFlags
{
    bool stp = true;
    bool stpr = true;
    bool rtts = true;
    bool intent_merge = true;

    [[nodiscard]] static constexpr FeatureFlags none() noexcept { return { false, false, false, false }; }
    [[nodiscard]] static constexpr FeatureFlags all() noexcept { return {}; }
    [[nodiscard]] bool any() const noexcept { return stp || stpr || rtts; }

    bool operator==(FeatureFlags const&) const = default;
};

/// Which STPR firings count towards RetryLimit.
enum class RttsCountOrigin
{
    IncludeOriginal, // the stuck segment's own STPR is firing 1
    ResamplesOnly,   // only STPRs of resampled calls count
};

struct EngineConfig
{
    std::size_t turn_limit = 2;
    std::size_t retry_limit = 2;
    std::size_t max_turns = 50;
    std::size_t max_tokens_per_generation = 16384;
    std::optional<std::size_t> max_completion_tokens; // episode-level ceiling; unlimited when unset
    SamplingParams sampling;
    SimilarityParams similarity;
    FeatureFlags features;
    std::size_t suspension_span = 1;
    std::string mrp_text = default_mrp_text();
    RttsCountOrigin rtts_count_origin = RttsCountOrigin::IncludeOriginal;
    PromptTemplate prompt;
    std::chrono::milliseconds tool_timeout { 30000 };
    bool persistent_sessions = false;
    RetryPolicy retry;

    void validate() const;

    [[nodiscard]] static std::string default_mrp_text();
};

enum class ControllerMode
{
    Normal,
    Resolving,
    Suspended,
};

struct ControllerState
{
    ControllerMode mode = ControllerMode::Normal;
    std::size_t suspension_remaining = 0;
    std::size_t consecutive_stpr = 0;
    std::size_t generations_used = 0;
    std::size_t resample_generation = 0;
};

enum class EpisodeOutcome
{
    Answered,
    TurnBudgetExhausted,
    TokenBudgetExhausted,
    BackendFailure,
};

[[nodiscard]] std::string_view to_string(EpisodeOutcome outcome) noexcept;
[[nodiscard]] std::optional<EpisodeOutcome> parse_outcome(std::string_view text) noexcept;

struct EpisodeCounters
{
    std::size_t tool_calls_total = 0;
    std::size_t erroneous_calls_total = 0;
    std::size_t stp_count = 0;
    std::size_t stpr_count = 0;
    std::size_t rtts_count = 0;
    std::size_t suspended_calls = 0;
    std::size_t working_tokens_final = 0;
    std::size_t working_tokens_peak = 0;
    std::size_t total_tokens = 0; // render of the full log, pruned turns included
    std::size_t completion_tokens_total = 0;
    std::size_t generations_used = 0;

    bool operator==(EpisodeCounters const&) const = default;
};

struct EpisodeResult
{
    EpisodeOutcome outcome = EpisodeOutcome::Answered;
    std::optional<std::string> answer;
    std::optional<bool> correct;
    Trajectory trajectory { "" };
    std::vector<ResolutionSegment> segments; // closed and still-open segments, in opening order
    EpisodeCounters counters;
    std::string failure; // backend or tool error text when outcome is BackendFailure
};

enum class EventKind
{
    Generate,
    Execute,
    Stp,
    Stpr,
    Rtts,
};

[[nodiscard]] std::string_view to_string(EventKind kind) noexcept;

struct EpisodeEvent
{
    EventKind kind = EventKind::Generate;
    Ordinal ordinal = 0;
    ResolutionSegment const* segment = nullptr; // set for Stp and Stpr
};

using EpisodeObserver = std::function<void(EpisodeEvent const&, Trajectory const&, ControllerState const&)>;
using AnswerChecker = std::function<bool(std::string_view predicted, std::string_view gold)>;

struct EpisodeOptions
{
    EpisodeObserver observer;
    AnswerChecker checker; // defaults to check_answer
    std::optional<std::string> session_id;
};

// ----------------------------------------------------------------------------
// Decision primitives

/// Err(tf)
[[nodiscard]] bool detect_error(ToolFeedback const& feedback) noexcept;

/// True when the open segment holds exactly turn_limit + 1 attempts, all erroneous.
[[nodiscard]] bool check_stuck(ResolutionSegment const& segment, std::size_t turn_limit);

/// True when consecutive STPR firings reach retry_limit.
[[nodiscard]] bool check_rtts(std::size_t consecutive_stpr, std::size_t retry_limit) noexcept;

/// Appends the manual reasoning prompt as an instruction turn and suspends tool use. Throws
/// ContractViolation when the previous turn is already an injected prompt.
void inject_mrp(Trajectory& trajectory, EngineConfig const& config, ControllerState& state);

/// Reasoning/code pairs for turns k..k★ of a resolved segment, read from the full log.
[[nodiscard]] std::vector<ResolutionStep> resolution_steps(Trajectory const& trajectory,
                                                           ResolutionSegment const& segment);

// ----------------------------------------------------------------------------
// Episode loop

/// Runs generate → execute until an answer or a budget stop, applying whichever pruning features
/// are enabled in `config`. Never throws for backend or tool failures.
[[nodiscard]] EpisodeResult run_episode(std::string_view question, std::optional<std::string> const& gold,
                                        EngineConfig const& config, ModelBackend& backend, ToolGateway& tool,
                                        EpisodeOptions const& options = {});

/// run_episode with every pruning feature off.
[[nodiscard]] EpisodeResult run_episode_vanilla(std::string_view question, std::optional<std::string> const& gold,
                                                EngineConfig config, ModelBackend& backend, ToolGateway& tool,
                                                EpisodeOptions const& options = {});

} // namespace prunetir
