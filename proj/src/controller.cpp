// SPDX-License-Identifier: Apache-2.0
#include <prunetir/answer.hpp>
#include <prunetir/controller.hpp>

#include <algorithm>

namespace prunetir
{

void EngineConfig::validate() const
{
    if (turn_limit < 1)
        throw ContractViolation("engine config: turn_limit must be at least 1");
    if (retry_limit < 1)
        throw ContractViolation("engine config: retry_limit must be at least 1");
    if (max_turns < 1)
        throw ContractViolation("engine config: max_turns must be at least 1");
    if (max_tokens_per_generation < 1)
        throw ContractViolation("engine config: max_tokens_per_generation must be at least 1");
    if (suspension_span < 1)
        throw ContractViolation("engine config: suspension_span must be at least 1");
    similarity.validate();
}

std::string EngineConfig::default_mrp_text()
{
    return "Your recent attempts to use the code interpreter kept failing. Stop writing code for now. Continue "
           "solving the problem through careful step-by-step manual reasoning and calculation, and put the final "
           "answer in \\boxed{}.";
}

std::string_view to_string(EpisodeOutcome outcome) noexcept
{
    switch (outcome)
    {
        case EpisodeOutcome::Answered: return "answered";
        case EpisodeOutcome::TurnBudgetExhausted: return "turn_budget_exhausted";
        case EpisodeOutcome::TokenBudgetExhausted: return "token_budget_exhausted";
        case EpisodeOutcome::BackendFailure: return "backend_failure";
    }
    return "unknown";
}

std::optional<EpisodeOutcome> parse_outcome(std::string_view text) noexcept
{
    for (auto o: { EpisodeOutcome::Answered, EpisodeOutcome::TurnBudgetExhausted, EpisodeOutcome::TokenBudgetExhausted,
                   EpisodeOutcome::BackendFailure })
        if (to_string(o) == text)
            return o;
    return std::nullopt;
}

std::string_view to_string(EventKind kind) noexcept
{
    switch (kind)
    {
        case EventKind::Generate: return "generate";
        case EventKind::Execute: return "execute";
        case EventKind::Stp: return "stp";
        case EventKind::Stpr: return "stpr";
        case EventKind::Rtts: return "rtts";
    }
    return "unknown";
}

bool detect_error(ToolFeedback const& feedback) noexcept
{
    return feedback.is_error;
}

bool check_stuck(ResolutionSegment const& segment, std::size_t turn_limit)
{
    if (segment.outcome != SegmentOutcome::Open)
        throw ContractViolation("check_stuck: segment already closed");
    return segment.attempts.size() == turn_limit + 1
           && std::all_of(segment.attempts.begin(), segment.attempts.end(), [](auto const& a) { return a.is_error; });
}

bool check_rtts(std::size_t consecutive_stpr, std::size_t retry_limit) noexcept
{
    return consecutive_stpr >= retry_limit;
}

void inject_mrp(Trajectory& trajectory, EngineConfig const& config, ControllerState& state)
{
    auto const log = trajectory.full_log();
    if (!log.empty() && log.back().kind == TurnKind::Instruction)
        throw ContractViolation("inject_mrp: manual reasoning prompt already pending");

    auto turn = Turn {};
    turn.ordinal = trajectory.next_ordinal();
    turn.kind = TurnKind::Instruction;
    turn.reasoning = config.mrp_text;
    turn.resample_generation = state.resample_generation;
    trajectory.append(std::move(turn));

    state.mode = ControllerMode::Suspended;
    state.suspension_remaining = config.suspension_span;
}

std::vector<ResolutionStep> resolution_steps(Trajectory const& trajectory, ResolutionSegment const& segment)
{
    if (!segment.resolved_at)
        throw ContractViolation("resolution_steps: segment is not resolved");
    auto steps = std::vector<ResolutionStep> {};
    for (auto ordinal = segment.start_ordinal; ordinal <= *segment.resolved_at; ++ordinal)
    {
        auto const& turn = trajectory.at(ordinal);
        if (turn.kind != TurnKind::Model)
            continue;
        steps.push_back({ turn.reasoning, turn.tool_call ? turn.tool_call->code : std::string {} });
    }
    return steps;
}

// ----------------------------------------------------------------------------

namespace
{

    class EpisodeRunner
    {
      public:
        EpisodeRunner(std::string_view question, EngineConfig const& config, ModelBackend& backend, ToolGateway& tool,
                      EpisodeOptions const& options):
            _config(config), _backend(backend), _tool(tool), _options(options)
        {
            _result.trajectory = Trajectory(std::string(question));
            _sampling = config.sampling;
            _sampling.max_tokens = config.max_tokens_per_generation;
        }

        EpisodeResult run(std::optional<std::string> const& gold)
        {
            loop();
            finish(gold);
            return std::move(_result);
        }

      private:
        Trajectory& traj() { return _result.trajectory; }
        EpisodeCounters& counters() { return _result.counters; }

        void emit(EventKind kind, Ordinal ordinal, ResolutionSegment const* segment = nullptr)
        {
            if (_options.observer)
                _options.observer(EpisodeEvent { kind, ordinal, segment }, traj(), _state);
        }

        void fail(std::string what)
        {
            _result.outcome = EpisodeOutcome::BackendFailure;
            _result.failure = std::move(what);
        }

        void loop()
        {
            while (true)
            {
                if (_state.generations_used >= _config.max_turns)
                {
                    _result.outcome = EpisodeOutcome::TurnBudgetExhausted;
                    return;
                }
                if (_config.max_completion_tokens && counters().completion_tokens_total >= *_config.max_completion_tokens)
                {
                    _result.outcome = EpisodeOutcome::TokenBudgetExhausted;
                    return;
                }

                auto const messages = render_working_context(traj(), _config.prompt);
                counters().working_tokens_peak = std::max(counters().working_tokens_peak, estimate_tokens(messages));

                auto generation = GenerationResult {};
                try
                {
                    generation = generate_with_retry(_backend, messages, _sampling, _config.retry);
                }
                catch (BackendError const& e)
                {
                    fail(e.what());
                    return;
                }
                ++_state.generations_used;
                counters().completion_tokens_total += generation.completion_tokens;

                auto turn = Turn {};
                turn.ordinal = traj().next_ordinal();
                turn.reasoning = std::move(generation.reasoning);
                turn.tool_call = std::move(generation.tool_call);
                turn.resample_generation = _state.resample_generation;
                turn.prompt_tokens = generation.prompt_tokens;
                turn.completion_tokens = generation.completion_tokens;
                if (!turn.tool_call)
                    turn.answer = std::move(generation.final_answer);

                if (!turn.has_code())
                {
                    if (handle_tool_free(std::move(turn)))
                        return;
                    continue;
                }

                if (_state.mode == ControllerMode::Suspended)
                {
                    auto notice = ToolFeedback {};
                    notice.suspended = true;
                    turn.tool_feedback = std::move(notice);
                    auto const ordinal = turn.ordinal;
                    traj().append(std::move(turn));
                    ++counters().suspended_calls;
                    emit(EventKind::Generate, ordinal);
                    continue;
                }

                auto feedback = ToolFeedback {};
                try
                {
                    feedback = _tool.execute(turn.tool_call->code, _config.tool_timeout, _options.session_id);
                }
                catch (ToolTransportError const& e)
                {
                    fail(e.what());
                    return;
                }

                auto const ordinal = turn.ordinal;
                auto const erroneous = detect_error(feedback);
                auto before = WorkingView {};
                if (erroneous && !_open)
                    before = traj().working();
                auto const errorType = feedback.error_type.value_or("UnknownError");

                turn.tool_feedback = std::move(feedback);
                traj().append(std::move(turn));
                ++counters().tool_calls_total;
                emit(EventKind::Generate, ordinal);
                emit(EventKind::Execute, ordinal);

                if (erroneous)
                    on_error(ordinal, errorType, std::move(before));
                else
                    on_success(ordinal);
            }
        }

        /// Returns true when the episode is over.
        bool handle_tool_free(Turn turn)
        {
            auto const ordinal = turn.ordinal;
            auto const answered = turn.answer.has_value();
            if (answered)
                _result.answer = turn.answer;
            traj().append(std::move(turn));
            emit(EventKind::Generate, ordinal);
            if (answered)
            {
                _result.outcome = EpisodeOutcome::Answered;
                return true;
            }
            if (_state.mode == ControllerMode::Suspended && --_state.suspension_remaining == 0)
                _state.mode = _open ? ControllerMode::Resolving : ControllerMode::Normal;
            return false;
        }

        void on_success(Ordinal ordinal)
        {
            _state.consecutive_stpr = 0;
            _state.resample_generation = 0;
            if (!_open)
                return;

            auto& segment = *_open;
            segment.attempts.push_back({ ordinal, false });
            segment.outcome = SegmentOutcome::Resolved;
            segment.resolved_at = ordinal;
            _closed.push_back(std::move(segment));
            _open.reset();
            _state.mode = ControllerMode::Normal;

            if (_config.features.stp)
            {
                auto const& closed = _closed.back();
                auto merged = _config.features.intent_merge
                                  ? merge_reasoning_on_intent_shift(resolution_steps(traj(), closed), _config.similarity)
                                  : traj().at(closed.start_ordinal).reasoning;
                traj().prune_resolved(closed, std::move(merged));
                ++counters().stp_count;
                emit(EventKind::Stp, ordinal, &closed);
            }
        }

        void on_error(Ordinal ordinal, std::string const& errorType, WorkingView before)
        {
            ++counters().erroneous_calls_total;
            if (!_open)
            {
                _open = ResolutionSegment {};
                _open->start_ordinal = ordinal;
                _open->error_type = errorType;
                _open->working_before = std::move(before);
                _state.mode = ControllerMode::Resolving;
            }
            _open->attempts.push_back({ ordinal, true });

            if (!_config.features.stpr || !check_stuck(*_open, _config.turn_limit))
                return;

            _open->outcome = SegmentOutcome::Stuck;
            traj().prune_stuck(*_open);
            if (traj().working() != _open->working_before)
                throw std::logic_error("stpr: working context not restored to the pre-error snapshot");
            _closed.push_back(std::move(*_open));
            _open.reset();
            _state.mode = ControllerMode::Normal;
            ++counters().stpr_count;
            ++_state.consecutive_stpr;
            emit(EventKind::Stpr, ordinal, &_closed.back());

            auto counted = _state.consecutive_stpr;
            if (_config.rtts_count_origin == RttsCountOrigin::ResamplesOnly)
                counted = counted > 0 ? counted - 1 : 0;

            if (_config.features.rtts && check_rtts(counted, _config.retry_limit))
            {
                inject_mrp(traj(), _config, _state);
                ++counters().rtts_count;
                emit(EventKind::Rtts, traj().full_log().back().ordinal);
            }
            else
                ++_state.resample_generation;
        }

        void finish(std::optional<std::string> const& gold)
        {
            if (_open)
                _closed.push_back(std::move(*_open));
            _result.segments = std::move(_closed);

            counters().generations_used = _state.generations_used;
            auto const working = render_working_context(traj(), _config.prompt);
            counters().working_tokens_final = estimate_tokens(working);
            counters().working_tokens_peak = std::max(counters().working_tokens_peak, counters().working_tokens_final);
            counters().total_tokens = estimate_tokens(render_full_log(traj(), _config.prompt));

            if (!gold || _result.outcome == EpisodeOutcome::BackendFailure)
                return;
            if (!_result.answer)
            {
                _result.correct = false;
                return;
            }
            _result.correct = _options.checker ? _options.checker(*_result.answer, *gold)
                                               : check_answer(*_result.answer, *gold);
        }

        EngineConfig const& _config;
        ModelBackend& _backend;
        ToolGateway& _tool;
        EpisodeOptions const& _options;
        SamplingParams _sampling;

        EpisodeResult _result;
        ControllerState _state;
        std::optional<ResolutionSegment> _open;
        std::vector<ResolutionSegment> _closed;
    };

} // namespace

EpisodeResult run_episode(std::string_view question, std::optional<std::string> const& gold, EngineConfig const& config,
                          ModelBackend& backend, ToolGateway& tool, EpisodeOptions const& options)
{
    config.validate();
    return EpisodeRunner(question, config, backend, tool, options).run(gold);
}

EpisodeResult run_episode_vanilla(std::string_view question, std::optional<std::string> const& gold,
                                  EngineConfig config, ModelBackend& backend, ToolGateway& tool,
                                  EpisodeOptions const& options)
{
    config.features = FeatureFlags::none();
    return run_episode(question, gold, config, backend, tool, options);
}

} // namespace prunetir
