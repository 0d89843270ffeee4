// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <prunetir/trajectory.hpp>

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace prunetir
{

struct SamplingParams
{
    double temperature = 1.0;
    double top_p = 0.7;
    int top_k = 50;
    std::size_t max_tokens = 16384;
    std::optional<std::uint64_t> seed;
};

struct GenerationResult
{
    std::string reasoning;
    std::optional<ToolCall> tool_call;
    std::optional<std::string> final_answer;
    std::size_t completion_tokens = 0;
    std::size_t prompt_tokens = 0;
};

/// A backend call failed. Retriable failures are transport or protocol faults worth retrying.
class BackendError: public std::runtime_error
{
  public:
    BackendError(std::string const& what, bool retriable): std::runtime_error(what), _retriable(retriable) {}
    [[nodiscard]] bool retriable() const noexcept { return _retriable; }

  private:
    bool _retriable;
};

/// The model M: messages in, one parsed generation out.
class ModelBackend
{
  public:
    virtual ~ModelBackend() = default;
    virtual GenerationResult generate(std::span<Message const> messages, SamplingParams const& sampling) = 0;
};

// ----------------------------------------------------------------------------
// Output parsing

struct ParsedGeneration
{
    std::string reasoning;
    std::optional<ToolCall> tool_call;
    std::optional<std::string> answer;
};

/// Splits raw model text: the last fenced block tagged `code_tag` becomes the tool call and is cut
/// out of the reasoning; otherwise the last \boxed{...} expression becomes the answer.
[[nodiscard]] ParsedGeneration parse_generation(std::string_view text, std::string_view code_tag = "python");

/// Content of the last balanced \boxed{...} in `text`.
[[nodiscard]] std::optional<std::string> extract_boxed(std::string_view text);

// ----------------------------------------------------------------------------
// Retry

struct RetryPolicy
{
    int max_attempts = 3;
    std::chrono::milliseconds initial_delay { 500 };
    double multiplier = 2.0;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

/// Retries retriable BackendErrors with exponential backoff; the last error propagates.
GenerationResult generate_with_retry(ModelBackend& backend, std::span<Message const> messages,
                                     SamplingParams const& sampling, RetryPolicy const& policy = {},
                                     Sleeper const& sleep = {});

// ----------------------------------------------------------------------------
// Scripted

/// Replays canned responses in order, ignoring the prompt.
class ScriptedBackend final: public ModelBackend
{
  public:
    explicit ScriptedBackend(std::vector<std::string> responses, std::string code_tag = "python");

    GenerationResult generate(std::span<Message const> messages, SamplingParams const& sampling) override;

    [[nodiscard]] std::size_t consumed() const;
    [[nodiscard]] std::size_t remaining() const;

  private:
    std::vector<std::string> _responses;
    std::string _code_tag;
    std::size_t _cursor = 0;
    mutable std::mutex _mutex;
};

// ----------------------------------------------------------------------------
// Stochastic

/// Parametric model of a tool-capable LLM for policy simulation.
struct StochasticModelParams
{
    double p_tool_turn = 0.9;     // chance that a progress step uses the tool
    double p_error_initial = 0.3; // chance that a fresh call errs
    // Resolve chance of the j-th attempt after an error (j from 1); the last entry repeats.
    std::vector<double> resolve_schedule { 0.5, 0.25, 0.1, 0.05 };
    // (minimum visible erroneous calls, answer correctness chance), ascending by the first member.
    std::vector<std::pair<std::size_t, double>> p_correct_given_errors { { 0, 0.75 }, { 1, 0.6 }, { 3, 0.45 }, { 6, 0.3 } };
    double p_correct_manual = 0.5;  // correctness when answering under the manual reasoning prompt
    double p_intent_shift = 0.2;    // chance that a resolution attempt switches approach
    std::size_t steps_to_answer = 3; // successful tool calls or plain reasoning steps before answering
    std::uint64_t rng_seed = 0;

    /// Throws ContractViolation on out-of-range probabilities or an empty schedule.
    void validate() const;
};

/// Reads its own state off the prompt: trailing erroneous results, visible errors, progress made,
/// and whether a manual reasoning prompt or suspension notice is pending. Codes come from the
/// snippet pool so SimulatedTool reproduces their outcomes.
class StochasticBackend final: public ModelBackend
{
  public:
    StochasticBackend(StochasticModelParams params, std::string gold_answer, std::string code_tag = "python");

    GenerationResult generate(std::span<Message const> messages, SamplingParams const& sampling) override;

  private:
    double uniform();
    std::size_t pick(std::size_t n);
    std::string reasoning_text(std::string_view lead);
    std::string wrong_answer();

    StochasticModelParams _params;
    std::string _gold;
    std::string _code_tag;
    std::mt19937_64 _rng;
    std::mutex _mutex;
};

/// What the stochastic model sees in a prompt.
struct PromptState
{
    std::size_t trailing_errors = 0;
    std::size_t visible_errors = 0;
    std::size_t progress = 0;
    bool manual_mode = false;
    std::optional<std::size_t> last_family;
};

[[nodiscard]] PromptState read_prompt_state(std::span<Message const> messages, std::string_view code_tag = "python");

// ----------------------------------------------------------------------------
// HTTP

struct HttpBackendConfig
{
    std::string url = "http://127.0.0.1:8000/v1/chat/completions";
    std::string model;
    std::string api_key_env = "PRUNETIR_API_KEY";
    std::string code_tag = "python";
    bool send_top_k = true;
    std::chrono::seconds timeout { 600 };
};

/// Body of a chat-completion request.
[[nodiscard]] std::string serialize_chat_request(std::span<Message const> messages, SamplingParams const& sampling,
                                                 std::string_view model, bool include_top_k);

/// Parses a chat-completion response body. Throws a retriable BackendError on a malformed body.
[[nodiscard]] GenerationResult parse_chat_response(std::string_view body, std::string_view code_tag = "python");

/// Chat-completion client over HTTP(S). Safe to share across episodes.
class HttpChatBackend final: public ModelBackend
{
  public:
    explicit HttpChatBackend(HttpBackendConfig config);

    GenerationResult generate(std::span<Message const> messages, SamplingParams const& sampling) override;

  private:
    HttpBackendConfig _config;
    std::string _origin;
    std::string _path;
    bool _send_top_k;
    std::mutex _mutex;
};

/// Splits "scheme://host[:port]/path" into origin and path.
[[nodiscard]] std::pair<std::string, std::string> split_url(std::string_view url);

} // namespace prunetir
