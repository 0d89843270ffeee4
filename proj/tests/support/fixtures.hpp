// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <prunetir/backends.hpp>
#include <prunetir/controller.hpp>
#include <prunetir/toolgate.hpp>

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace fixtures
{

using namespace prunetir;

/// Model text carrying one tool call.
inline std::string call(std::string_view code, std::string_view reasoning = "Let me compute this.")
{
    return std::string(reasoning) + "\n\n```python\n" + std::string(code) + "\n```";
}

/// A call the simulated tool fails with `type`.
inline std::string err(std::string_view type = "NameError", std::string_view reasoning = "Let me compute this.")
{
    return call("raise " + std::string(type) + "(\"boom\")", reasoning);
}

/// A call the simulated tool runs successfully.
inline std::string ok(std::string_view printed = "42", std::string_view reasoning = "Let me compute this.")
{
    return call("print(\"" + std::string(printed) + "\")", reasoning);
}

inline std::string answer(std::string_view value, std::string_view reasoning = "So the result is")
{
    return std::string(reasoning) + " \\boxed{" + std::string(value) + "}.";
}

/// Records every prompt it receives and forwards to an inner backend.
class RecordingBackend final: public ModelBackend
{
  public:
    explicit RecordingBackend(ModelBackend& inner): _inner(inner) {}

    GenerationResult generate(std::span<Message const> messages, SamplingParams const& sampling) override
    {
        prompts.emplace_back(messages.begin(), messages.end());
        return _inner.generate(messages, sampling);
    }

    std::vector<std::vector<Message>> prompts;

  private:
    ModelBackend& _inner;
};

/// Counts executions and forwards to SimulatedTool.
class CountingTool final: public ToolGateway
{
  public:
    ToolFeedback execute(std::string_view code, std::chrono::milliseconds timeout,
                         std::optional<std::string> const& session_id = std::nullopt) override
    {
        ++calls;
        executed.emplace_back(code);
        return _inner.execute(code, timeout, session_id);
    }

    std::atomic<std::size_t> calls { 0 };
    std::vector<std::string> executed;

  private:
    SimulatedTool _inner;
};

inline EpisodeResult run_script(std::vector<std::string> script, EngineConfig const& config,
                                std::optional<std::string> gold = std::nullopt, EpisodeOptions const& options = {})
{
    auto backend = ScriptedBackend(std::move(script));
    auto tool = SimulatedTool {};
    return run_episode("What is the answer?", gold, config, backend, tool, options);
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(std::string_view name)
{
    auto const dir = std::filesystem::temp_directory_path()
                     / ("prunetir_test_" + std::string(name) + "_" + std::to_string(std::random_device {}()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace fixtures
