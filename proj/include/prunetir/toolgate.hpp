// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <prunetir/trajectory.hpp>

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace prunetir
{

/// The sandbox could not be reached or answered outside its contract.
class ToolTransportError: public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

/// Exception class name from the last traceback line that names one; "UnknownError" otherwise.
[[nodiscard]] std::string classify_error(std::string_view stderr_text);

inline constexpr std::size_t DefaultOutputLimit = 4096;

/// Cuts `text` to `limit` bytes (on a UTF-8 boundary) and appends a marker naming the dropped size.
[[nodiscard]] std::string truncate_output(std::string_view text, std::size_t limit = DefaultOutputLimit);

/// Caps concurrent executions; waiters block instead of failing.
class InFlightLimiter
{
  public:
    explicit InFlightLimiter(std::size_t limit);

    class Permit
    {
      public:
        explicit Permit(InFlightLimiter& owner);
        ~Permit();
        Permit(Permit const&) = delete;
        Permit& operator=(Permit const&) = delete;

      private:
        InFlightLimiter& _owner;
    };

    [[nodiscard]] std::size_t in_flight() const;

  private:
    std::size_t _limit;
    std::size_t _count = 0;
    mutable std::mutex _mutex;
    std::condition_variable _released;
};

/// The tool T: code in, feedback out. Implementations must be safe for concurrent use.
class ToolGateway
{
  public:
    virtual ~ToolGateway() = default;

    /// `session_id` is set only when per-episode persistent interpreter state is enabled.
    virtual ToolFeedback execute(std::string_view code, std::chrono::milliseconds timeout,
                                 std::optional<std::string> const& session_id = std::nullopt) = 0;
};

struct HttpToolConfig
{
    std::string base_url = "http://127.0.0.1:8080";
    std::size_t max_in_flight = 8;
    std::size_t output_limit = DefaultOutputLimit;
    std::chrono::milliseconds transport_slack { 5000 };
};

/// Client for POST /execute on the sandbox service.
class HttpToolGateway final: public ToolGateway
{
  public:
    explicit HttpToolGateway(HttpToolConfig config);

    ToolFeedback execute(std::string_view code, std::chrono::milliseconds timeout,
                         std::optional<std::string> const& session_id = std::nullopt) override;

  private:
    HttpToolConfig _config;
    InFlightLimiter _limiter;
};

/// Request body for POST /execute.
[[nodiscard]] std::string serialize_execute_request(std::string_view code, std::chrono::milliseconds timeout,
                                                    std::optional<std::string> const& session_id);

/// Maps a 200 response body onto feedback. Throws ToolTransportError when the body breaks the contract.
[[nodiscard]] ToolFeedback parse_execute_response(std::string_view body, std::size_t output_limit = DefaultOutputLimit);

/// Offline interpreter for simulations and conformance scripts. Known pool snippets return their
/// recorded output; any other code fails with the exception named by its last `raise X(...)`
/// statement, and otherwise succeeds printing the literal arguments of `print("...")` lines.
class SimulatedTool final: public ToolGateway
{
  public:
    ToolFeedback execute(std::string_view code, std::chrono::milliseconds timeout,
                         std::optional<std::string> const& session_id = std::nullopt) override;
};

} // namespace prunetir
