// SPDX-License-Identifier: Apache-2.0
#include <prunetir/snippet_pool.hpp>
#include <prunetir/toolgate.hpp>

#include <httplib.h>
#include <json.hpp>

#include <array>
#include <cctype>
#include <sstream>

namespace prunetir
{

namespace
{

    constexpr auto NonErrorExceptions = std::array<std::string_view, 6> {
        "Exception", "KeyboardInterrupt", "StopIteration", "SystemExit", "GeneratorExit", "RecursionError",
    };

    bool is_ident_start(char c)
    {
        return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
    }

    bool is_ident_char(char c)
    {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
    }

    /// Returns the exception class named at the start of `line`, if any.
    std::optional<std::string> exception_name(std::string_view line)
    {
        auto end = std::size_t { 0 };
        auto last_start = std::size_t { 0 };
        // Dotted path: pkg.module.ClassName
        while (true)
        {
            if (end >= line.size() || !is_ident_start(line[end]))
                return std::nullopt;
            last_start = end;
            while (end < line.size() && is_ident_char(line[end]))
                ++end;
            if (end < line.size() && line[end] == '.')
            {
                ++end;
                continue;
            }
            break;
        }

        auto const name = line.substr(last_start, end - last_start);
        auto const known = name.ends_with("Error")
                           || std::find(NonErrorExceptions.begin(), NonErrorExceptions.end(), name)
                                  != NonErrorExceptions.end();
        if (!known)
            return std::nullopt;
        return std::string(name);
    }

} // namespace

std::string classify_error(std::string_view stderr_text)
{
    auto result = std::optional<std::string> {};
    auto start = std::size_t { 0 };
    while (start <= stderr_text.size())
    {
        auto stop = stderr_text.find('\n', start);
        if (stop == std::string_view::npos)
            stop = stderr_text.size();
        if (auto name = exception_name(stderr_text.substr(start, stop - start)))
            result = std::move(name);
        start = stop + 1;
    }
    return result.value_or("UnknownError");
}

std::string truncate_output(std::string_view text, std::size_t limit)
{
    if (text.size() <= limit)
        return std::string(text);
    auto cut = limit;
    while (cut > 0 && (static_cast<unsigned char>(text[cut]) & 0xC0) == 0x80)
        --cut;
    auto out = std::string(text.substr(0, cut));
    out += "\n...[truncated " + std::to_string(text.size() - cut) + " bytes]";
    return out;
}

// ----------------------------------------------------------------------------

InFlightLimiter::InFlightLimiter(std::size_t limit): _limit(std::max<std::size_t>(1, limit))
{
}

InFlightLimiter::Permit::Permit(InFlightLimiter& owner): _owner(owner)
{
    auto lock = std::unique_lock(_owner._mutex);
    _owner._released.wait(lock, [&] { return _owner._count < _owner._limit; });
    ++_owner._count;
}

InFlightLimiter::Permit::~Permit()
{
    {
        auto lock = std::lock_guard(_owner._mutex);
        --_owner._count;
    }
    _owner._released.notify_one();
}

std::size_t InFlightLimiter::in_flight() const
{
    auto lock = std::lock_guard(_mutex);
    return _count;
}

// ----------------------------------------------------------------------------

std::string serialize_execute_request(std::string_view code, std::chrono::milliseconds timeout,
                                      std::optional<std::string> const& session_id)
{
    auto body = nlohmann::json {
        { "code", code },
        { "timeout_s", static_cast<double>(timeout.count()) / 1000.0 },
    };
    if (session_id)
        body["session_id"] = *session_id;
    return body.dump();
}

ToolFeedback parse_execute_response(std::string_view body, std::size_t output_limit)
{
    auto json = nlohmann::json::parse(body, nullptr, false);
    if (json.is_discarded() || !json.is_object())
        throw ToolTransportError("sandbox: response is not a JSON object");

    try
    {
        auto feedback = ToolFeedback {};
        feedback.stdout_text = truncate_output(json.value("stdout", std::string {}), output_limit);
        feedback.stderr_text = truncate_output(json.value("stderr", std::string {}), output_limit);
        feedback.is_error = !json.at("ok").get<bool>();
        feedback.wall = std::chrono::milliseconds(static_cast<long long>(json.value("wall_ms", 0.0)));
        if (feedback.is_error)
        {
            auto const it = json.find("error_type");
            if (it != json.end() && it->is_string() && !it->get<std::string>().empty())
                feedback.error_type = it->get<std::string>();
            else
                feedback.error_type = classify_error(feedback.stderr_text);
        }
        return feedback;
    }
    catch (nlohmann::json::exception const& e)
    {
        throw ToolTransportError(std::string("sandbox: malformed response: ") + e.what());
    }
}

HttpToolGateway::HttpToolGateway(HttpToolConfig config):
    _config(std::move(config)), _limiter(_config.max_in_flight)
{
}

ToolFeedback HttpToolGateway::execute(std::string_view code, std::chrono::milliseconds timeout,
                                      std::optional<std::string> const& session_id)
{
    if (code.empty())
        throw ContractViolation("execute: empty code");

    auto permit = InFlightLimiter::Permit(_limiter);
    auto client = httplib::Client(_config.base_url);
    auto const budget = timeout + _config.transport_slack;
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(budget));
    client.set_connection_timeout(std::chrono::seconds(5));

    auto const request = serialize_execute_request(code, timeout, session_id);
    auto const started = std::chrono::steady_clock::now();
    auto response = client.Post("/execute", request, "application/json");
    auto const elapsed =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started);

    if (!response)
        throw ToolTransportError("sandbox unreachable: " + httplib::to_string(response.error()));
    if (response->status < 200 || response->status >= 300)
        throw ToolTransportError("sandbox returned HTTP " + std::to_string(response->status));

    auto feedback = parse_execute_response(response->body, _config.output_limit);
    if (feedback.wall.count() == 0)
        feedback.wall = elapsed;
    return feedback;
}

// ----------------------------------------------------------------------------

namespace
{

    std::string_view trim(std::string_view s)
    {
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
            s.remove_prefix(1);
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
            s.remove_suffix(1);
        return s;
    }

    /// Body of a single string literal argument: "text" or 'text'. Escapes are not interpreted.
    std::optional<std::string_view> literal_argument(std::string_view args)
    {
        args = trim(args);
        if (args.size() < 2)
            return std::nullopt;
        auto const quote = args.front();
        if ((quote != '"' && quote != '\'') || args.back() != quote)
            return std::nullopt;
        return args.substr(1, args.size() - 2);
    }

} // namespace

ToolFeedback SimulatedTool::execute(std::string_view code, std::chrono::milliseconds timeout,
                                    std::optional<std::string> const&)
{
    if (code.empty())
        throw ContractViolation("execute: empty code");

    if (auto found = find_snippet(code))
    {
        auto const& snippet = *found->snippet;
        auto feedback = ToolFeedback {};
        feedback.stdout_text = snippet.stdout_text;
        feedback.stderr_text = snippet.stderr_text;
        feedback.is_error = !snippet.error_type.empty();
        if (feedback.is_error)
            feedback.error_type = std::string(snippet.error_type);
        return feedback;
    }

    auto feedback = ToolFeedback {};
    auto line_number = std::size_t { 0 };
    auto stream = std::istringstream(std::string(code));
    for (auto line = std::string {}; std::getline(stream, line);)
    {
        ++line_number;
        auto const text = trim(line);
        if (text.starts_with("while True"))
        {
            feedback.is_error = true;
            feedback.error_type = "TimeoutError";
            feedback.stderr_text = "TimeoutError: execution exceeded " + std::to_string(timeout.count()) + " ms\n";
            feedback.wall = timeout;
            return feedback;
        }
        if (text.starts_with("raise "))
        {
            auto const expr = trim(text.substr(6));
            auto const paren = expr.find('(');
            auto const name = std::string(expr.substr(0, paren));
            auto message = std::string {};
            if (paren != std::string_view::npos && expr.back() == ')')
                if (auto literal = literal_argument(expr.substr(paren + 1, expr.size() - paren - 2)))
                    message = *literal;
            feedback.is_error = true;
            feedback.error_type = classify_error(name + ":");
            feedback.stderr_text = "Traceback (most recent call last):\n  File \"<string>\", line "
                                   + std::to_string(line_number) + ", in <module>\n" + name
                                   + (message.empty() ? "" : ": " + message) + "\n";
            return feedback;
        }
        if (text.starts_with("print(") && text.ends_with(")"))
            if (auto literal = literal_argument(text.substr(6, text.size() - 7)))
                feedback.stdout_text += std::string(*literal) + "\n";
    }
    return feedback;
}

} // namespace prunetir
