// SPDX-License-Identifier: Apache-2.0
#include <prunetir/backends.hpp>

#include <httplib.h>
#include <json.hpp>

#include <cstdlib>
#include <iostream>

namespace prunetir
{

std::pair<std::string, std::string> split_url(std::string_view url)
{
    auto const scheme = url.find("://");
    if (scheme == std::string_view::npos)
        throw ContractViolation("url must carry a scheme: " + std::string(url));
    auto const slash = url.find('/', scheme + 3);
    if (slash == std::string_view::npos)
        return { std::string(url), "/" };
    return { std::string(url.substr(0, slash)), std::string(url.substr(slash)) };
}

std::string serialize_chat_request(std::span<Message const> messages, SamplingParams const& sampling,
                                   std::string_view model, bool include_top_k)
{
    auto list = nlohmann::json::array();
    for (auto const& m: messages)
        list.push_back({ { "role", m.role }, { "content", m.content } });

    auto body = nlohmann::json::object();
    if (!model.empty())
        body["model"] = model;
    body["messages"] = std::move(list);
    body["temperature"] = sampling.temperature;
    body["top_p"] = sampling.top_p;
    if (include_top_k)
        body["top_k"] = sampling.top_k;
    body["max_tokens"] = sampling.max_tokens;
    if (sampling.seed)
        body["seed"] = *sampling.seed;
    return body.dump();
}

GenerationResult parse_chat_response(std::string_view body, std::string_view code_tag)
{
    auto json = nlohmann::json::parse(body, nullptr, false);
    if (json.is_discarded())
        throw BackendError("chat response is not JSON", true);

    try
    {
        auto const& message = json.at("choices").at(0).at("message");
        auto const content = message.at("content").is_null() ? std::string {} : message.at("content").get<std::string>();

        auto parsed = parse_generation(content, code_tag);
        auto result = GenerationResult {};
        result.reasoning = std::move(parsed.reasoning);
        result.tool_call = std::move(parsed.tool_call);
        result.final_answer = std::move(parsed.answer);
        result.completion_tokens = estimate_tokens(content);
        if (auto usage = json.find("usage"); usage != json.end() && usage->is_object())
        {
            result.completion_tokens = usage->value("completion_tokens", result.completion_tokens);
            result.prompt_tokens = usage->value("prompt_tokens", std::size_t { 0 });
        }
        return result;
    }
    catch (nlohmann::json::exception const& e)
    {
        throw BackendError(std::string("malformed chat response: ") + e.what(), true);
    }
}

HttpChatBackend::HttpChatBackend(HttpBackendConfig config):
    _config(std::move(config)), _send_top_k(_config.send_top_k)
{
    std::tie(_origin, _path) = split_url(_config.url);
}

GenerationResult HttpChatBackend::generate(std::span<Message const> messages, SamplingParams const& sampling)
{
    if (messages.empty())
        throw ContractViolation("generate: empty message sequence");

    auto headers = httplib::Headers {};
    if (auto const* key = std::getenv(_config.api_key_env.c_str()); key && *key)
        headers.emplace("Authorization", std::string("Bearer ") + key);

    for (auto dropped_top_k = false;; dropped_top_k = true)
    {
        auto send_top_k = false;
        {
            auto lock = std::lock_guard(_mutex);
            send_top_k = _send_top_k;
        }

        auto client = httplib::Client(_origin);
        client.set_read_timeout(_config.timeout);
        client.set_write_timeout(std::chrono::seconds(30));
        client.set_connection_timeout(std::chrono::seconds(10));

        auto const request = serialize_chat_request(messages, sampling, _config.model, send_top_k);
        auto response = client.Post(_path, headers, request, "application/json");
        if (!response)
            throw BackendError("chat endpoint unreachable: " + httplib::to_string(response.error()), true);

        // Endpoints that reject unknown sampling fields get one retry without top_k.
        if ((response->status == 400 || response->status == 422) && send_top_k && !dropped_top_k
            && response->body.find("top_k") != std::string::npos)
        {
            std::cerr << "warning: endpoint rejected top_k; continuing without it\n";
            auto lock = std::lock_guard(_mutex);
            _send_top_k = false;
            continue;
        }
        if (response->status < 200 || response->status >= 300)
            throw BackendError("chat endpoint returned HTTP " + std::to_string(response->status), true);

        return parse_chat_response(response->body, _config.code_tag);
    }
}

} // namespace prunetir
