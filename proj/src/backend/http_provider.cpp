#include "tutoreval/backend/http_provider.hpp"

#include <httplib.h>

#include <chrono>
#include <thread>

#include "tutoreval/common/errors.hpp"
#include "tutoreval/common/util.hpp"

namespace tutoreval::backend {

namespace {

json to_wire(const ChatRequest& request, const std::string& model) {
    json messages = json::array();
    if (!request.system_prompt.empty()) {
        messages.push_back({{"role", "system"}, {"content", request.system_prompt}});
    }
    for (const auto& message : request.messages) {
        messages.push_back({{"role", std::string(to_string(message.speaker))}, {"content", message.text}});
    }
    return {
        {"model", model},
        {"messages", std::move(messages)},
        {"temperature", request.temperature},
        {"max_tokens", request.max_tokens},
    };
}

bool retryable_status(int status) { return status == 429 || status >= 500; }

}  // namespace

HttpProvider::HttpProvider(HttpProviderConfig config) : config_(std::move(config)) {
    const std::string& url = config_.base_url;
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw ConfigError("provider base_url must include a scheme: '" + url + "'");
    }
    auto path_start = url.find('/', scheme_end + 3);
    scheme_host_port_ = url.substr(0, path_start);
    path_prefix_ = path_start == std::string::npos ? std::string() : url.substr(path_start);
    while (!path_prefix_.empty() && path_prefix_.back() == '/') {
        path_prefix_.pop_back();
    }
    if (config_.max_attempts < 1) {
        throw ConfigError("max_attempts must be at least 1");
    }
}

ChatResponse HttpProvider::complete(const ChatRequest& request) const {
    const std::string model = request.model.empty() ? config_.default_model : request.model;
    const std::string body = to_wire(request, model).dump();
    const std::string path = path_prefix_ + "/chat/completions";

    httplib::Client client(scheme_host_port_);
    client.set_connection_timeout(config_.timeout);
    client.set_read_timeout(config_.timeout);
    client.set_write_timeout(config_.timeout);
    httplib::Headers headers;
    if (!config_.api_key.empty()) {
        headers.emplace("Authorization", "Bearer " + config_.api_key);
    }

    std::string last_error;
    auto backoff = config_.initial_backoff;
    for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
        const auto started = std::chrono::steady_clock::now();
        auto result = client.Post(path, headers, body, "application/json");
        const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
            std::chrono::steady_clock::now() - started);

        if (result && result->status >= 200 && result->status < 300) {
            json payload;
            try {
                payload = json::parse(result->body);
            } catch (const json::parse_error& e) {
                throw ParseError("provider " + config_.id + " returned non-JSON body: " + e.what());
            }
            const auto* choices = payload.contains("choices") ? &payload["choices"] : nullptr;
            if (!choices || !choices->is_array() || choices->empty() ||
                !(*choices)[0].contains("message") || !(*choices)[0]["message"].contains("content") ||
                !(*choices)[0]["message"]["content"].is_string()) {
                throw ParseError("provider " + config_.id + " payload lacks choices[0].message.content");
            }
            ChatResponse response;
            response.text = (*choices)[0]["message"]["content"].get<std::string>();
            const auto usage = payload.value("usage", json::object());
            response.input_tokens = usage.value("prompt_tokens", count_prompt_tokens(request));
            response.output_tokens = usage.value("completion_tokens", estimate_tokens(response.text));
            response.latency_ms = elapsed.count();
            response.provider_id = config_.id;
            response.model_id = payload.value("model", model);
            return response;
        }

        if (!result) {
            last_error = "transport error: " + httplib::to_string(result.error());
        } else {
            last_error = "HTTP " + std::to_string(result->status);
            if (!retryable_status(result->status)) {
                throw RunError("provider " + config_.id + " rejected request: " + last_error);
            }
        }
        if (attempt < config_.max_attempts) {
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
    }
    throw RunError("provider " + config_.id + " failed after " + std::to_string(config_.max_attempts) +
                   " attempts: " + last_error);
}

}  // namespace tutoreval::backend
