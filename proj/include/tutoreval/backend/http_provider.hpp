#pragma once

#include <chrono>
#include <string>

#include "tutoreval/backend/chat.hpp"

namespace tutoreval::backend {

struct HttpProviderConfig {
    std::string id = "http";
    std::string base_url;  // e.g. https://openrouter.ai/api/v1
    std::string api_key;
    std::string default_model;
    int max_attempts = 3;
    std::chrono::milliseconds initial_backoff{1000};
    std::chrono::seconds timeout{120};
};

/// OpenAI-style chat-completions client.
///
/// Transport failures, 429 and 5xx responses are retried with exponential
/// backoff; exhausting attempts raises RunError. A 2xx body that does not have
/// the chat-completions shape raises ParseError and is not retried.
class HttpProvider final : public Provider {
public:
    explicit HttpProvider(HttpProviderConfig config);

    ChatResponse complete(const ChatRequest& request) const override;
    const std::string& id() const override { return config_.id; }

    const HttpProviderConfig& config() const { return config_; }

private:
    HttpProviderConfig config_;
    std::string scheme_host_port_;
    std::string path_prefix_;
};

}  // namespace tutoreval::backend
