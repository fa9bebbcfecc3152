#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tutoreval::backend {

enum class RoleTag {
    tutor_ego,
    tutor_superego,
    learner_ego,
    learner_superego,
    learner_unified,
    judge,
    recommender,
};

enum class Speaker { system, user, assistant };

std::string_view to_string(RoleTag role);
RoleTag parse_role_tag(std::string_view text);  // throws ConfigError
std::string_view to_string(Speaker speaker);

/// Default sampling temperature per role (tutor superego sits inside 0.2-0.4).
double default_temperature(RoleTag role);

struct ChatMessage {
    Speaker speaker = Speaker::user;
    std::string text;
};

struct ChatRequest {
    RoleTag role = RoleTag::tutor_ego;
    std::string system_prompt;
    std::vector<ChatMessage> messages;
    double temperature = 0.6;
    int max_tokens = 2048;
    std::string model;

    // Routing metadata. Scripted playbooks key on these; HTTP providers ignore them.
    int turn_index = 0;
    int round_index = 0;

    /// Throws ConfigError when messages are empty or sampling settings are out of range.
    void validate() const;

    /// System prompt and every message, newline-joined. Used for content matching.
    std::string full_text() const;
};

struct ChatResponse {
    std::string text;
    std::int64_t input_tokens = 0;
    std::int64_t output_tokens = 0;
    std::int64_t latency_ms = 0;
    std::string provider_id;
    std::string model_id;
};

/// A response source. Implementations are immutable after construction and
/// safe to call from many dialogue workers at once.
class Provider {
public:
    virtual ~Provider() = default;
    virtual ChatResponse complete(const ChatRequest& request) const = 0;
    virtual const std::string& id() const = 0;
};

using ProviderHandle = std::shared_ptr<const Provider>;

/// Dispatches to the provider after validating the request.
ChatResponse complete(const ChatRequest& request, const Provider& provider);

/// ceil(chars / 4) over the text; 0 for empty text.
std::int64_t estimate_tokens(std::string_view text);

/// Approximate input token count for the whole request (system prompt plus messages).
std::int64_t count_prompt_tokens(const ChatRequest& request);

}  // namespace tutoreval::backend
