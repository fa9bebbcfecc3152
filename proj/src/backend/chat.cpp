#include "tutoreval/backend/chat.hpp"

#include <array>
#include <utility>

#include "tutoreval/common/errors.hpp"

namespace tutoreval::backend {

namespace {

constexpr std::array<std::pair<RoleTag, std::string_view>, 7> kRoleNames{{
    {RoleTag::tutor_ego, "tutor_ego"},
    {RoleTag::tutor_superego, "tutor_superego"},
    {RoleTag::learner_ego, "learner_ego"},
    {RoleTag::learner_superego, "learner_superego"},
    {RoleTag::learner_unified, "learner_unified"},
    {RoleTag::judge, "judge"},
    {RoleTag::recommender, "recommender"},
}};

}  // namespace

std::string_view to_string(RoleTag role) {
    for (const auto& [tag, name] : kRoleNames) {
        if (tag == role) {
            return name;
        }
    }
    return "unknown";
}

RoleTag parse_role_tag(std::string_view text) {
    for (const auto& [tag, name] : kRoleNames) {
        if (name == text) {
            return tag;
        }
    }
    throw ConfigError("unknown role tag: " + std::string(text));
}

std::string_view to_string(Speaker speaker) {
    switch (speaker) {
        case Speaker::system:
            return "system";
        case Speaker::user:
            return "user";
        case Speaker::assistant:
            return "assistant";
    }
    return "user";
}

double default_temperature(RoleTag role) {
    switch (role) {
        case RoleTag::tutor_ego:
        case RoleTag::learner_ego:
        case RoleTag::learner_unified:
            return 0.6;
        case RoleTag::tutor_superego:
            return 0.3;
        case RoleTag::learner_superego:
            return 0.4;
        case RoleTag::judge:
            return 0.2;
        case RoleTag::recommender:
            return 0.7;
    }
    return 0.6;
}

void ChatRequest::validate() const {
    if (messages.empty()) {
        throw ConfigError("chat request for " + std::string(to_string(role)) + " has no messages");
    }
    if (!(temperature >= 0.0 && temperature <= 2.0)) {
        throw ConfigError("temperature out of range [0,2]: " + std::to_string(temperature));
    }
    if (max_tokens <= 0) {
        throw ConfigError("max_tokens must be positive");
    }
}

std::string ChatRequest::full_text() const {
    std::string out = system_prompt;
    for (const auto& message : messages) {
        out.push_back('\n');
        out += message.text;
    }
    return out;
}

ChatResponse complete(const ChatRequest& request, const Provider& provider) {
    request.validate();
    return provider.complete(request);
}

std::int64_t estimate_tokens(std::string_view text) {
    return static_cast<std::int64_t>((text.size() + 3) / 4);
}

std::int64_t count_prompt_tokens(const ChatRequest& request) {
    std::size_t chars = request.system_prompt.size();
    for (const auto& message : request.messages) {
        chars += message.text.size();
    }
    return static_cast<std::int64_t>((chars + 3) / 4);
}

}  // namespace tutoreval::backend
