#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "tutoreval/backend/chat.hpp"

namespace tutoreval::backend {

inline constexpr int kAnyIndex = -1;

/// Content-matched override, tried before the (role, turn, round) table.
struct PlaybookRule {
    std::optional<RoleTag> role;
    std::optional<int> turn;
    std::optional<int> round;
    std::vector<std::string> contains;  // all must occur in ChatRequest::full_text()
    std::string text;
};

/// Deterministic response table.
///
/// Lookup order: content rules (first match wins), exact `role:turn:round`,
/// `role:turn:*`, `role:*:*`, then the default. Lookup is total.
class ScriptedPlaybook {
public:
    void set(RoleTag role, int turn, int round, std::string text);
    void add_rule(PlaybookRule rule);
    void set_default(std::string text);

    const std::string& lookup(const ChatRequest& request) const;

    /// YAML map keyed "role:turn:round" (either index may be `*`), plus
    /// optional "default" and "rules" entries.
    static ScriptedPlaybook from_yaml(const YAML::Node& node);
    static ScriptedPlaybook load(const std::filesystem::path& path);

private:
    std::map<std::tuple<RoleTag, int, int>, std::string> entries_;
    std::vector<PlaybookRule> rules_;
    std::string default_;
};

class ScriptedProvider final : public Provider {
public:
    ScriptedProvider(std::string id, ScriptedPlaybook playbook, std::string model_id = "scripted");

    ChatResponse complete(const ChatRequest& request) const override;
    const std::string& id() const override { return id_; }

private:
    std::string id_;
    ScriptedPlaybook playbook_;
    std::string model_id_;
};

}  // namespace tutoreval::backend
