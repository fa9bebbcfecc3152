#include "tutoreval/backend/scripted_provider.hpp"

#include <charconv>

#include "tutoreval/common/errors.hpp"
#include "tutoreval/common/util.hpp"

namespace tutoreval::backend {

namespace {

int parse_index(std::string_view text, std::string_view key) {
    if (text == "*") {
        return kAnyIndex;
    }
    int value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size() || value < 0) {
        throw ConfigError("bad playbook key '" + std::string(key) + "'");
    }
    return value;
}

std::vector<std::string> as_string_list(const YAML::Node& node) {
    std::vector<std::string> out;
    if (!node) {
        return out;
    }
    if (node.IsSequence()) {
        for (const auto& item : node) {
            out.push_back(item.as<std::string>());
        }
    } else {
        out.push_back(node.as<std::string>());
    }
    return out;
}

}  // namespace

void ScriptedPlaybook::set(RoleTag role, int turn, int round, std::string text) {
    entries_[{role, turn, round}] = std::move(text);
}

void ScriptedPlaybook::add_rule(PlaybookRule rule) { rules_.push_back(std::move(rule)); }

void ScriptedPlaybook::set_default(std::string text) { default_ = std::move(text); }

const std::string& ScriptedPlaybook::lookup(const ChatRequest& request) const {
    if (!rules_.empty()) {
        const std::string haystack = request.full_text();
        for (const auto& rule : rules_) {
            if (rule.role && *rule.role != request.role) {
                continue;
            }
            if (rule.turn && *rule.turn != request.turn_index) {
                continue;
            }
            if (rule.round && *rule.round != request.round_index) {
                continue;
            }
            bool all = true;
            for (const auto& needle : rule.contains) {
                if (haystack.find(needle) == std::string::npos) {
                    all = false;
                    break;
                }
            }
            if (all) {
                return rule.text;
            }
        }
    }
    const std::tuple<RoleTag, int, int> keys[] = {
        {request.role, request.turn_index, request.round_index},
        {request.role, request.turn_index, kAnyIndex},
        {request.role, kAnyIndex, kAnyIndex},
    };
    for (const auto& key : keys) {
        if (auto it = entries_.find(key); it != entries_.end()) {
            return it->second;
        }
    }
    return default_;
}

ScriptedPlaybook ScriptedPlaybook::from_yaml(const YAML::Node& node) {
    if (!node.IsMap()) {
        throw ConfigError("playbook must be a YAML map");
    }
    ScriptedPlaybook playbook;
    for (const auto& kv : node) {
        const auto key = kv.first.as<std::string>();
        if (key == "default") {
            playbook.set_default(kv.second.as<std::string>());
            continue;
        }
        if (key == "rules") {
            for (const auto& item : kv.second) {
                PlaybookRule rule;
                if (item["role"]) {
                    rule.role = parse_role_tag(item["role"].as<std::string>());
                }
                if (item["turn"]) {
                    rule.turn = item["turn"].as<int>();
                }
                if (item["round"]) {
                    rule.round = item["round"].as<int>();
                }
                rule.contains = as_string_list(item["contains"]);
                rule.text = item["text"].as<std::string>();
                playbook.add_rule(std::move(rule));
            }
            continue;
        }
        auto first = key.find(':');
        auto second = first == std::string::npos ? std::string::npos : key.find(':', first + 1);
        if (second == std::string::npos) {
            throw ConfigError("bad playbook key '" + key + "' (expected role:turn:round)");
        }
        const std::string_view view(key);
        RoleTag role = parse_role_tag(view.substr(0, first));
        int turn = parse_index(view.substr(first + 1, second - first - 1), key);
        int round = parse_index(view.substr(second + 1), key);
        if (turn == kAnyIndex && round != kAnyIndex) {
            throw ConfigError("bad playbook key '" + key + "': round wildcard required when turn is '*'");
        }
        playbook.set(role, turn, round, kv.second.as<std::string>());
    }
    return playbook;
}

ScriptedPlaybook ScriptedPlaybook::load(const std::filesystem::path& path) {
    return from_yaml(load_yaml_file(path));
}

ScriptedProvider::ScriptedProvider(std::string id, ScriptedPlaybook playbook, std::string model_id)
    : id_(std::move(id)), playbook_(std::move(playbook)), model_id_(std::move(model_id)) {}

ChatResponse ScriptedProvider::complete(const ChatRequest& request) const {
    ChatResponse response;
    response.text = playbook_.lookup(request);
    response.input_tokens = count_prompt_tokens(request);
    response.output_tokens = estimate_tokens(response.text);
    response.latency_ms = 0;
    response.provider_id = id_;
    response.model_id = request.model.empty() ? model_id_ : request.model;
    return response;
}

}  // namespace tutoreval::backend
