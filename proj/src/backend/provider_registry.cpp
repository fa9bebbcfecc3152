#include "tutoreval/backend/provider_registry.hpp"

#include <cstdlib>

#include "tutoreval/backend/http_provider.hpp"
#include "tutoreval/backend/scripted_provider.hpp"
#include "tutoreval/common/errors.hpp"
#include "tutoreval/common/util.hpp"

namespace tutoreval::backend {

namespace {

std::string env_or(const char* name, std::string fallback) {
    if (const char* value = std::getenv(name); value && *value) {
        return value;
    }
    return fallback;
}

}  // namespace

void ProviderRegistry::add(ProviderHandle provider) {
    const auto name = provider->id();
    providers_[name] = std::move(provider);
}

ProviderHandle ProviderRegistry::get(const std::string& name) const {
    auto it = providers_.find(name);
    if (it == providers_.end()) {
        throw ConfigError("unknown provider '" + name + "'");
    }
    return it->second;
}

bool ProviderRegistry::contains(const std::string& name) const { return providers_.count(name) > 0; }

std::vector<std::string> ProviderRegistry::names() const {
    std::vector<std::string> out;
    for (const auto& [name, _] : providers_) {
        out.push_back(name);
    }
    return out;
}

ProviderRegistry ProviderRegistry::from_yaml(const YAML::Node& node, const std::filesystem::path& base_dir) {
    ProviderRegistry registry;
    const auto list = node["providers"] ? node["providers"] : node;
    if (!list.IsMap()) {
        throw ConfigError("providers config must be a map of name -> settings");
    }
    for (const auto& kv : list) {
        const auto name = kv.first.as<std::string>();
        const auto& spec = kv.second;
        const auto type = spec["type"] ? spec["type"].as<std::string>() : std::string("scripted");
        if (type == "scripted") {
            ScriptedPlaybook playbook;
            if (spec["playbook"]) {
                playbook = ScriptedPlaybook::load(resolve_path(base_dir, spec["playbook"].as<std::string>()));
            } else if (spec["entries"]) {
                playbook = ScriptedPlaybook::from_yaml(spec["entries"]);
            }
            const auto model = spec["model"] ? spec["model"].as<std::string>() : name;
            registry.add(std::make_shared<ScriptedProvider>(name, std::move(playbook), model));
        } else if (type == "http") {
            HttpProviderConfig config;
            config.id = name;
            config.base_url = env_or("PROVIDER_BASE_URL", spec["base_url"] ? spec["base_url"].as<std::string>() : "");
            const auto key_env = spec["api_key_env"] ? spec["api_key_env"].as<std::string>() : std::string();
            std::string key = spec["api_key"] ? spec["api_key"].as<std::string>() : std::string();
            if (!key_env.empty()) {
                key = env_or(key_env.c_str(), key);
            }
            config.api_key = env_or("PROVIDER_API_KEY", key);
            config.default_model = spec["model"] ? spec["model"].as<std::string>() : std::string();
            if (spec["max_attempts"]) {
                config.max_attempts = spec["max_attempts"].as<int>();
            }
            if (spec["backoff_ms"]) {
                config.initial_backoff = std::chrono::milliseconds(spec["backoff_ms"].as<int>());
            }
            if (spec["timeout_s"]) {
                config.timeout = std::chrono::seconds(spec["timeout_s"].as<int>());
            }
            if (config.base_url.empty()) {
                throw ConfigError("http provider '" + name + "' has no base_url and PROVIDER_BASE_URL is unset");
            }
            registry.add(std::make_shared<HttpProvider>(std::move(config)));
        } else {
            throw ConfigError("provider '" + name + "' has unknown type '" + type + "'");
        }
    }
    return registry;
}

ProviderRegistry ProviderRegistry::load(const std::filesystem::path& path) {
    return from_yaml(load_yaml_file(path), path.parent_path());
}

}  // namespace tutoreval::backend
