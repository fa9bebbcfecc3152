#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "tutoreval/backend/chat.hpp"

namespace tutoreval::backend {

/// Named provider handles loaded from a providers YAML file:
///
///   providers:
///     scripted-tutor: { type: scripted, playbook: playbooks/tutor.yaml }
///     openrouter:     { type: http, base_url: ..., model: ..., api_key_env: PROVIDER_API_KEY }
///
/// For http providers PROVIDER_BASE_URL / PROVIDER_API_KEY override YAML values.
class ProviderRegistry {
public:
    void add(ProviderHandle provider);
    ProviderHandle get(const std::string& name) const;  // throws ConfigError
    bool contains(const std::string& name) const;
    std::vector<std::string> names() const;

    static ProviderRegistry from_yaml(const YAML::Node& node, const std::filesystem::path& base_dir);
    static ProviderRegistry load(const std::filesystem::path& path);

private:
    std::map<std::string, ProviderHandle> providers_;
};

}  // namespace tutoreval::backend
