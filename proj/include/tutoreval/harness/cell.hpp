#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <yaml-cpp/yaml.h>

#include "tutoreval/backend/chat.hpp"

namespace tutoreval::harness {

using backend::RoleTag;

enum class Recognition { base, recog };
enum class TutorArch { single, multi };
enum class LearnerArch { unified, ego_superego };

std::string_view to_string(Recognition value);
std::string_view to_string(TutorArch value);
std::string_view to_string(LearnerArch value);
Recognition parse_recognition(std::string_view text);
TutorArch parse_tutor_arch(std::string_view text);
LearnerArch parse_learner_arch(std::string_view text);

inline constexpr const char* kFlagDisableSuperego = "disable_superego";
inline constexpr const char* kFlagPreAnalyze = "pre_analyze";

struct ModelBinding {
    std::string provider;
    std::string model;
    std::optional<double> temperature;

    double temperature_for(RoleTag role) const;
};

/// One factorial condition plus its prompt/model bindings.
struct CellConfig {
    std::string cell_id;
    Recognition recognition = Recognition::base;
    TutorArch tutor_arch = TutorArch::single;
    LearnerArch learner_arch = LearnerArch::unified;
    std::map<RoleTag, std::string> prompt_bindings;  // role -> prompt file
    std::map<RoleTag, ModelBinding> model_bindings;
    int max_rounds = 2;
    int max_tokens = 2048;
    std::set<std::string> flags;

    bool superego_disabled() const { return flags.count(kFlagDisableSuperego) > 0; }
    bool pre_analyze() const { return flags.count(kFlagPreAnalyze) > 0; }

    /// single <=> disable_superego; tutor prompt files carry the "recog"
    /// marker iff the cell is a recognition cell; max_rounds >= 1.
    void validate() const;

    nlohmann::json to_json() const;
    static CellConfig from_json(const nlohmann::json& j);
    static CellConfig from_yaml(const YAML::Node& node);
};

struct Scenario {
    std::string scenario_id;
    std::string title;
    int turn_count = 1;
    std::string opening_context;
    std::string learner_persona;
    std::optional<std::string> curriculum_anchor;

    void validate() const;  // turn_count >= 1

    nlohmann::json to_json() const;
    static Scenario from_json(const nlohmann::json& j);
    static Scenario from_yaml(const YAML::Node& node);
};

std::vector<CellConfig> load_cells(const std::filesystem::path& path);
std::vector<Scenario> load_scenarios(const std::filesystem::path& path);

/// The eight messages-mode factorial cells (80-87), bound to the given provider
/// names. Prompt files follow the `prompts/<base|recog>/<role>.md` layout.
std::vector<CellConfig> factorial_cells(const std::string& tutor_provider, const std::string& learner_provider);

}  // namespace tutoreval::harness
