#include "tutoreval/harness/cell.hpp"

#include "tutoreval/common/errors.hpp"
#include "tutoreval/common/util.hpp"

namespace tutoreval::harness {

std::string_view to_string(Recognition value) { return value == Recognition::base ? "base" : "recog"; }
std::string_view to_string(TutorArch value) { return value == TutorArch::single ? "single" : "multi"; }
std::string_view to_string(LearnerArch value) {
    return value == LearnerArch::unified ? "unified" : "ego_superego";
}

Recognition parse_recognition(std::string_view text) {
    if (text == "base") return Recognition::base;
    if (text == "recog" || text == "recognition") return Recognition::recog;
    throw ConfigError("unknown recognition level '" + std::string(text) + "'");
}

TutorArch parse_tutor_arch(std::string_view text) {
    if (text == "single") return TutorArch::single;
    if (text == "multi") return TutorArch::multi;
    throw ConfigError("unknown tutor architecture '" + std::string(text) + "'");
}

LearnerArch parse_learner_arch(std::string_view text) {
    if (text == "unified") return LearnerArch::unified;
    if (text == "ego_superego" || text == "psycho") return LearnerArch::ego_superego;
    throw ConfigError("unknown learner architecture '" + std::string(text) + "'");
}

double ModelBinding::temperature_for(RoleTag role) const {
    return temperature.value_or(backend::default_temperature(role));
}

void CellConfig::validate() const {
    if (cell_id.empty()) {
        throw ConfigError("cell has empty cell_id");
    }
    const bool single = tutor_arch == TutorArch::single;
    if (single != superego_disabled()) {
        throw ConfigError("cell " + cell_id + ": tutor_arch=single requires exactly the disable_superego flag");
    }
    if (max_rounds < 1) {
        throw ConfigError("cell " + cell_id + ": max_rounds must be positive");
    }
    if (max_tokens < 1) {
        throw ConfigError("cell " + cell_id + ": max_tokens must be positive");
    }
    for (RoleTag role : {RoleTag::tutor_ego, RoleTag::tutor_superego}) {
        auto it = prompt_bindings.find(role);
        if (it == prompt_bindings.end()) {
            continue;
        }
        const bool marked = it->second.find("recog") != std::string::npos;
        if (marked != (recognition == Recognition::recog)) {
            throw ConfigError("cell " + cell_id + ": prompt '" + it->second + "' does not match recognition=" +
                              std::string(to_string(recognition)));
        }
    }
}

nlohmann::json CellConfig::to_json() const {
    nlohmann::json prompts = nlohmann::json::object();
    for (const auto& [role, path] : prompt_bindings) {
        prompts[std::string(backend::to_string(role))] = path;
    }
    nlohmann::json models = nlohmann::json::object();
    for (const auto& [role, binding] : model_bindings) {
        nlohmann::json b = {{"provider", binding.provider}, {"model", binding.model}};
        if (binding.temperature) {
            b["temperature"] = *binding.temperature;
        }
        models[std::string(backend::to_string(role))] = std::move(b);
    }
    return {
        {"cell_id", cell_id},
        {"recognition", std::string(to_string(recognition))},
        {"tutor_arch", std::string(to_string(tutor_arch))},
        {"learner_arch", std::string(to_string(learner_arch))},
        {"prompts", std::move(prompts)},
        {"models", std::move(models)},
        {"max_rounds", max_rounds},
        {"max_tokens", max_tokens},
        {"flags", flags},
    };
}

CellConfig CellConfig::from_json(const nlohmann::json& j) {
    CellConfig cell;
    try {
        cell.cell_id = j.at("cell_id").get<std::string>();
        cell.recognition = parse_recognition(j.at("recognition").get<std::string>());
        cell.tutor_arch = parse_tutor_arch(j.at("tutor_arch").get<std::string>());
        cell.learner_arch = parse_learner_arch(j.at("learner_arch").get<std::string>());
        const auto prompts = j.value("prompts", nlohmann::json::object());
        for (const auto& [role, path] : prompts.items()) {
            cell.prompt_bindings[backend::parse_role_tag(role)] = path.get<std::string>();
        }
        const auto models = j.value("models", nlohmann::json::object());
        for (const auto& [role, b] : models.items()) {
            ModelBinding binding;
            binding.provider = b.at("provider").get<std::string>();
            binding.model = b.value("model", std::string());
            if (b.contains("temperature") && !b["temperature"].is_null()) {
                binding.temperature = b["temperature"].get<double>();
            }
            cell.model_bindings[backend::parse_role_tag(role)] = binding;
        }
        cell.max_rounds = j.value("max_rounds", 2);
        cell.max_tokens = j.value("max_tokens", 2048);
        for (const auto& flag : j.value("flags", nlohmann::json::array())) {
            cell.flags.insert(flag.get<std::string>());
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed cell config: ") + e.what());
    }
    cell.validate();
    return cell;
}

CellConfig CellConfig::from_yaml(const YAML::Node& node) { return from_json(yaml_to_json(node)); }

void Scenario::validate() const {
    if (scenario_id.empty()) {
        throw ConfigError("scenario has empty scenario_id");
    }
    if (turn_count < 1) {
        throw ConfigError("scenario " + scenario_id + ": turn_count must be at least 1");
    }
}

nlohmann::json Scenario::to_json() const {
    nlohmann::json j = {
        {"scenario_id", scenario_id},
        {"title", title},
        {"turn_count", turn_count},
        {"opening_context", opening_context},
        {"learner_persona", learner_persona},
    };
    if (curriculum_anchor) {
        j["curriculum_anchor"] = *curriculum_anchor;
    }
    return j;
}

Scenario Scenario::from_json(const nlohmann::json& j) {
    Scenario s;
    try {
        s.scenario_id = j.at("scenario_id").get<std::string>();
        s.title = j.value("title", s.scenario_id);
        s.turn_count = j.value("turn_count", 1);
        s.opening_context = j.value("opening_context", std::string());
        s.learner_persona = j.value("learner_persona", std::string());
        if (j.contains("curriculum_anchor") && j["curriculum_anchor"].is_string()) {
            s.curriculum_anchor = j["curriculum_anchor"].get<std::string>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed scenario: ") + e.what());
    }
    s.validate();
    return s;
}

Scenario Scenario::from_yaml(const YAML::Node& node) { return from_json(yaml_to_json(node)); }

std::vector<CellConfig> load_cells(const std::filesystem::path& path) {
    auto root = load_yaml_file(path);
    auto list = root["cells"] ? root["cells"] : root;
    std::vector<CellConfig> out;
    for (const auto& item : list) {
        out.push_back(CellConfig::from_yaml(item));
    }
    return out;
}

std::vector<Scenario> load_scenarios(const std::filesystem::path& path) {
    auto root = load_yaml_file(path);
    auto list = root["scenarios"] ? root["scenarios"] : root;
    std::vector<Scenario> out;
    for (const auto& item : list) {
        out.push_back(Scenario::from_yaml(item));
    }
    return out;
}

std::vector<CellConfig> factorial_cells(const std::string& tutor_provider, const std::string& learner_provider) {
    std::vector<CellConfig> cells;
    int number = 80;
    for (auto recognition : {Recognition::base, Recognition::recog}) {
        for (auto tutor : {TutorArch::single, TutorArch::multi}) {
            for (auto learner : {LearnerArch::unified, LearnerArch::ego_superego}) {
                CellConfig cell;
                cell.recognition = recognition;
                cell.tutor_arch = tutor;
                cell.learner_arch = learner;
                cell.cell_id = "cell_" + std::to_string(number++) + "_" + std::string(to_string(recognition)) + "_" +
                               std::string(to_string(tutor)) + "_" +
                               (learner == LearnerArch::unified ? "unified" : "psycho");
                const std::string variant(to_string(recognition));
                cell.prompt_bindings[RoleTag::tutor_ego] = "prompts/" + variant + "/tutor-ego.md";
                cell.model_bindings[RoleTag::tutor_ego] = {tutor_provider, tutor_provider, std::nullopt};
                if (tutor == TutorArch::single) {
                    cell.flags.insert(kFlagDisableSuperego);
                } else {
                    cell.prompt_bindings[RoleTag::tutor_superego] = "prompts/" + variant + "/tutor-superego.md";
                    cell.model_bindings[RoleTag::tutor_superego] = {tutor_provider, tutor_provider, std::nullopt};
                }
                if (learner == LearnerArch::unified) {
                    cell.prompt_bindings[RoleTag::learner_unified] = "prompts/learner/learner-unified.md";
                    cell.model_bindings[RoleTag::learner_unified] = {learner_provider, learner_provider, std::nullopt};
                } else {
                    cell.prompt_bindings[RoleTag::learner_ego] = "prompts/learner/learner-ego.md";
                    cell.prompt_bindings[RoleTag::learner_superego] = "prompts/learner/learner-superego.md";
                    cell.model_bindings[RoleTag::learner_ego] = {learner_provider, learner_provider, std::nullopt};
                    cell.model_bindings[RoleTag::learner_superego] = {learner_provider, learner_provider, std::nullopt};
                }
                cell.validate();
                cells.push_back(std::move(cell));
            }
        }
    }
    return cells;
}

}  // namespace tutoreval::harness
