#pragma once

#include <atomic>
#include <mutex>
#include <filesystem>
#include <random>
#include <string>

#include <yaml-cpp/yaml.h>

#include "tutoreval/backend/scripted_provider.hpp"
#include "tutoreval/dialogue/dialogue.hpp"
#include "tutoreval/harness/cell.hpp"
#include "tutoreval/harness/run.hpp"

namespace tutoreval::testing {

inline std::filesystem::path source_dir() { return TUTOREVAL_SOURCE_DIR; }
inline std::filesystem::path config_dir() { return source_dir() / "config"; }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("tutoreval-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline backend::ProviderHandle scripted(const std::string& id, const std::string& playbook_yaml) {
    return std::make_shared<backend::ScriptedProvider>(id, backend::ScriptedPlaybook::from_yaml(YAML::Load(playbook_yaml)));
}

/// A cell bound to "tutor" and "learner" providers with prompt names that
/// satisfy the recognition marker rule.
inline harness::CellConfig make_cell(harness::Recognition recognition, harness::TutorArch tutor,
                                     harness::LearnerArch learner, int max_rounds = 2) {
    using backend::RoleTag;
    for (auto cell : harness::factorial_cells("tutor", "learner")) {
        if (cell.recognition == recognition && cell.tutor_arch == tutor && cell.learner_arch == learner) {
            cell.max_rounds = max_rounds;
            return cell;
        }
    }
    throw std::logic_error("no such factorial cell");
}

inline dialogue::PromptSet prompts_for(const harness::CellConfig& cell) {
    dialogue::PromptSet prompts;
    for (const auto& [role, file] : cell.prompt_bindings) prompts[role] = "prompt from " + file;
    return prompts;
}

inline dialogue::AgentBindings bind_agents(const harness::CellConfig& cell, const backend::ProviderHandle& tutor,
                                    const backend::ProviderHandle& learner) {
    dialogue::AgentBindings agents;
    for (const auto& [role, binding] : cell.model_bindings) {
        const bool tutor_side = role == backend::RoleTag::tutor_ego || role == backend::RoleTag::tutor_superego;
        agents[role] = {tutor_side ? tutor : learner, binding.model, binding.temperature_for(role)};
    }
    return agents;
}

inline harness::Scenario make_scenario(const std::string& id, int turns, const std::string& opening = "Opening.") {
    harness::Scenario s;
    s.scenario_id = id;
    s.title = id;
    s.turn_count = turns;
    s.opening_context = opening;
    return s;
}

}  // namespace tutoreval::testing

namespace tutoreval::testing {

/// Wraps a provider and records every request it serves.
class RecordingProvider final : public backend::Provider {
public:
    explicit RecordingProvider(backend::ProviderHandle inner) : inner_(std::move(inner)) {}

    backend::ChatResponse complete(const backend::ChatRequest& request) const override {
        {
            std::lock_guard lock(mutex_);
            requests_.push_back(request);
        }
        return inner_->complete(request);
    }
    const std::string& id() const override { return inner_->id(); }

    std::vector<backend::ChatRequest> requests() const {
        std::lock_guard lock(mutex_);
        return requests_;
    }
    std::size_t count() const {
        std::lock_guard lock(mutex_);
        return requests_.size();
    }

private:
    backend::ProviderHandle inner_;
    mutable std::mutex mutex_;
    mutable std::vector<backend::ChatRequest> requests_;
};

}  // namespace tutoreval::testing

namespace tutoreval::testing {

inline const char* kTutorPlaybook = R"(
tutor_ego:0:*: What do you already know about this?
tutor_ego:*:*: Good. Now try the next step yourself.
tutor_superego:*:*: '{"verdict": "approved", "confidence": 0.9, "feedback": "fine", "intervention": "none"}'
default: ok
)";

inline const char* kLearnerPlaybook = R"(
learner_unified:*:*: '[INTERNAL] secret-unified-thought [EXTERNAL] I think the answer is four.'
learner_ego:*:*: '[INTERNAL] secret-ego-thought [EXTERNAL] Maybe it is four?'
learner_superego:*:*: secret-superego-critique of the draft
default: '[EXTERNAL] ok'
)";

/// Runs one dialogue with the stock scripted tutor and learner.
inline dialogue::DialogueLog scripted_dialogue(const harness::CellConfig& cell, int turns,
                                               const std::string& id = "d-0001",
                                               const char* tutor_playbook = kTutorPlaybook,
                                               const char* learner_playbook = kLearnerPlaybook) {
    const auto tutor = scripted("tutor", tutor_playbook);
    const auto learner = scripted("learner", learner_playbook);
    dialogue::DialogueSettings settings;
    settings.prompts = prompts_for(cell);
    return dialogue::run_dialogue(cell, make_scenario("s1", turns, "Opening: the learner wrote 2/7."),
                                  bind_agents(cell, tutor, learner), settings, id);
}

inline scoring::JudgeBinding judge_binding(backend::ProviderHandle provider, const std::string& model = "judge-model") {
    scoring::JudgeBinding judge;
    judge.provider = {std::move(provider), model, 0.2};
    return judge;
}

/// Judge playbook that answers every channel with a constant score.
inline std::string constant_judge_playbook(int score) {
    auto obj = [&](std::initializer_list<const char*> names) {
        std::string s = "'{";
        bool first = true;
        for (const char* n : names) {
            if (!first) s += ", ";
            first = false;
            s += std::string("\"") + n + "\": " + std::to_string(score);
        }
        return s + "}'";
    };
    const auto tutor = obj({"perception_quality", "content_accuracy", "pedagogical_craft", "elicitation_quality",
                            "adaptive_responsiveness", "productive_difficulty", "epistemic_integrity",
                            "recognition_quality"});
    const auto learner = obj({"engagement_quality", "conceptual_progression", "revision_signals",
                              "metacognitive_awareness", "learner_authenticity"});
    const auto holistic = obj({"pedagogical_arc", "adaptive_trajectory", "pedagogical_closure"});
    const auto delib = obj({"critique_substance", "revision_impact", "deliberation_depth", "insight_generation",
                            "process_coherence", "cross_turn_evolution"});
    std::string y = "rules:\n";
    const std::pair<int, std::string> channels[] = {{0, tutor}, {1, learner}, {2, holistic}, {3, delib}, {4, delib}};
    for (const auto& [round, text] : channels) {
        y += "  - role: judge\n    round: " + std::to_string(round) + "\n    text: " + text + "\n";
    }
    y += "default: '{}'\n";
    return y;
}

}  // namespace tutoreval::testing
