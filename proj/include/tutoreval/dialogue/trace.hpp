#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tutoreval/backend/chat.hpp"

namespace tutoreval::dialogue {

enum class Agent {
    tutor,
    ego,
    superego,
    system,
    learner,
    learner_ego_initial,
    learner_superego,
    learner_ego_revision,
};

enum class Action {
    context_input,
    pre_analyze,
    generate,
    review,
    respond,
    finalize,
    memory_cycle,
    deliberation,
    final_output,
};

std::string_view to_string(Agent agent);
std::string_view to_string(Action action);
Agent parse_agent(std::string_view text);
Action parse_action(std::string_view text);

enum class Verdict { approved, rejected };
enum class Intervention { revise, none };

struct SuperegoVerdict {
    Verdict verdict = Verdict::approved;
    double confidence = 0.0;
    std::string feedback;
    Intervention intervention = Intervention::none;
    bool parse_failed = false;

    nlohmann::json to_json() const;
    static SuperegoVerdict from_json(const nlohmann::json& j);
};

struct CallMetrics {
    std::string provider_id;
    std::string model_id;
    std::int64_t input_tokens = 0;
    std::int64_t output_tokens = 0;
};

struct TraceEntry {
    int turn = 0;
    Agent agent = Agent::tutor;
    Action action = Action::context_input;
    std::optional<Agent> from_agent;
    std::optional<Agent> to_agent;
    std::optional<int> round;
    std::string suggestions;
    std::int64_t latency_ms = 0;
    std::optional<CallMetrics> metrics;
    std::optional<SuperegoVerdict> verdict;  // set on superego review entries

    nlohmann::json to_json() const;
    static TraceEntry from_json(const nlohmann::json& j);
};

struct LearnerTurn {
    std::string internal;
    std::string external;
};

struct PublicTurn {
    std::string tutor_public;
    std::string learner_public;
};

struct TokenTotals {
    std::int64_t input = 0;
    std::int64_t output = 0;
};

struct DialogueLog {
    std::string dialogue_id;
    std::string cell_id;
    std::string scenario_id;
    std::string scenario_context;
    std::string recognition;   // "base" | "recog"
    std::string tutor_arch;    // "single" | "multi"
    std::string learner_arch;  // "unified" | "ego_superego"
    std::vector<PublicTurn> turns;
    std::vector<TraceEntry> trace;
    std::map<std::string, TokenTotals> per_role_token_totals;
    bool failed = false;
    std::string error;

    bool superego_disabled() const { return tutor_arch == "single"; }

    nlohmann::json to_json() const;
    static DialogueLog from_json(const nlohmann::json& j);  // throws ParseError
};

/// Append-only trace that refuses superego entries when the superego is
/// disabled. This is the logger-level guard; the loop and the step projection
/// enforce the same invariant independently.
class TraceRecorder {
public:
    explicit TraceRecorder(bool superego_disabled) : superego_disabled_(superego_disabled) {}

    void append(TraceEntry entry);
    const std::vector<TraceEntry>& entries() const { return entries_; }
    std::vector<TraceEntry> release() { return std::move(entries_); }

private:
    bool superego_disabled_;
    std::vector<TraceEntry> entries_;
};

}  // namespace tutoreval::dialogue
