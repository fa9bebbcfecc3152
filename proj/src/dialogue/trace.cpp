#include "tutoreval/dialogue/trace.hpp"

#include <array>

#include "tutoreval/common/errors.hpp"

namespace tutoreval::dialogue {

namespace {

using nlohmann::json;

constexpr std::array<std::pair<Agent, std::string_view>, 8> kAgents{{
    {Agent::tutor, "tutor"},
    {Agent::ego, "ego"},
    {Agent::superego, "superego"},
    {Agent::system, "system"},
    {Agent::learner, "learner"},
    {Agent::learner_ego_initial, "learner_ego_initial"},
    {Agent::learner_superego, "learner_superego"},
    {Agent::learner_ego_revision, "learner_ego_revision"},
}};

constexpr std::array<std::pair<Action, std::string_view>, 9> kActions{{
    {Action::context_input, "context_input"},
    {Action::pre_analyze, "pre_analyze"},
    {Action::generate, "generate"},
    {Action::review, "review"},
    {Action::respond, "respond"},
    {Action::finalize, "finalize"},
    {Action::memory_cycle, "memory_cycle"},
    {Action::deliberation, "deliberation"},
    {Action::final_output, "final_output"},
}};

template <typename Enum, std::size_t N>
std::string_view name_of(const std::array<std::pair<Enum, std::string_view>, N>& table, Enum value) {
    for (const auto& [v, name] : table) {
        if (v == value) {
            return name;
        }
    }
    return "unknown";
}

template <typename Enum, std::size_t N>
Enum value_of(const std::array<std::pair<Enum, std::string_view>, N>& table, std::string_view text,
              const char* what) {
    for (const auto& [v, name] : table) {
        if (name == text) {
            return v;
        }
    }
    throw ParseError(std::string("unknown ") + what + " '" + std::string(text) + "'");
}

}  // namespace

std::string_view to_string(Agent agent) { return name_of(kAgents, agent); }
std::string_view to_string(Action action) { return name_of(kActions, action); }
Agent parse_agent(std::string_view text) { return value_of(kAgents, text, "agent"); }
Action parse_action(std::string_view text) { return value_of(kActions, text, "action"); }

json SuperegoVerdict::to_json() const {
    return {
        {"verdict", verdict == Verdict::approved ? "approved" : "rejected"},
        {"confidence", confidence},
        {"feedback", feedback},
        {"intervention", intervention == Intervention::revise ? "revise" : "none"},
        {"parse_failed", parse_failed},
    };
}

SuperegoVerdict SuperegoVerdict::from_json(const json& j) {
    SuperegoVerdict v;
    v.verdict = j.at("verdict").get<std::string>() == "rejected" ? Verdict::rejected : Verdict::approved;
    v.confidence = j.value("confidence", 0.0);
    v.feedback = j.value("feedback", std::string());
    v.intervention = j.value("intervention", std::string("none")) == "revise" ? Intervention::revise
                                                                              : Intervention::none;
    v.parse_failed = j.value("parse_failed", false);
    return v;
}

json TraceEntry::to_json() const {
    json j = {
        {"turn", turn},
        {"agent", std::string(to_string(agent))},
        {"action", std::string(to_string(action))},
        {"suggestions", suggestions},
        {"latency_ms", latency_ms},
    };
    if (from_agent) j["from"] = std::string(to_string(*from_agent));
    if (to_agent) j["to"] = std::string(to_string(*to_agent));
    if (round) j["round"] = *round;
    if (metrics) {
        j["metrics"] = {
            {"provider", metrics->provider_id},
            {"model", metrics->model_id},
            {"input_tokens", metrics->input_tokens},
            {"output_tokens", metrics->output_tokens},
        };
    }
    if (verdict) j["verdict"] = verdict->to_json();
    return j;
}

TraceEntry TraceEntry::from_json(const json& j) {
    TraceEntry e;
    e.turn = j.at("turn").get<int>();
    e.agent = parse_agent(j.at("agent").get<std::string>());
    e.action = parse_action(j.at("action").get<std::string>());
    e.suggestions = j.value("suggestions", std::string());
    e.latency_ms = j.value("latency_ms", std::int64_t{0});
    if (j.contains("from")) e.from_agent = parse_agent(j["from"].get<std::string>());
    if (j.contains("to")) e.to_agent = parse_agent(j["to"].get<std::string>());
    if (j.contains("round")) e.round = j["round"].get<int>();
    if (j.contains("metrics")) {
        const auto& m = j["metrics"];
        e.metrics = CallMetrics{m.value("provider", std::string()), m.value("model", std::string()),
                                m.value("input_tokens", std::int64_t{0}), m.value("output_tokens", std::int64_t{0})};
    }
    if (j.contains("verdict")) e.verdict = SuperegoVerdict::from_json(j["verdict"]);
    return e;
}

json DialogueLog::to_json() const {
    json turns_json = json::array();
    for (const auto& t : turns) {
        turns_json.push_back({{"tutor_public", t.tutor_public}, {"learner_public", t.learner_public}});
    }
    json trace_json = json::array();
    for (const auto& e : trace) {
        trace_json.push_back(e.to_json());
    }
    json totals = json::object();
    for (const auto& [role, t] : per_role_token_totals) {
        totals[role] = {{"input", t.input}, {"output", t.output}};
    }
    return {
        {"dialogue_id", dialogue_id},
        {"cell_id", cell_id},
        {"scenario_id", scenario_id},
        {"scenario_context", scenario_context},
        {"recognition", recognition},
        {"tutor_arch", tutor_arch},
        {"learner_arch", learner_arch},
        {"turns", std::move(turns_json)},
        {"trace", std::move(trace_json)},
        {"per_role_token_totals", std::move(totals)},
        {"failed", failed},
        {"error", error},
    };
}

DialogueLog DialogueLog::from_json(const json& j) {
    DialogueLog log;
    try {
        log.dialogue_id = j.at("dialogue_id").get<std::string>();
        log.cell_id = j.at("cell_id").get<std::string>();
        log.scenario_id = j.at("scenario_id").get<std::string>();
        log.scenario_context = j.value("scenario_context", std::string());
        log.recognition = j.value("recognition", std::string());
        log.tutor_arch = j.value("tutor_arch", std::string());
        log.learner_arch = j.value("learner_arch", std::string());
        for (const auto& t : j.at("turns")) {
            log.turns.push_back({t.at("tutor_public").get<std::string>(), t.at("learner_public").get<std::string>()});
        }
        for (const auto& e : j.at("trace")) {
            log.trace.push_back(TraceEntry::from_json(e));
        }
        const auto totals = j.value("per_role_token_totals", json::object());
        for (const auto& [role, t] : totals.items()) {
            log.per_role_token_totals[role] = {t.value("input", std::int64_t{0}), t.value("output", std::int64_t{0})};
        }
        log.failed = j.value("failed", false);
        log.error = j.value("error", std::string());
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed dialogue log: ") + e.what());
    }
    return log;
}

void TraceRecorder::append(TraceEntry entry) {
    if (superego_disabled_ && (entry.agent == Agent::superego || entry.from_agent == Agent::superego ||
                               entry.to_agent == Agent::superego)) {
        throw StructureError("superego entry logged for a cell with the superego disabled");
    }
    entries_.push_back(std::move(entry));
}

}  // namespace tutoreval::dialogue
