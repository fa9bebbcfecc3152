#include "tutoreval/dialogue/dialogue.hpp"

#include <algorithm>

#include "tutoreval/common/errors.hpp"
#include "tutoreval/common/util.hpp"

namespace tutoreval::dialogue {

namespace {

using backend::ChatMessage;
using backend::ChatRequest;
using backend::ChatResponse;
using backend::Speaker;
using harness::CellConfig;

constexpr const char* kNoExternal = "(no response)";

/// One provider call site. Records token usage as calls happen so failed turns
/// still account for what they spent.
class Caller {
public:
    Caller(const AgentBindings& providers, const CellConfig& cell, TokenLedger* tokens)
        : providers_(providers), cell_(cell), tokens_(tokens) {}

    ChatResponse call(RoleTag role, std::string system_prompt, std::vector<ChatMessage> messages, int turn,
                      int round) const {
        auto it = providers_.find(role);
        if (it == providers_.end() || !it->second.provider) {
            throw ConfigError("cell " + cell_.cell_id + " has no provider bound for role " +
                              std::string(backend::to_string(role)));
        }
        ChatRequest request;
        request.role = role;
        request.system_prompt = std::move(system_prompt);
        request.messages = std::move(messages);
        request.temperature = it->second.temperature;
        request.max_tokens = cell_.max_tokens;
        request.model = it->second.model;
        request.turn_index = turn;
        request.round_index = round;
        auto response = backend::complete(request, *it->second.provider);
        if (tokens_) {
            auto& totals = (*tokens_)[std::string(backend::to_string(role))];
            totals.input += response.input_tokens;
            totals.output += response.output_tokens;
        }
        return response;
    }

private:
    const AgentBindings& providers_;
    const CellConfig& cell_;
    TokenLedger* tokens_;
};

TraceEntry llm_entry(int turn, Agent agent, Action action, const ChatResponse& response) {
    TraceEntry e;
    e.turn = turn;
    e.agent = agent;
    e.action = action;
    e.suggestions = rtrim(response.text);
    e.latency_ms = response.latency_ms;
    e.metrics = CallMetrics{response.provider_id, response.model_id, response.input_tokens, response.output_tokens};
    return e;
}

TraceEntry structural_entry(int turn, Agent agent, Action action, std::string text) {
    TraceEntry e;
    e.turn = turn;
    e.agent = agent;
    e.action = action;
    e.suggestions = rtrim(text);
    return e;
}

const std::string& prompt_for(const DialogueSettings& settings, RoleTag role) {
    static const std::string kEmpty;
    auto it = settings.prompts.find(role);
    return it == settings.prompts.end() ? kEmpty : it->second;
}

void append_user(std::vector<ChatMessage>& messages, const std::string& text) {
    if (!messages.empty() && messages.back().speaker == Speaker::user) {
        messages.back().text += "\n\n" + text;
    } else {
        messages.push_back({Speaker::user, text});
    }
}

/// Tutor-facing view: scenario framing plus public turns only.
std::vector<ChatMessage> tutor_history(const ConversationContext& context, const DialogueTemplates& templates) {
    std::vector<ChatMessage> messages;
    messages.push_back({Speaker::user, templates.opening_prefix + context.scenario->opening_context});
    for (const auto& turn : context.history) {
        messages.push_back({Speaker::assistant, turn.tutor_public});
        messages.push_back({Speaker::user, turn.learner_public});
    }
    return messages;
}

std::vector<ChatMessage> learner_history(const ConversationContext& context) {
    std::vector<ChatMessage> messages;
    for (const auto& turn : context.history) {
        messages.push_back({Speaker::user, turn.tutor_public});
        messages.push_back({Speaker::assistant, turn.learner_public});
    }
    messages.push_back({Speaker::user, context.pending_tutor_message});
    return messages;
}

std::string learner_system_prompt(const DialogueSettings& settings, RoleTag role, const ConversationContext& context) {
    std::string system = prompt_for(settings, role);
    if (!context.scenario->learner_persona.empty()) {
        system += "\n\nPersona:\n" + context.scenario->learner_persona;
    }
    return system;
}

void require_scenario(const ConversationContext& context) {
    if (context.scenario == nullptr) {
        throw ConfigError("conversation context has no scenario");
    }
}

void tutor_turn_into(const ConversationContext& context, const CellConfig& cell, const AgentBindings& providers,
                     const DialogueSettings& settings, TraceRecorder& trace, TokenLedger* tokens,
                     std::string& public_text) {
    require_scenario(context);
    const int turn = context.turn_index;
    const auto& templates = settings.templates;
    const Caller caller(providers, cell, tokens);
    const bool multi = !cell.superego_disabled();

    const std::string latest_input = context.history.empty()
                                         ? context.scenario->opening_context
                                         : context.history.back().learner_public;
    auto context_entry = structural_entry(turn, Agent::tutor, Action::context_input, latest_input);
    context_entry.from_agent = Agent::tutor;
    context_entry.to_agent = Agent::ego;
    trace.append(std::move(context_entry));

    auto history = tutor_history(context, templates);
    const std::string& ego_prompt = prompt_for(settings, RoleTag::tutor_ego);
    const std::string& superego_prompt = prompt_for(settings, RoleTag::tutor_superego);

    auto ego_messages = history;
    if (multi && cell.pre_analyze()) {
        auto messages = history;
        append_user(messages, templates.pre_analyze_instruction);
        auto response = caller.call(RoleTag::tutor_superego, superego_prompt, std::move(messages), turn, 0);
        auto entry = llm_entry(turn, Agent::superego, Action::pre_analyze, response);
        entry.from_agent = Agent::superego;
        entry.to_agent = Agent::ego;
        append_user(ego_messages, templates.pre_analysis_prefix + entry.suggestions);
        trace.append(std::move(entry));
    }

    auto generated = caller.call(RoleTag::tutor_ego, ego_prompt, ego_messages, turn, 0);
    auto generate_entry = llm_entry(turn, Agent::ego, Action::generate, generated);
    generate_entry.from_agent = Agent::ego;
    if (multi) {
        generate_entry.to_agent = Agent::superego;
    }
    std::string draft = generate_entry.suggestions;
    trace.append(std::move(generate_entry));

    if (multi) {
        for (int round = 0; round < cell.max_rounds; ++round) {
            auto review_messages = history;
            append_user(review_messages, templates.review_instruction + "\n\nTutor draft:\n" + draft);
            auto reviewed = caller.call(RoleTag::tutor_superego, superego_prompt, std::move(review_messages), turn, round);
            auto review_entry = llm_entry(turn, Agent::superego, Action::review, reviewed);
            review_entry.from_agent = Agent::superego;
            review_entry.to_agent = Agent::ego;
            review_entry.round = round;
            const auto verdict = parse_superego_verdict(review_entry.suggestions);
            review_entry.verdict = verdict;
            trace.append(std::move(review_entry));
            if (verdict.verdict == Verdict::approved) {
                break;
            }

            auto revise_messages = ego_messages;
            revise_messages.push_back({Speaker::assistant, draft});
            revise_messages.push_back(
                {Speaker::user, templates.revise_instruction + (verdict.feedback.empty() ? reviewed.text : verdict.feedback)});
            auto revised = caller.call(RoleTag::tutor_ego, ego_prompt, std::move(revise_messages), turn, round);
            auto respond_entry = llm_entry(turn, Agent::ego, Action::respond, revised);
            respond_entry.from_agent = Agent::ego;
            respond_entry.to_agent = Agent::superego;
            respond_entry.round = round;
            draft = respond_entry.suggestions;
            trace.append(std::move(respond_entry));
        }
    }

    // The ego keeps final authority: its latest text ships whatever the last verdict was.
    auto finalize_entry = structural_entry(turn, Agent::ego, Action::finalize, draft);
    finalize_entry.from_agent = Agent::ego;
    finalize_entry.to_agent = Agent::learner;
    trace.append(std::move(finalize_entry));
    if (multi) {
        trace.append(structural_entry(turn, Agent::system, Action::memory_cycle, ""));
    }
    public_text = draft;
}

void learner_turn_into(const ConversationContext& context, const CellConfig& cell, const AgentBindings& providers,
                       const DialogueSettings& settings, TraceRecorder& trace, TokenLedger* tokens,
                       LearnerTurn& result) {
    require_scenario(context);
    const int turn = context.turn_index;
    const auto& templates = settings.templates;
    const Caller caller(providers, cell, tokens);
    auto history = learner_history(context);

    if (cell.learner_arch == harness::LearnerArch::unified) {
        auto system = learner_system_prompt(settings, RoleTag::learner_unified, context) + "\n\n" +
                      templates.unified_format_instruction;
        auto response = caller.call(RoleTag::learner_unified, system, history, turn, 0);
        auto entry = llm_entry(turn, Agent::learner, Action::deliberation, response);
        result = parse_internal_external(entry.suggestions);
        entry.suggestions = result.internal;
        entry.from_agent = Agent::learner;
        trace.append(std::move(entry));
    } else {
        auto ego_system = learner_system_prompt(settings, RoleTag::learner_ego, context) + "\n\n" +
                          templates.unified_format_instruction;
        auto initial = caller.call(RoleTag::learner_ego, ego_system, history, turn, 0);
        auto initial_entry = llm_entry(turn, Agent::learner_ego_initial, Action::deliberation, initial);
        initial_entry.from_agent = Agent::learner_ego_initial;
        initial_entry.to_agent = Agent::learner_superego;
        const std::string initial_text = initial_entry.suggestions;
        trace.append(std::move(initial_entry));

        std::vector<ChatMessage> critique_messages{
            {Speaker::user, "Tutor said:\n" + context.pending_tutor_message + "\n\nDraft reaction:\n" + initial_text +
                                "\n\n" + templates.learner_critique_instruction}};
        auto critique = caller.call(RoleTag::learner_superego,
                                    learner_system_prompt(settings, RoleTag::learner_superego, context),
                                    std::move(critique_messages), turn, 0);
        auto critique_entry = llm_entry(turn, Agent::learner_superego, Action::deliberation, critique);
        critique_entry.from_agent = Agent::learner_superego;
        critique_entry.to_agent = Agent::learner_ego_revision;
        const std::string critique_text = critique_entry.suggestions;
        trace.append(std::move(critique_entry));

        auto revise_messages = history;
        revise_messages.push_back({Speaker::assistant, initial_text});
        revise_messages.push_back({Speaker::user, templates.learner_revise_instruction + "\n" + critique_text});
        auto revised = caller.call(RoleTag::learner_ego, ego_system, std::move(revise_messages), turn, 1);
        auto revision_entry = llm_entry(turn, Agent::learner_ego_revision, Action::deliberation, revised);
        revision_entry.from_agent = Agent::learner_ego_revision;
        revision_entry.to_agent = Agent::learner;
        const auto parsed = parse_internal_external(revision_entry.suggestions);
        trace.append(std::move(revision_entry));

        const auto initial_parsed = parse_internal_external(initial_text);
        result.external = parsed.external;
        result.internal = initial_parsed.internal;
        for (const auto* part : {&critique_text, &parsed.internal}) {
            if (part->empty()) continue;
            if (!result.internal.empty()) result.internal += "\n";
            result.internal += *part;
        }
    }

    if (result.external.empty()) {
        result.external = kNoExternal;
    }
    auto final_entry = structural_entry(turn, Agent::learner, Action::final_output, result.external);
    final_entry.from_agent = Agent::learner;
    final_entry.to_agent = Agent::tutor;
    trace.append(std::move(final_entry));
}

/// Case-insensitive search for an ASCII marker.
std::size_t find_marker(const std::string& lowered, std::string_view marker) { return lowered.find(marker); }

}  // namespace

nlohmann::json DialogueTemplates::to_json() const {
    return {
        {"opening_prefix", opening_prefix},
        {"pre_analyze_instruction", pre_analyze_instruction},
        {"review_instruction", review_instruction},
        {"revise_instruction", revise_instruction},
        {"pre_analysis_prefix", pre_analysis_prefix},
        {"learner_critique_instruction", learner_critique_instruction},
        {"learner_revise_instruction", learner_revise_instruction},
        {"unified_format_instruction", unified_format_instruction},
    };
}

DialogueTemplates DialogueTemplates::from_json(const nlohmann::json& j) {
    DialogueTemplates t;
    auto read = [&](const char* key, std::string& field) {
        if (j.contains(key)) field = j.at(key).get<std::string>();
    };
    read("opening_prefix", t.opening_prefix);
    read("pre_analyze_instruction", t.pre_analyze_instruction);
    read("review_instruction", t.review_instruction);
    read("revise_instruction", t.revise_instruction);
    read("pre_analysis_prefix", t.pre_analysis_prefix);
    read("learner_critique_instruction", t.learner_critique_instruction);
    read("learner_revise_instruction", t.learner_revise_instruction);
    read("unified_format_instruction", t.unified_format_instruction);
    return t;
}

TutorTurnResult run_tutor_turn(const ConversationContext& context, const CellConfig& cell,
                               const AgentBindings& providers, const DialogueSettings& settings, TokenLedger* tokens) {
    TraceRecorder recorder(cell.superego_disabled());
    TutorTurnResult result;
    tutor_turn_into(context, cell, providers, settings, recorder, tokens, result.public_text);
    result.trace = recorder.release();
    return result;
}

LearnerTurnResult run_learner_turn(const ConversationContext& context, const CellConfig& cell,
                                   const AgentBindings& providers, const DialogueSettings& settings,
                                   TokenLedger* tokens) {
    TraceRecorder recorder(cell.superego_disabled());
    LearnerTurnResult result;
    learner_turn_into(context, cell, providers, settings, recorder, tokens, result.turn);
    result.trace = recorder.release();
    return result;
}

LearnerTurn parse_internal_external(std::string_view raw) {
    static constexpr std::string_view kInternal = "[internal]";
    static constexpr std::string_view kExternal = "[external]";
    const std::string text(raw);
    const std::string lowered = to_lower(text);
    const auto internal_pos = find_marker(lowered, kInternal);
    const auto external_pos = find_marker(lowered, kExternal);

    LearnerTurn turn;
    if (internal_pos == std::string::npos && external_pos == std::string::npos) {
        turn.external = trim(text);
        return turn;
    }
    auto section = [&](std::size_t start, std::size_t marker_length, std::size_t other) {
        const std::size_t begin = start + marker_length;
        const std::size_t end = (other != std::string::npos && other > start) ? other : text.size();
        return trim(std::string_view(text).substr(begin, end - begin));
    };
    if (internal_pos != std::string::npos) {
        turn.internal = section(internal_pos, kInternal.size(), external_pos);
    }
    if (external_pos != std::string::npos) {
        turn.external = section(external_pos, kExternal.size(), internal_pos);
    }
    return turn;
}

SuperegoVerdict parse_superego_verdict(std::string_view raw) {
    SuperegoVerdict failed;
    failed.verdict = Verdict::approved;
    failed.intervention = Intervention::none;
    failed.parse_failed = true;

    const auto open = raw.find('{');
    const auto close = raw.rfind('}');
    if (open == std::string_view::npos || close == std::string_view::npos || close < open) {
        return failed;
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(raw.substr(open, close - open + 1));
    } catch (const nlohmann::json::exception&) {
        return failed;
    }
    if (!j.is_object() || !j.contains("verdict") || !j["verdict"].is_string()) {
        return failed;
    }
    const auto verdict_text = to_lower(j["verdict"].get<std::string>());
    SuperegoVerdict v;
    if (verdict_text == "approved" || verdict_text == "approve") {
        v.verdict = Verdict::approved;
    } else if (verdict_text == "rejected" || verdict_text == "reject") {
        v.verdict = Verdict::rejected;
    } else {
        return failed;
    }
    if (j.contains("confidence") && j["confidence"].is_number()) {
        v.confidence = std::clamp(j["confidence"].get<double>(), 0.0, 1.0);
    } else {
        v.confidence = 0.5;
    }
    if (j.contains("feedback") && j["feedback"].is_string()) {
        v.feedback = j["feedback"].get<std::string>();
    }
    if (v.verdict == Verdict::approved) {
        v.intervention = Intervention::none;
    } else {
        const auto intervention = j.contains("intervention") && j["intervention"].is_string()
                                      ? to_lower(j["intervention"].get<std::string>())
                                      : std::string("revise");
        v.intervention = intervention == "none" ? Intervention::none : Intervention::revise;
    }
    return v;
}

DialogueLog run_dialogue(const CellConfig& cell, const harness::Scenario& scenario, const AgentBindings& providers,
                         const DialogueSettings& settings, const std::string& dialogue_id) {
    DialogueLog log;
    log.dialogue_id = dialogue_id;
    log.cell_id = cell.cell_id;
    log.scenario_id = scenario.scenario_id;
    log.scenario_context = scenario.title.empty() ? scenario.opening_context
                                                  : scenario.title + "\n" + scenario.opening_context;
    log.recognition = std::string(harness::to_string(cell.recognition));
    log.tutor_arch = std::string(harness::to_string(cell.tutor_arch));
    log.learner_arch = std::string(harness::to_string(cell.learner_arch));

    TraceRecorder recorder(cell.superego_disabled());
    TokenLedger tokens;
    ConversationContext context;
    context.scenario = &scenario;
    try {
        for (int turn = 0; turn < scenario.turn_count; ++turn) {
            context.turn_index = turn;
            context.pending_tutor_message.clear();
            std::string tutor_public;
            tutor_turn_into(context, cell, providers, settings, recorder, &tokens, tutor_public);
            context.pending_tutor_message = tutor_public;
            LearnerTurn learner;
            learner_turn_into(context, cell, providers, settings, recorder, &tokens, learner);
            context.history.push_back({tutor_public, learner.external});
        }
    } catch (const Error& e) {
        log.failed = true;
        log.error = e.category() + ": " + e.what();
    }
    log.turns = context.history;
    log.trace = recorder.release();
    log.per_role_token_totals = std::move(tokens);
    return log;
}

std::string_view to_string(StepKind kind) {
    switch (kind) {
        case StepKind::context: return "context";
        case StepKind::pre_analysis: return "pre_analysis";
        case StepKind::deliberation_draft: return "deliberation_draft";
        case StepKind::review: return "review";
        case StepKind::output: return "output";
        case StepKind::finalize: return "finalize";
        case StepKind::memory: return "memory";
    }
    return "unknown";
}

namespace {

enum class Phase {
    start,
    context,
    pre_analyze,
    ego_output,
    review_approved,
    review_rejected,
    finalized,
    memory,
    learner_initial,
    learner_superego,
    learner_revision,
    learner_unified,
    learner_done,
};

bool is_tutor_side(Agent agent) {
    return agent == Agent::tutor || agent == Agent::ego || agent == Agent::superego || agent == Agent::system;
}

[[noreturn]] void out_of_order(std::size_t index, const TraceEntry& e, const char* why) {
    throw StructureError("trace entry " + std::to_string(index) + " (" + std::string(to_string(e.agent)) + "/" +
                         std::string(to_string(e.action)) + ", turn " + std::to_string(e.turn) + "): " + why);
}

}  // namespace

std::vector<TraceStep> trace_to_steps(const std::vector<TraceEntry>& trace, bool superego_disabled) {
    std::vector<TraceStep> steps;
    Phase phase = Phase::start;
    int turn = -1;
    int reviews_in_turn = 0;

    for (std::size_t i = 0; i < trace.size(); ++i) {
        const auto& e = trace[i];
        if (superego_disabled && e.agent == Agent::superego) {
            out_of_order(i, e, "superego entry in a superego-disabled trace");
        }
        if (e.agent == Agent::tutor && e.action == Action::context_input) {
            if (!(phase == Phase::start || phase == Phase::learner_done)) {
                out_of_order(i, e, "turn started before the previous turn completed");
            }
            if (e.turn != turn + 1) {
                out_of_order(i, e, "turn index is not consecutive");
            }
            turn = e.turn;
            reviews_in_turn = 0;
            phase = Phase::context;
            steps.push_back({turn, StepKind::context, i});
            continue;
        }
        if (phase == Phase::start || e.turn != turn) {
            out_of_order(i, e, "entry outside its turn");
        }

        // Ego output is a deliberation draft when the next tutor-side entry is the superego.
        auto superego_follows = [&]() {
            for (std::size_t k = i + 1; k < trace.size(); ++k) {
                if (is_tutor_side(trace[k].agent)) {
                    return trace[k].agent == Agent::superego && trace[k].turn == e.turn;
                }
            }
            return false;
        };

        if (e.agent == Agent::superego && e.action == Action::pre_analyze) {
            if (phase != Phase::context) out_of_order(i, e, "pre_analyze must follow context_input");
            phase = Phase::pre_analyze;
            steps.push_back({turn, StepKind::pre_analysis, i});
        } else if (e.agent == Agent::ego && e.action == Action::generate) {
            if (phase != Phase::context && phase != Phase::pre_analyze) {
                out_of_order(i, e, "generate must follow context_input or pre_analyze");
            }
            phase = Phase::ego_output;
            steps.push_back({turn, superego_follows() ? StepKind::deliberation_draft : StepKind::output, i});
        } else if (e.agent == Agent::superego && e.action == Action::review) {
            if (phase != Phase::ego_output) out_of_order(i, e, "review must follow ego output");
            if (!e.round || *e.round != reviews_in_turn) out_of_order(i, e, "review round out of sequence");
            ++reviews_in_turn;
            const bool rejected = e.verdict && e.verdict->verdict == Verdict::rejected;
            phase = rejected ? Phase::review_rejected : Phase::review_approved;
            steps.push_back({turn, StepKind::review, i});
        } else if (e.agent == Agent::ego && e.action == Action::respond) {
            if (phase != Phase::review_rejected) out_of_order(i, e, "respond must follow a rejecting review");
            if (!e.round || *e.round != reviews_in_turn - 1) out_of_order(i, e, "respond round out of sequence");
            phase = Phase::ego_output;
            steps.push_back({turn, superego_follows() ? StepKind::deliberation_draft : StepKind::output, i});
        } else if (e.agent == Agent::ego && e.action == Action::finalize) {
            if (phase != Phase::ego_output && phase != Phase::review_approved) {
                out_of_order(i, e, "finalize must follow ego output or an approving review");
            }
            phase = Phase::finalized;
            steps.push_back({turn, StepKind::finalize, i});
        } else if (e.agent == Agent::system && e.action == Action::memory_cycle) {
            if (phase != Phase::finalized) out_of_order(i, e, "memory_cycle must follow finalize");
            phase = Phase::memory;
            steps.push_back({turn, StepKind::memory, i});
        } else if (e.agent == Agent::learner_ego_initial && e.action == Action::deliberation) {
            if (phase != Phase::finalized && phase != Phase::memory) out_of_order(i, e, "learner spoke before tutor finalized");
            phase = Phase::learner_initial;
        } else if (e.agent == Agent::learner_superego && e.action == Action::deliberation) {
            if (phase != Phase::learner_initial) out_of_order(i, e, "learner superego must follow learner ego");
            phase = Phase::learner_superego;
        } else if (e.agent == Agent::learner_ego_revision && e.action == Action::deliberation) {
            if (phase != Phase::learner_superego) out_of_order(i, e, "learner revision must follow learner superego");
            phase = Phase::learner_revision;
        } else if (e.agent == Agent::learner && e.action == Action::deliberation) {
            if (phase != Phase::finalized && phase != Phase::memory) out_of_order(i, e, "learner spoke before tutor finalized");
            phase = Phase::learner_unified;
        } else if (e.agent == Agent::learner && e.action == Action::final_output) {
            if (phase != Phase::learner_revision && phase != Phase::learner_unified) {
                out_of_order(i, e, "learner output without deliberation");
            }
            phase = Phase::learner_done;
        } else {
            out_of_order(i, e, "unexpected agent/action pair");
        }
    }
    return steps;
}

}  // namespace tutoreval::dialogue
