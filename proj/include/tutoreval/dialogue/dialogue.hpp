#pragma once

#include <map>
#include <string>
#include <vector>

#include "tutoreval/backend/chat.hpp"
#include "tutoreval/dialogue/trace.hpp"
#include "tutoreval/harness/cell.hpp"

namespace tutoreval::dialogue {

using backend::RoleTag;

/// A provider resolved for one role, with the model and temperature to request.
struct BoundProvider {
    backend::ProviderHandle provider;
    std::string model;
    double temperature = 0.6;
};

using AgentBindings = std::map<RoleTag, BoundProvider>;
using PromptSet = std::map<RoleTag, std::string>;

/// Framing text wrapped around prompts for each deliberation step. Config data;
/// the defaults are only a starting point.
struct DialogueTemplates {
    std::string opening_prefix = "Scenario context:\n";
    std::string pre_analyze_instruction =
        "Before the tutor drafts a reply, reinterpret the learner's signals: what state are they in and what do they need?";
    std::string review_instruction =
        "Review the tutor draft below. Reply with a JSON object "
        "{\"verdict\": \"approved\"|\"rejected\", \"confidence\": 0-1, \"feedback\": \"...\", "
        "\"intervention\": \"revise\"|\"none\"}.";
    std::string revise_instruction = "Your supervisor critiqued your draft. Revise it. Feedback:\n";
    std::string pre_analysis_prefix = "Pre-analysis of the learner's state:\n";
    std::string learner_critique_instruction =
        "Critique this draft reaction: is it too superficial? What is being missed?";
    std::string learner_revise_instruction =
        "Revise your reaction using the critique. Answer with [INTERNAL] thoughts and [EXTERNAL] message.";
    std::string unified_format_instruction =
        "Answer with an [INTERNAL] section for private thoughts and an [EXTERNAL] section for what you say.";

    nlohmann::json to_json() const;
    static DialogueTemplates from_json(const nlohmann::json& j);
};

struct DialogueSettings {
    PromptSet prompts;
    DialogueTemplates templates;
};

/// Everything a turn may look at. Holds public text only; internal learner
/// deliberation never enters here.
struct ConversationContext {
    const harness::Scenario* scenario = nullptr;
    std::vector<PublicTurn> history;  // completed turns
    int turn_index = 0;
    std::string pending_tutor_message;  // set when the learner is about to answer
};

struct TutorTurnResult {
    std::string public_text;
    std::vector<TraceEntry> trace;
};

struct LearnerTurnResult {
    LearnerTurn turn;
    std::vector<TraceEntry> trace;
};

/// Token usage reported by every provider call during a turn, keyed by role.
using TokenLedger = std::map<std::string, TokenTotals>;

TutorTurnResult run_tutor_turn(const ConversationContext& context, const harness::CellConfig& cell,
                               const AgentBindings& providers, const DialogueSettings& settings,
                               TokenLedger* tokens = nullptr);

LearnerTurnResult run_learner_turn(const ConversationContext& context, const harness::CellConfig& cell,
                                   const AgentBindings& providers, const DialogueSettings& settings,
                                   TokenLedger* tokens = nullptr);

/// Splits "[INTERNAL] ... [EXTERNAL] ..." case-insensitively in either order.
/// Without markers the whole text is external.
LearnerTurn parse_internal_external(std::string_view raw);

/// Parses the superego JSON contract. Anything unparseable auto-approves with
/// parse_failed set.
SuperegoVerdict parse_superego_verdict(std::string_view raw);

/// Runs scenario.turn_count tutor/learner exchanges. Provider failures do not
/// throw: the partial log is returned with failed=true.
DialogueLog run_dialogue(const harness::CellConfig& cell, const harness::Scenario& scenario,
                         const AgentBindings& providers, const DialogueSettings& settings,
                         const std::string& dialogue_id);

enum class StepKind {
    context,
    pre_analysis,
    deliberation_draft,  // ego output that a superego entry follows
    review,
    output,              // ego output that goes straight to finalize
    finalize,
    memory,
};

std::string_view to_string(StepKind kind);

struct TraceStep {
    int turn = 0;
    StepKind kind = StepKind::context;
    std::size_t entry_index = 0;
};

/// Projects the tutor side of a trace onto canonical steps and checks causal
/// order (learner entries are order-checked but not projected). Throws
/// StructureError on any out-of-order entry, or on a superego entry when
/// `superego_disabled` is set.
std::vector<TraceStep> trace_to_steps(const std::vector<TraceEntry>& trace, bool superego_disabled = false);

}  // namespace tutoreval::dialogue
