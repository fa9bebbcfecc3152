#pragma once

// Hand-built dialogue logs for metrics tests that need exact review counts.

#include <string>
#include <vector>

#include "tutoreval/dialogue/trace.hpp"

namespace tutoreval::testing {

/// One turn of a multi-agent trace: a generate, then one review per verdict
/// with a respond after every rejection, then finalize.
inline void append_reviewed_turn(std::vector<dialogue::TraceEntry>& trace, int turn,
                                 const std::vector<dialogue::Verdict>& verdicts, const std::string& draft,
                                 const std::string& revision, const std::string& feedback = "too vague") {
    using dialogue::Action;
    using dialogue::Agent;
    auto entry = [&](Agent agent, Action action, std::string text, std::optional<int> round = std::nullopt) {
        dialogue::TraceEntry e;
        e.turn = turn;
        e.agent = agent;
        e.action = action;
        e.round = round;
        e.suggestions = std::move(text);
        return e;
    };
    trace.push_back(entry(Agent::system, Action::context_input, "context"));
    trace.push_back(entry(Agent::ego, Action::generate, draft, 0));
    std::string current = draft;
    for (std::size_t r = 0; r < verdicts.size(); ++r) {
        dialogue::SuperegoVerdict v;
        v.verdict = verdicts[r];
        v.confidence = 0.8;
        v.intervention = v.verdict == dialogue::Verdict::rejected ? dialogue::Intervention::revise
                                                                   : dialogue::Intervention::none;
        v.feedback = v.verdict == dialogue::Verdict::rejected ? feedback : "fine";
        auto review = entry(Agent::superego, Action::review, v.to_json().dump(), static_cast<int>(r));
        review.verdict = v;
        trace.push_back(std::move(review));
        if (v.verdict == dialogue::Verdict::rejected) {
            current = revision;
            trace.push_back(entry(Agent::ego, Action::respond, current, static_cast<int>(r) + 1));
        }
    }
    trace.push_back(entry(Agent::ego, Action::finalize, current));
    trace.push_back(entry(Agent::tutor, Action::memory_cycle, ""));
}

/// Logs holding `total` single-review turns of which `approved` approve,
/// spread over dialogues of `turns_per_dialogue` turns.
inline std::vector<dialogue::DialogueLog> approval_fixture(int total, int approved, int turns_per_dialogue = 3) {
    std::vector<dialogue::DialogueLog> logs;
    for (int i = 0; i < total; ++i) {
        if (i % turns_per_dialogue == 0) {
            dialogue::DialogueLog log;
            log.dialogue_id = "fixture-" + std::to_string(logs.size());
            log.cell_id = "cell_82_base_multi_unified";
            log.recognition = "base";
            log.tutor_arch = "multi";
            log.learner_arch = "unified";
            logs.push_back(std::move(log));
        }
        auto& log = logs.back();
        const int turn = i % turns_per_dialogue;
        const auto verdict = i < approved ? dialogue::Verdict::approved : dialogue::Verdict::rejected;
        append_reviewed_turn(log.trace, turn, {verdict}, "draft reply", "revised reply");
        log.turns.push_back({verdict == dialogue::Verdict::approved ? "draft reply" : "revised reply", "ok"});
    }
    return logs;
}

}  // namespace tutoreval::testing
